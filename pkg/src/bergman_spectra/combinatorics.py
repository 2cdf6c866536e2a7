"""Multi-index bookkeeping for polynomial spaces on C^n.

Everything here is exact integer arithmetic; Python integers are unbounded
so multinomials never overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence


class MultiIndex(tuple):
    """Tuple of non-negative integers ``(p_1, ..., p_n)``."""

    def __new__(cls, entries: Iterable[int] = ()):
        values = tuple(int(e) for e in entries)
        if any(v < 0 for v in values):
            raise ValueError(f"multi-index entries must be >= 0, got {values}")
        return super().__new__(cls, values)

    def degree(self) -> int:
        return sum(self)

    def factorial(self) -> int:
        """``p! = p_1! ... p_n!``."""
        out = 1
        for v in self:
            out *= math.factorial(v)
        return out

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)})"


def compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All ``p`` in N^n with ``|p| = k``, lexicographically ascending."""
    if n == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in compositions(n - 1, k - first):
            yield (first,) + rest


@dataclass(frozen=True)
class BasisOrder:
    """Graded-lex enumeration of ``J_n(m) = {p : |p| <= m}``.

    Indices are sorted by total degree and then lexicographically, so each
    homogeneous level occupies a contiguous range of positions.
    """

    n: int
    m: int
    indices: tuple[MultiIndex, ...]
    position: dict = field(repr=False, compare=False, hash=False)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i: int) -> MultiIndex:
        return self.indices[i]

    def index_of(self, p: Sequence[int]) -> int:
        return self.position[tuple(p)]

    @property
    def exponents(self):
        """``(dim, n)`` integer array of the multi-indices."""
        import numpy as np

        return np.array(self.indices, dtype=np.int64).reshape(len(self), self.n)

    def level_slice(self, k: int) -> slice:
        """Positions of the degree-``k`` monomials."""
        start = math.comb(self.n + k - 1, self.n) if k > 0 else 0
        return slice(start, start + homogeneous_dimension(self.n, k))


@lru_cache(maxsize=128)
def enumerate_multi_indices(n: int, m: int) -> BasisOrder:
    """Enumerate ``J_n(m)`` in graded lexicographic order.

    >>> [tuple(p) for p in enumerate_multi_indices(2, 1)]
    [(0, 0), (0, 1), (1, 0)]
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    indices = tuple(MultiIndex(p) for k in range(m + 1) for p in compositions(n, k))
    position = {tuple(p): i for i, p in enumerate(indices)}
    return BasisOrder(n=n, m=m, indices=indices, position=position)


def multinomial(k: int, p: Sequence[int]) -> int:
    """Exact multinomial coefficient ``k! / (p_1! ... p_n!)``."""
    if sum(p) != k:
        raise ValueError(f"|p| = {sum(p)} does not equal k = {k}")
    if any(v < 0 for v in p):
        raise ValueError(f"negative entry in {tuple(p)}")
    out, remaining = 1, k
    for v in p:
        out *= math.comb(remaining, v)
        remaining -= v
    return out


def log_multinomial(k: int, p: Sequence[int]) -> float:
    """Natural log of the multinomial, via log-gamma; for large sweeps."""
    if sum(p) != k:
        raise ValueError(f"|p| = {sum(p)} does not equal k = {k}")
    return math.lgamma(k + 1) - sum(math.lgamma(v + 1) for v in p)


def homogeneous_dimension(n: int, k: int) -> int:
    """Dimension ``C(n+k-1, k)`` of degree-``k`` homogeneous polynomials on C^n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if k < 0:
        return 0
    return math.comb(n + k - 1, k)


def space_dimension(n: int, m: int) -> int:
    return math.comb(n + m, n)
