"""Bounded symbols with a declared invariance group, and Haar averaging.

Invariance groups are the block-diagonal subgroups
``K = U(k_1) x ... x U(k_s)`` of U(n).  The torus T^n is the partition
``(1, ..., 1)`` and U(n) itself is ``(n,)``.  A symbol invariant under ``K``
depends only on the block norms ``rho_b = |z^{(b)}|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

INVARIANCE_CLASSES = ("general", "torus", "block", "unitary")


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous block sizes ``(k_1, ..., k_s)`` of the coordinates of C^n."""

    blocks: tuple[int, ...]

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        if not blocks or any(b < 1 for b in blocks):
            raise ValueError(f"block sizes must be positive, got {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def torus(cls, n: int) -> "BlockPartition":
        return cls((1,) * n)

    @classmethod
    def unitary(cls, n: int) -> "BlockPartition":
        return cls((n,))

    @property
    def n(self) -> int:
        return sum(self.blocks)

    @property
    def s(self) -> int:
        return len(self.blocks)

    def is_torus(self) -> bool:
        return all(b == 1 for b in self.blocks)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b))
            start += b
        return out

    def boundaries(self) -> frozenset[int]:
        return frozenset(np.cumsum(self.blocks)[:-1].tolist())

    def refines(self, other: "BlockPartition") -> bool:
        """True when every block of ``self`` sits inside a block of ``other``.

        Equivalently the group of ``self`` is a subgroup of the group of ``other``.
        """
        return self.n == other.n and other.boundaries() <= self.boundaries()

    def common_refinement(self, other: "BlockPartition") -> "BlockPartition":
        if self.n != other.n:
            raise ValueError("partitions of different n")
        cuts = sorted(self.boundaries() | other.boundaries() | {0, self.n})
        return BlockPartition(tuple(b - a for a, b in zip(cuts, cuts[1:])))

    def block_degrees(self, p: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(sum(p[sl])) for sl in self.slices())

    def block_norms_sq(self, z: np.ndarray) -> np.ndarray:
        """``(N, s)`` array of squared block norms."""
        a2 = np.abs(z) ** 2
        return np.stack([a2[..., sl].sum(axis=-1) for sl in self.slices()], axis=-1)

    def representative_points(self, t: np.ndarray) -> np.ndarray:
        """Points whose squared block norms are the rows of ``t`` (shape ``(N, s)``)."""
        t = np.asarray(t, dtype=float)
        z = np.zeros(t.shape[:-1] + (self.n,), dtype=complex)
        for b, sl in enumerate(self.slices()):
            z[..., sl.start] = np.sqrt(t[..., b])
        return z


def _norm_sq(z: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(z) ** 2, axis=-1)


@dataclass(frozen=True)
class Symbol:
    """A bounded pointwise symbol.

    evaluator : maps ``(N, n)`` complex points to ``(N,)`` values.
    invariance : one of ``general``, ``torus``, ``block``, ``unitary``.
    partition : the block partition for ``block`` invariance.
    bound : documented sup-norm bound.
    jumps : squared norms ``|z|^2`` where a radial profile is discontinuous.
    stderr : for Monte Carlo averaged symbols, a pointwise standard error.
    """

    family: str
    parameters: Mapping[str, float]
    invariance: str
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    partition: BlockPartition | None = None
    bound: float = math.inf
    real: bool = True
    jumps: tuple[float, ...] = ()
    n: int | None = None
    stderr: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.invariance not in INVARIANCE_CLASSES:
            raise ValueError(f"unknown invariance {self.invariance!r}")
        if self.invariance == "block" and self.partition is None:
            raise ValueError("block invariance requires a partition")
        if self.partition is not None and self.n is None:
            object.__setattr__(self, "n", self.partition.n)

    def __call__(self, z) -> np.ndarray:
        return evaluate(self, z)

    def invariance_partition(self, n: int) -> BlockPartition | None:
        """Coarsest block partition whose group the symbol is invariant under."""
        if self.invariance == "unitary":
            return BlockPartition.unitary(n)
        if self.invariance == "torus":
            return BlockPartition.torus(n)
        if self.invariance == "block":
            if self.partition.n != n:
                raise ValueError(f"symbol partition {self.partition.blocks} is not a partition of n={n}")
            return self.partition
        return None

    def is_invariant_under(self, kappa: BlockPartition) -> bool:
        own = self.invariance_partition(kappa.n)
        return own is not None and kappa.refines(own)

    # pointwise affine combinations
    def __add__(self, other):
        if isinstance(other, Symbol):
            return affine_combination([(1.0, self), (1.0, other)])
        return affine_combination([(1.0, self)], constant=other)

    __radd__ = __add__

    def __mul__(self, c):
        if isinstance(c, Symbol):
            return NotImplemented
        return affine_combination([(c, self)])

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self


def evaluate(a: Symbol, z) -> np.ndarray | complex:
    """Evaluate at one point ``(n,)`` (returns a scalar) or a batch ``(N, n)``."""
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    zz = z.reshape(1, -1) if single else z
    if a.n is not None and zz.shape[-1] != a.n:
        raise ValueError(f"symbol {a.family} is defined on C^{a.n}, got points in C^{zz.shape[-1]}")
    if not np.all(np.isfinite(zz)):
        raise ValueError("points must be finite")
    out = np.asarray(a.evaluator(zz))
    if single:
        return out[0].item()
    return out


def _meet(symbols: Sequence[Symbol]) -> tuple[str, BlockPartition | None, int | None]:
    """Invariance class shared by all symbols."""
    ns = {s.n for s in symbols if s.n is not None}
    if len(ns) > 1:
        raise ValueError(f"symbols defined on different dimensions {sorted(ns)}")
    n = ns.pop() if ns else None
    classes = {s.invariance for s in symbols}
    if "general" in classes:
        return "general", None, n
    if classes <= {"unitary"}:
        return "unitary", None, n
    if "block" not in classes:
        return "torus", None, n
    parts = [s.partition for s in symbols if s.invariance == "block"]
    part = parts[0]
    for q in parts[1:]:
        part = part.common_refinement(q)
    if "torus" in classes or part.is_torus():
        return "torus", None, n
    return "block", part, n


def affine_combination(terms: Sequence[tuple[complex, Symbol]], constant: complex = 0.0) -> Symbol:
    """The symbol ``constant + sum_j c_j a_j``."""
    symbols = [s for _, s in terms]
    coeffs = [complex(c) for c, _ in terms]
    invariance, part, n = _meet(symbols)
    real = all(c.imag == 0 for c in coeffs) and complex(constant).imag == 0 and all(s.real for s in symbols)
    dtype = float if real else complex

    def evaluator(z):
        out = np.full(z.shape[0], constant, dtype=dtype)
        for c, s in zip(coeffs, symbols):
            vals = s.evaluator(z)
            out = out + (c.real if real else c) * vals
        return out

    stderrs = [(abs(c), s.stderr) for c, s in zip(coeffs, symbols) if s.stderr is not None]
    stderr = None
    if stderrs:

        def stderr(z):
            return np.sqrt(sum((c * f(z)) ** 2 for c, f in stderrs))

    bound = abs(constant) + sum(abs(c) * s.bound for c, s in zip(coeffs, symbols))
    jumps = tuple(sorted({j for s in symbols for j in s.jumps}))
    return Symbol(
        family="affine",
        parameters={"constant": constant, "terms": len(terms)},
        invariance=invariance,
        evaluator=evaluator,
        partition=part,
        bound=bound,
        real=real,
        jumps=jumps,
        n=n,
        stderr=stderr,
    )


# ---------------------------------------------------------------------------
# catalogue

CATALOGUE = (
    "constant",
    "coordinate_weight",
    "block_weight",
    "total_weight",
    "ball_indicator",
    "gaussian",
    "phase",
)


def _coordinate(parameters, key, n) -> int:
    if key not in parameters:
        raise ValueError(f"missing parameter {key!r}")
    i = parameters[key]
    if int(i) != i or i < 1 or (n is not None and i > n):
        raise ValueError(f"parameter {key}={i} must be an integer in 1..{n if n else 'n'}")
    return int(i)


def make_symbol(
    family: str,
    parameters: Mapping[str, float] | None = None,
    partition: BlockPartition | Sequence[int] | None = None,
    n: int | None = None,
) -> Symbol:
    """Build a catalogue symbol.

    ==================  =================================  ===========
    family              value                              invariance
    ==================  =================================  ===========
    constant(c)         c                                  unitary
    coordinate_weight   |z_i|^2 / (1+|z|^2)                torus
    block_weight        rho_b^2 / (1+|z|^2)                block
    total_weight        |z|^2 / (1+|z|^2)                  unitary
    ball_indicator(R)   1 if |z| <= R else 0               unitary
    gaussian(alpha)     exp(-alpha |z|^2)                  unitary
    phase(i)            Re(z_i) / (1+|z|)                  general
    ==================  =================================  ===========

    Indices ``i`` and ``b`` are 1-based.  ``block_weight`` takes its
    partition from ``partition``.
    """
    parameters = dict(parameters or {})
    if family not in CATALOGUE:
        raise ValueError(f"unknown symbol family {family!r}; catalogue: {', '.join(CATALOGUE)}")
    if partition is not None and not isinstance(partition, BlockPartition):
        partition = BlockPartition(tuple(partition))

    if family == "constant":
        c = complex(parameters.get("c", 1.0))
        real = c.imag == 0
        val = c.real if real else c
        return Symbol(
            family, {"c": val}, "unitary",
            lambda z: np.full(z.shape[0], val, dtype=float if real else complex),
            bound=abs(c), real=real, n=n,
        )

    if family == "coordinate_weight":
        i = _coordinate(parameters, "i", n)
        return Symbol(
            family, {"i": i}, "torus",
            lambda z: np.abs(z[:, i - 1]) ** 2 / (1.0 + _norm_sq(z)),
            bound=1.0, n=n,
        )

    if family == "block_weight":
        if partition is None:
            raise ValueError("block_weight requires a partition")
        if n is not None and partition.n != n:
            raise ValueError(f"partition {partition.blocks} does not sum to n={n}")
        b = _coordinate(parameters, "b", partition.s)
        sl = partition.slices()[b - 1]
        if partition.is_torus():
            invariance = "torus"
        elif partition.s == 1:
            invariance = "unitary"
        else:
            invariance = "block"
        return Symbol(
            family, {"b": b}, invariance,
            lambda z: np.sum(np.abs(z[:, sl]) ** 2, axis=1) / (1.0 + _norm_sq(z)),
            partition=partition if invariance == "block" else None,
            bound=1.0, n=partition.n,
        )

    if family == "total_weight":
        return Symbol(
            family, {}, "unitary",
            lambda z: _norm_sq(z) / (1.0 + _norm_sq(z)),
            bound=1.0, n=n,
        )

    if family == "ball_indicator":
        R = float(parameters.get("R", 1.0))
        if not R > 0 or not math.isfinite(R):
            raise ValueError(f"ball_indicator radius must be positive and finite, got {R}")
        return Symbol(
            family, {"R": R}, "unitary",
            lambda z: (_norm_sq(z) <= R * R).astype(float),
            bound=1.0, jumps=(R * R,), n=n,
        )

    if family == "gaussian":
        alpha = float(parameters.get("alpha", 1.0))
        if not alpha >= 0 or not math.isfinite(alpha):
            raise ValueError(f"gaussian alpha must be non-negative and finite, got {alpha}")
        return Symbol(
            family, {"alpha": alpha}, "unitary",
            lambda z: np.exp(-alpha * _norm_sq(z)),
            bound=1.0, n=n,
        )

    # phase
    i = _coordinate(parameters, "i", n)
    return Symbol(
        family, {"i": i}, "general",
        lambda z: z[:, i - 1].real / (1.0 + np.sqrt(_norm_sq(z))),
        bound=1.0, n=n,
    )


def symbol_from_spec(spec: Mapping, n: int | None = None) -> Symbol:
    """Build a symbol from ``{"family", "parameters", "invariance", "partition"}``.

    A declared ``invariance`` must match the catalogue's class for the family.
    """
    family = spec.get("family")
    partition = spec.get("partition")
    a = make_symbol(family, spec.get("parameters") or {}, partition=partition, n=n)
    declared = spec.get("invariance")
    if declared is not None and declared != a.invariance:
        raise ValueError(f"family {family!r} has invariance {a.invariance!r}, not {declared!r}")
    return a


# ---------------------------------------------------------------------------
# Haar averaging


def radialize_torus(a: Symbol, phase_grid: int, n: int | None = None) -> Symbol:
    """Average ``a`` over T^n with a ``phase_grid``-point trapezoid rule per circle.

    The grid is a finite subgroup of T^n, so averaging twice equals averaging
    once up to rounding.
    """
    if phase_grid < 1:
        raise ValueError(f"phase_grid must be >= 1, got {phase_grid}")
    n = n or a.n
    if n is None:
        raise ValueError("dimension n is required for an n-agnostic symbol")
    roots = np.exp(2j * np.pi * np.arange(phase_grid) / phase_grid)
    grids = np.meshgrid(*([roots] * n), indexing="ij")
    phases = np.stack([g.ravel() for g in grids], axis=1)  # (G^n, n)

    def evaluator(z):
        zz = (z[:, None, :] * phases[None, :, :]).reshape(-1, n)
        vals = np.asarray(a.evaluator(zz)).reshape(z.shape[0], -1)
        return vals.mean(axis=1)

    return Symbol(
        family=f"torus_average({a.family})",
        parameters={**a.parameters, "phase_grid": phase_grid},
        invariance="torus" if a.invariance in ("general", "torus") else a.invariance,
        evaluator=evaluator,
        partition=a.partition if a.invariance == "block" else None,
        bound=a.bound,
        real=a.real,
        jumps=a.jumps,
        n=n,
    )


def radialize_block(
    a: Symbol,
    kappa: BlockPartition,
    sphere_samples: int,
    seed: int,
) -> Symbol:
    """Monte Carlo average of ``a`` over ``U(k_1) x ... x U(k_s)``.

    The ``sphere_samples`` Haar elements are drawn once at construction; the
    returned symbol carries a pointwise standard error.
    """
    from .representation import haar_samples

    if sphere_samples < 1:
        raise ValueError(f"sphere_samples must be >= 1, got {sphere_samples}")
    if a.n is not None and a.n != kappa.n:
        raise ValueError(f"partition of {kappa.n} given for a symbol on C^{a.n}")
    n = kappa.n
    ks = haar_samples(kappa, sphere_samples, seed)  # (S, n, n)
    kinv = np.conj(np.transpose(ks, (0, 2, 1)))

    rows = max(1, (1 << 21) // sphere_samples)

    def _values(z):
        out = []
        for start in range(0, z.shape[0], rows):
            chunk = z[start : start + rows]
            zz = np.einsum("sij,nj->nsi", kinv, chunk).reshape(-1, n)
            out.append(np.asarray(a.evaluator(zz)).reshape(chunk.shape[0], sphere_samples))
        return np.concatenate(out, axis=0)

    def evaluator(z):
        return _values(z).mean(axis=1)

    def stderr(z):
        if sphere_samples < 2:
            return np.full(z.shape[0], np.inf)
        return _values(z).std(axis=1, ddof=1) / math.sqrt(sphere_samples)

    # averaging over K only guarantees K-invariance, unless a was K-invariant already
    own = a.invariance_partition(n) if a.is_invariant_under(kappa) else kappa
    if own.is_torus():
        invariance, part = "torus", None
    elif own.s == 1:
        invariance, part = "unitary", None
    else:
        invariance, part = "block", own
    return Symbol(
        family=f"block_average({a.family})",
        parameters={**a.parameters, "sphere_samples": sphere_samples, "seed": seed},
        invariance=invariance,
        evaluator=evaluator,
        partition=part,
        bound=a.bound,
        real=a.real,
        jumps=a.jumps if invariance == "unitary" else (),
        n=n,
        stderr=stderr,
    )
