"""Weighted Bergman spaces realized as polynomials of degree <= m on C^n.

The inner product is that of L^2(C^n, nu_m) with the probability measure

    d nu_m(z) = (n+m)! / (pi^n m!) * (1 + |z|^2)^{-(n+m+1)} dz,

under which distinct monomials are orthogonal and
``<z^p, z^p>_m = p! (m-|p|)! / m!``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .combinatorics import BasisOrder, MultiIndex, enumerate_multi_indices, space_dimension


@dataclass(frozen=True)
class SpaceParams:
    """Ambient dimension ``n`` and Bergman weight ``m``."""

    n: int
    m: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"m must be a non-negative integer, got {self.m}")

    def space_dimension(self) -> int:
        return space_dimension(self.n, self.m)

    @property
    def order(self) -> BasisOrder:
        return enumerate_multi_indices(self.n, self.m)

    @property
    def density_exponent(self) -> int:
        """The power ``n + m + 1`` in the density of nu_m."""
        return self.n + self.m + 1


def _check_index(params: SpaceParams, p: Sequence[int]) -> MultiIndex:
    p = MultiIndex(p)
    if len(p) != params.n:
        raise ValueError(f"multi-index {tuple(p)} has length {len(p)}, expected n={params.n}")
    if p.degree() > params.m:
        raise ValueError(f"|p| = {p.degree()} exceeds m = {params.m}")
    return p


def monomial_norm_sq_exact(params: SpaceParams, p: Sequence[int]) -> Fraction:
    p = _check_index(params, p)
    m = params.m
    return Fraction(p.factorial() * math.factorial(m - p.degree()), math.factorial(m))


def monomial_inner_product(params: SpaceParams, p: Sequence[int], q: Sequence[int]) -> float:
    """``<z^p, z^q>_m``: zero unless ``p == q``, else ``p!(m-|p|)!/m!``."""
    p = _check_index(params, p)
    q = _check_index(params, q)
    if p != q:
        return 0.0
    return float(monomial_norm_sq_exact(params, p))


def orthonormal_coefficient(params: SpaceParams, p: Sequence[int]) -> float:
    """Coefficient ``c_p`` with ``e_p = c_p z^p`` of unit norm."""
    return math.sqrt(float(1 / monomial_norm_sq_exact(params, p)))


def orthonormal_coefficients(params: SpaceParams) -> np.ndarray:
    return np.array([orthonormal_coefficient(params, p) for p in params.order])


def _as_points(z, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        z = z.reshape(1)
    if z.shape[-1] != n:
        raise ValueError(f"points must have last dimension n={n}, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("points must be finite")
    return z


def kernel(params: SpaceParams, z, w) -> complex | np.ndarray:
    """Reproducing kernel ``K_m(z, w) = (1 + <z, w>)^m``; broadcasts over leading axes."""
    z = _as_points(z, params.n)
    w = _as_points(w, params.n)
    out = (1.0 + np.sum(z * np.conj(w), axis=-1)) ** params.m
    return out if np.ndim(out) else complex(out)


def _monomials(z: np.ndarray, exponents: np.ndarray, m: int) -> np.ndarray:
    # powers[..., i, e] = z_i ** e, built by repeated multiplication so 0**0 == 1
    powers = np.ones(z.shape + (m + 1,), dtype=complex)
    for e in range(1, m + 1):
        powers[..., e] = powers[..., e - 1] * z
    n = z.shape[-1]
    out = np.ones(z.shape[:-1] + (exponents.shape[0],), dtype=complex)
    for i in range(n):
        out *= powers[..., i, :][..., exponents[:, i]]
    return out


def evaluate_basis(params: SpaceParams, order: BasisOrder | None, z) -> np.ndarray:
    """Values of every ``e_p`` at ``z``.

    ``z`` is a single point of shape ``(n,)`` or a batch ``(N, n)``; the
    result has shape ``(dim,)`` or ``(N, dim)`` in basis order.
    """
    order = order or params.order
    z = _as_points(z, params.n)
    coeffs = np.array([orthonormal_coefficient(params, p) for p in order])
    return _monomials(z, order.exponents, params.m) * coeffs


def _seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def draw_measure(params: SpaceParams, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw from nu_m using an explicit generator.

    Squared moduli ``s_i = G_i / G_0`` with ``G_i ~ Exp(1)`` and
    ``G_0 ~ Gamma(m+1)`` follow the inverted Dirichlet law with density
    proportional to ``(1 + sum s)^{-(n+m+1)}``; phases are uniform.
    """
    n = params.n
    g0 = rng.standard_gamma(params.m + 1, size=(count, 1))
    gi = rng.standard_exponential(size=(count, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(count, n))
    return np.sqrt(gi / g0) * np.exp(1j * theta)


def sample_measure(params: SpaceParams, seed: int, count: int) -> np.ndarray:
    """``count`` i.i.d. points from nu_m as a ``(count, n)`` complex array.

    The generator is derived from ``(seed, n, m)`` only, so the draw does not
    depend on any global state.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(_seed_sequence(seed, params.n, params.m))
    return draw_measure(params, rng, count)


def density_ratio(params: SpaceParams, proposal_m: int, z: np.ndarray) -> np.ndarray:
    """``d nu_m / d nu_{proposal_m}`` at ``z``."""
    n, m = params.n, params.m
    const = (math.factorial(n + m) * math.factorial(proposal_m)) / (
        math.factorial(m) * math.factorial(n + proposal_m)
    )
    r2 = np.sum(np.abs(z) ** 2, axis=-1)
    return const * (1.0 + r2) ** (proposal_m - m)
