"""Deterministic half-line and orthant quadrature, plus Monte Carlo against nu_m.

Half-line integrals use Gauss-Legendre on (0, 1) after ``r = t / (1 - t)``.
For integrands decaying like a power of ``(1 + r)`` this turns rational
functions into polynomials.

Orthant integrals over (0, inf)^s first apply the nested substitution

    t_1 = u_1,   t_i = (1 + t_1 + ... + t_{i-1}) u_i,

under which ``1 + sum(t) = prod(1 + u_i)`` and Dirichlet-type integrands
factor into products of one-dimensional ones.  Each ``u_i`` then gets the
half-line rule, so the cubature is a tensor product of the 1-D rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .bergman import SpaceParams, _seed_sequence, density_ratio, draw_measure

MAX_ORTHANT_DIM = 4
MAX_ORTHANT_ORDER = 96
ORTHANT_BATCH = 1 << 18


class ConvergenceError(RuntimeError):
    """Successive refinements disagree by more than the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Rule parameters.

    order : nodes per axis at the finest level; the error estimate compares
        against the rule with ``order // 2`` nodes.
    split_points : locations in (0, inf) where the integrand jumps; each
        interval between them is integrated separately (half-line only).
    tolerance : if set, raise :class:`ConvergenceError` when the error
        estimate exceeds ``tolerance * max(1, |value|)``.
    """

    order: int = 64
    split_points: tuple[float, ...] = ()
    tolerance: float | None = None

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(f"order must be an integer >= 2, got {self.order}")
        pts = tuple(float(x) for x in self.split_points)
        if any(not (0.0 < x < math.inf) for x in pts):
            raise ValueError(f"split points must lie in (0, inf), got {pts}")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError(f"split points must be strictly increasing, got {pts}")
        object.__setattr__(self, "split_points", pts)

    def with_splits(self, points: Sequence[float]) -> "QuadratureSpec":
        pts = sorted({float(x) for x in (*self.split_points, *points) if 0.0 < x < math.inf})
        return replace(self, split_points=tuple(pts))


@dataclass(frozen=True)
class IntegralResult:
    value: complex | float | np.ndarray
    error_estimate: float | np.ndarray
    evaluations: int


@lru_cache(maxsize=None)
def _gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def halfline_rule(order: int, split_points: tuple[float, ...] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``r`` in (0, inf) and weights (Jacobian included)."""
    x, w = _gauss_legendre_unit(order)
    edges = [0.0] + [s / (1.0 + s) for s in split_points] + [1.0]
    nodes, weights = [], []
    for a, b in zip(edges, edges[1:]):
        t = a + (b - a) * x
        nodes.append(t / (1.0 - t))
        weights.append((b - a) * w / (1.0 - t) ** 2)
    r, wr = np.concatenate(nodes), np.concatenate(weights)
    r.setflags(write=False)
    wr.setflags(write=False)
    return r, wr


def _check(result_value, err, spec: QuadratureSpec):
    if spec.tolerance is None:
        return
    scale = np.maximum(1.0, np.abs(result_value))
    if np.any(np.asarray(err) > spec.tolerance * scale):
        raise ConvergenceError(
            f"quadrature refinement disagreement {np.max(err):.3e} exceeds tolerance {spec.tolerance:.1e}"
        )


def integrate_halfline(f: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec | None = None) -> IntegralResult:
    """Integrate a vectorized ``f`` over (0, inf).

    ``f`` maps an array of shape ``(N,)`` to ``(N,)`` or ``(N, K)``; in the
    latter case ``K`` integrals are returned at once.
    """
    spec = spec or QuadratureSpec()
    values, evals = [], 0
    for order in (max(spec.order // 2, 1), spec.order):
        r, w = halfline_rule(order, spec.split_points)
        fr = np.asarray(f(r))
        values.append(np.tensordot(w, fr, axes=(0, 0)))
        evals += r.size
    value = values[1]
    err = np.abs(values[1] - values[0])
    _check(value, err, spec)
    if np.ndim(value) == 0:
        value, err = value.item(), float(err)
    return IntegralResult(value=value, error_estimate=err, evaluations=evals)


def _nested_grid(u: np.ndarray, wu: np.ndarray, s: int, lead: int | None = None):
    """Orthant nodes ``t`` and weights for the nested substitution.

    ``lead`` fixes the index of the first-axis node (for chunked evaluation).
    """
    first = u if lead is None else u[lead : lead + 1]
    wfirst = wu if lead is None else wu[lead : lead + 1]
    axes_u = [first] + [u] * (s - 1)
    axes_w = [wfirst] + [wu] * (s - 1)
    grids = np.meshgrid(*axes_u, indexing="ij")
    wgrids = np.meshgrid(*axes_w, indexing="ij")
    uu = np.stack([g.ravel() for g in grids], axis=1)
    weight = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    t = np.empty_like(uu)
    scale = np.ones(uu.shape[0])
    for i in range(s):
        t[:, i] = scale * uu[:, i]
        weight = weight * scale
        scale = scale * (1.0 + uu[:, i])
    return t, weight


def _orthant_level(f, s: int, order: int):
    u, wu = halfline_rule(order)
    if order**s <= ORTHANT_BATCH:
        t, w = _nested_grid(u, wu, s)
        return np.tensordot(w, np.asarray(f(t)), axes=(0, 0)), order**s
    total = None
    for lead in range(order):
        t, w = _nested_grid(u, wu, s, lead)
        part = np.tensordot(w, np.asarray(f(t)), axes=(0, 0))
        total = part if total is None else total + part
    return total, order**s


def integrate_orthant(f: Callable[[np.ndarray], np.ndarray], s: int, spec: QuadratureSpec | None = None) -> IntegralResult:
    """Integrate a vectorized ``f`` over (0, inf)^s.

    ``f`` receives points of shape ``(N, s)`` and returns ``(N,)`` or
    ``(N, K)``.  Evaluation is chunked along the first axis, so memory stays
    at ``order^(s-1)`` points.
    """
    spec = spec or QuadratureSpec()
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    if s > MAX_ORTHANT_DIM:
        raise ValueError(f"orthant dimension {s} exceeds cap {MAX_ORTHANT_DIM}")
    if spec.order > MAX_ORTHANT_ORDER:
        raise ValueError(f"orthant order {spec.order} exceeds cap {MAX_ORTHANT_ORDER}")
    if spec.split_points:
        raise ValueError("split points are only supported for half-line integrals")
    coarse, e1 = _orthant_level(f, s, max(spec.order // 2, 1))
    fine, e2 = _orthant_level(f, s, spec.order)
    err = np.abs(fine - coarse)
    _check(fine, err, spec)
    if np.ndim(fine) == 0:
        fine, err = fine.item(), float(err)
    return IntegralResult(value=fine, error_estimate=err, evaluations=e1 + e2)


MC_CHUNK = 1 << 16


def _chunk_sizes(count: int) -> list[int]:
    sizes = [MC_CHUNK] * (count // MC_CHUNK)
    if count % MC_CHUNK:
        sizes.append(count % MC_CHUNK)
    return sizes


def mc_plan(params: SpaceParams, count: int, seed: int, proposal_m: int | None = None):
    """Chunk sizes and per-chunk seed sequences of a seeded draw.

    Depends only on ``(seed, n, m, proposal_m, count)``, so any chunk can be
    drawn independently of the others.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    sizes = _chunk_sizes(count)
    key = 0 if proposal_m is None else int(proposal_m) + 1
    root = _seed_sequence(seed, params.n, params.m, key)
    return list(zip(sizes, root.spawn(len(sizes))))


def draw_chunk(params: SpaceParams, size: int, seq: np.random.SeedSequence, proposal_m: int | None = None):
    """Points and importance weights for one planned chunk."""
    source_m = params.m if proposal_m is None else int(proposal_m)
    z = draw_measure(SpaceParams(params.n, source_m), np.random.default_rng(seq), size)
    if proposal_m is None:
        return z, np.ones(size)
    return z, density_ratio(params, source_m, z)


def mc_chunks(params: SpaceParams, count: int, seed: int, proposal_m: int | None = None):
    """Yield ``(points, weights)`` chunks of a seeded draw.

    With ``proposal_m`` set, points come from nu_{proposal_m} and the weights
    are the density ratio to nu_m (importance sampling); otherwise weights
    are 1.
    """
    for size, seq in mc_plan(params, count, seed, proposal_m):
        yield draw_chunk(params, size, seq, proposal_m)


def mc_expectation(
    params: SpaceParams,
    g: Callable[[np.ndarray], np.ndarray],
    count: int,
    seed: int,
    proposal_m: int | None = None,
) -> IntegralResult:
    """Estimate ``int g d nu_m`` by a sample mean with its standard error.

    ``g`` maps ``(N, n)`` complex points to ``(N,)`` values.
    """
    total = 0.0 + 0.0j
    total_sq = 0.0
    for z, w in mc_chunks(params, count, seed, proposal_m):
        vals = np.asarray(g(z)) * w
        total += np.sum(vals)
        total_sq += np.sum(np.abs(vals) ** 2)
    mean = total / count
    var = max(total_sq / count - abs(mean) ** 2, 0.0)
    stderr = math.sqrt(var / count) if count > 1 else math.inf
    value = mean.real if mean.imag == 0.0 else mean
    return IntegralResult(value=value, error_estimate=stderr, evaluations=count)
