"""Toeplitz matrices and their spectra for block-invariant symbols.

For ``K = U(k_1) x ... x U(k_s)`` every isotypic component of ``P_m(C^n)``
is labelled by a block-degree vector ``d`` and a K-invariant symbol acts on
it as the scalar

    gamma(d) = C(d) * int_{(0,inf)^s} a(sqrt t) prod_b t_b^{k_b+d_b-1} (1+sum t)^{-(n+m+1)} dt,
    C(d)     = (n+m)! / (prod_b (k_b+d_b-1)! * (m-|d|)!),

where ``a(sqrt t)`` is the symbol at a point with block norms ``sqrt(t_b)``.
For a radial symbol this is a single half-line integral in ``r = |z|^2``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .bergman import SpaceParams, evaluate_basis, monomial_norm_sq_exact, orthonormal_coefficients
from .combinatorics import MultiIndex, multinomial
from .matrices import OperatorMatrix, commutator_norm
from .quadrature import (
    ConvergenceError,
    QuadratureSpec,
    draw_chunk,
    integrate_halfline,
    integrate_orthant,
    mc_plan,
)
from .representation import IsotypicDecomposition, degree_vectors, isotypic_decomposition
from .symbols import BlockPartition, Symbol, make_symbol

WORKERS_ENV = "BERGMAN_SPECTRA_WORKERS"
SIGMA = 4.0


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class MonteCarlo:
    """Monte Carlo method for Toeplitz matrices.

    Samples come from nu_{proposal_m} and are reweighted to nu_m.  The
    default ``proposal_m=0`` keeps every matrix-entry integrand bounded, since
    ``|e_p e_q| (1+|z|^2)^{-m}`` is bounded for ``|p|, |q| <= m``.  Sampling
    nu_m directly (``proposal_m=None``) gives infinite variance whenever
    ``|p| + |q| > m``.
    """

    count: int
    seed: int
    proposal_m: int | None = 0

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"Monte Carlo count must be >= 2, got {self.count}")


@dataclass(frozen=True)
class SpectrumTable:
    """Eigenvalue of a K-invariant Toeplitz operator on every isotypic component."""

    params: SpaceParams
    partition: BlockPartition
    entries: Mapping[tuple[int, ...], complex]
    errors: Mapping[tuple[int, ...], float]
    dimensions: Mapping[tuple[int, ...], int]
    method: str = "quadrature"
    per_index_view: Mapping[MultiIndex, complex] = field(default=None, repr=False)

    def __post_init__(self):
        if self.per_index_view is None:
            view = {p: self.entries[self.partition.block_degrees(p)] for p in self.params.order}
            object.__setattr__(self, "per_index_view", view)

    @property
    def error_estimate(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def __getitem__(self, d) -> complex:
        return self.entries[tuple(d)]

    def per_index(self) -> np.ndarray:
        """Eigenvalues in basis order."""
        return np.array([self.per_index_view[p] for p in self.params.order])


def normalizing_constant(params: SpaceParams, kappa: BlockPartition, d: Sequence[int]) -> Fraction:
    """Exact ``C(d) = (n+m)! / (prod_b (k_b+d_b-1)! (m-|d|)!)``."""
    n, m = params.n, params.m
    if sum(d) > m:
        raise ValueError(f"|d| = {sum(d)} exceeds m = {m}")
    den = math.factorial(m - sum(d))
    for k, db in zip(kappa.blocks, d):
        den *= math.factorial(k + db - 1)
    return Fraction(math.factorial(n + m), den)


def _radial_profile(a: Symbol, n: int, r: np.ndarray, stderr: bool = False) -> np.ndarray:
    z = np.zeros((r.shape[0], n), dtype=complex)
    z[:, 0] = np.sqrt(r)
    f = a.stderr if stderr else a.evaluator
    return np.asarray(f(z))


def _check_tolerance(values: np.ndarray, errors: np.ndarray, spec: QuadratureSpec):
    if spec.tolerance is None:
        return
    bad = errors > spec.tolerance * np.maximum(1.0, np.abs(values))
    if np.any(bad):
        raise ConvergenceError(
            f"spectral integral error {np.max(errors):.3e} exceeds tolerance {spec.tolerance:.1e}"
        )


def radial_spectrum(params: SpaceParams, a: Symbol, spec: QuadratureSpec | None = None):
    """Eigenvalues ``gamma(k)``, ``k = 0..m``, of a radial symbol and their errors.

    ``gamma(k) = (n+m)!/((n+k-1)!(m-k)!) int_0^inf a(sqrt r) r^{n+k-1} (1+r)^{-(n+m+1)} dr``,
    integrated with the interval split at the symbol's jump radii.
    """
    spec = spec or QuadratureSpec()
    n, m = params.n, params.m
    if not a.is_invariant_under(BlockPartition.unitary(n)):
        raise ValueError(f"symbol {a.family} is not radial")
    beta = params.density_exponent
    ks = np.arange(m + 1)
    engine = replace(spec.with_splits(a.jumps), tolerance=None)

    def weights(r):
        return np.exp(np.outer(np.log(r), n + ks - 1) - beta * np.log1p(r)[:, None])

    res = integrate_halfline(lambda r: _radial_profile(a, n, r)[:, None] * weights(r), engine)
    const = np.array([math.factorial(n + m) / (math.factorial(n + k - 1) * math.factorial(m - k)) for k in ks])
    values = const * np.asarray(res.value)
    errors = const * np.asarray(res.error_estimate)
    if a.stderr is not None:
        sres = integrate_halfline(lambda r: _radial_profile(a, n, r, stderr=True)[:, None] * weights(r), engine)
        errors = errors + const * np.abs(np.asarray(sres.value))
    _check_tolerance(values, errors, spec)
    return values, errors


def block_radial_spectrum(
    params: SpaceParams,
    kappa: BlockPartition,
    a: Symbol,
    spec: QuadratureSpec | None = None,
    radial_reduction: bool = True,
) -> SpectrumTable:
    """Spectrum of ``T_a`` on the isotypic components of ``U(k_1) x ... x U(k_s)``.

    ``a`` must be invariant under the block group (its own invariance group
    may be larger).  Radial symbols are reduced to the 1-D integral unless
    ``radial_reduction`` is False; everything else uses the s-dimensional
    orthant rule.
    """
    spec = spec or QuadratureSpec()
    n, m = params.n, params.m
    if kappa.n != n:
        raise ValueError(f"partition {kappa.blocks} sums to {kappa.n} != n={n}")
    if not a.is_invariant_under(kappa):
        raise ValueError(
            f"symbol {a.family} with invariance {a.invariance!r} is not invariant under the block group {kappa.blocks}"
        )
    degs = degree_vectors(kappa.s, m)
    dims = {d: math.prod(math.comb(k + db - 1, db) for k, db in zip(kappa.blocks, d)) for d in degs}
    radial = a.is_invariant_under(BlockPartition.unitary(n))

    if radial and (radial_reduction or kappa.s == 1):
        values_k, errors_k = radial_spectrum(params, a, spec)
        entries = {d: values_k[sum(d)] for d in degs}
        errors = {d: float(errors_k[sum(d)]) for d in degs}
        method = "quadrature:radial"
    else:
        if a.jumps:
            raise ValueError(f"symbol {a.family} is discontinuous; use the radial reduction")
        beta = params.density_exponent
        alpha = np.array([[k + db - 1 for k, db in zip(kappa.blocks, d)] for d in degs], dtype=float).T
        engine = replace(spec, tolerance=None)

        def weights(t):
            return np.exp(np.log(t) @ alpha - beta * np.log1p(t.sum(axis=1))[:, None])

        def integrand(t):
            return np.asarray(a.evaluator(kappa.representative_points(t)))[:, None] * weights(t)

        res = integrate_orthant(integrand, kappa.s, engine)
        const = np.array([float(normalizing_constant(params, kappa, d)) for d in degs])
        values = const * np.asarray(res.value)
        errs = const * np.asarray(res.error_estimate)
        if a.stderr is not None:

            def s_integrand(t):
                return np.asarray(a.stderr(kappa.representative_points(t)))[:, None] * weights(t)

            errs = errs + const * np.abs(np.asarray(integrate_orthant(s_integrand, kappa.s, engine).value))
        _check_tolerance(values, errs, spec)
        entries = {d: values[j] for j, d in enumerate(degs)}
        errors = {d: float(errs[j]) for j, d in enumerate(degs)}
        method = "quadrature:orthant"

    if a.real:
        entries = {d: float(np.real(v)) for d, v in entries.items()}
    else:
        entries = {d: complex(v) for d, v in entries.items()}
    return SpectrumTable(params, kappa, entries, errors, dims, method)


def separately_radial_spectrum(params: SpaceParams, a: Symbol, spec: QuadratureSpec | None = None) -> SpectrumTable:
    """``gamma(p) = <a e_p, e_p>_m`` for a torus-invariant symbol."""
    return block_radial_spectrum(params, BlockPartition.torus(params.n), a, spec)


# ---------------------------------------------------------------------------
# representative vectors


def representative_vector(params: SpaceParams, kappa: BlockPartition, d: Sequence[int]) -> np.ndarray:
    """Monomial coefficients of ``prod_b f_{d_b}(z^{(b)})``.

    ``f_k(w) = sum_{|p|=k} sqrt(C(k, p)) w^p`` in each block; the result is
    supported on the component with block degrees ``d``.
    """
    d = tuple(int(x) for x in d)
    if len(d) != kappa.s:
        raise ValueError(f"degree vector {d} has length {len(d)}, expected {kappa.s}")
    if sum(d) > params.m:
        raise ValueError(f"|d| = {sum(d)} exceeds m = {params.m}")
    order = params.order
    v = np.zeros(len(order))
    for pos, p in enumerate(order):
        if kappa.block_degrees(p) != d:
            continue
        coef = 1
        for sl, db in zip(kappa.slices(), d):
            coef *= multinomial(db, p[sl])
        v[pos] = math.sqrt(coef)
    return v


def polynomial_norm_sq(params: SpaceParams, coeffs: np.ndarray) -> float:
    """``||sum_p c_p z^p||_m^2`` from monomial coefficients."""
    norms = np.array([float(monomial_norm_sq_exact(params, p)) for p in params.order])
    return float(np.sum(np.abs(coeffs) ** 2 * norms))


def rayleigh_quotient(T, coeffs: np.ndarray) -> complex:
    """``<T f, f> / <f, f>`` for ``f`` given by monomial coefficients."""
    if not isinstance(T, OperatorMatrix):
        raise TypeError("rayleigh_quotient needs an OperatorMatrix (it carries the basis)")
    v = np.asarray(coeffs, dtype=complex) / orthonormal_coefficients(T.params)
    return complex(np.vdot(v, T.entries @ v) / np.vdot(v, v))


# ---------------------------------------------------------------------------
# Toeplitz matrices


def _quadrature_matrix(params: SpaceParams, a: Symbol, spec: QuadratureSpec) -> OperatorMatrix:
    if a.invariance == "general":
        raise ValueError("the quadrature path needs a torus-, block- or unitary-invariant symbol")
    table = block_radial_spectrum(params, a.invariance_partition(params.n), a, spec)
    order = params.order
    # a T^n-invariant symbol pairs distinct torus characters to zero, so T_a is diagonal in (e_p)
    diag = table.per_index()
    errs = np.array([table.errors[table.partition.block_degrees(p)] for p in order])
    return OperatorMatrix(
        params, order, np.diag(diag).astype(complex),
        error_estimate=float(np.linalg.norm(errs)), provenance="quadrature",
    )


def _mc_partial(params, order, symbols, size, seq, proposal_m):
    z, w = draw_chunk(params, size, seq, proposal_m)
    E = evaluate_basis(params, order, z)
    absE2 = np.abs(E) ** 2
    out = []
    for a in symbols:
        vals = np.asarray(a.evaluator(z)) * w
        s1 = (np.conj(E) * vals[:, None]).T @ E
        s2 = (absE2 * (np.abs(vals) ** 2)[:, None]).T @ absE2
        out.append((s1, s2))
    return out


def toeplitz_matrices_mc(params: SpaceParams, symbols: Sequence[Symbol], mc: MonteCarlo) -> list[OperatorMatrix]:
    """Monte Carlo Toeplitz matrices of several symbols from one shared draw.

    Entry ``(q, p)`` estimates ``int a e_p conj(e_q) d nu_m`` with a per-entry
    standard error.  Chunks may run on ``BERGMAN_SPECTRA_WORKERS`` threads;
    partial sums are reduced in plan order, so the result does not depend on
    the worker count.
    """
    order = params.order
    plan = mc_plan(params, mc.count, mc.seed, mc.proposal_m)
    dim = len(order)
    sums = [[np.zeros((dim, dim), dtype=complex), np.zeros((dim, dim))] for _ in symbols]

    def job(item):
        size, seq = item
        return _mc_partial(params, order, symbols, size, seq, mc.proposal_m)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(job, plan))
    else:
        partials = map(job, plan)
    for part in partials:
        for acc, (s1, s2) in zip(sums, part):
            acc[0] += s1
            acc[1] += s2

    N = mc.count
    out = []
    for a, (s1, s2) in zip(symbols, sums):
        mean = s1 / N
        var = np.maximum(s2 / N - np.abs(mean) ** 2, 0.0) * N / (N - 1)
        stderr = np.sqrt(var / N)
        asym = 0.0
        if a.real:
            asym = float(np.linalg.norm(mean - mean.conj().T)) / 2.0
            mean = 0.5 * (mean + mean.conj().T)
        err = math.hypot(float(np.linalg.norm(stderr)), asym)
        out.append(
            OperatorMatrix(
                params, order, mean, error_estimate=err, provenance="monte_carlo",
                stderr=stderr, asymmetry=asym,
            )
        )
    return out


def toeplitz_matrix(params: SpaceParams, a: Symbol, method: QuadratureSpec | MonteCarlo | None = None) -> OperatorMatrix:
    """Matrix of ``T_a`` in the orthonormal basis ``(e_p)``.

    ``method`` is a :class:`QuadratureSpec` (invariant symbols only) or a
    :class:`MonteCarlo` draw (any symbol).
    """
    method = method or QuadratureSpec()
    if a.n is not None and a.n != params.n:
        raise ValueError(f"symbol is defined on C^{a.n}, space has n={params.n}")
    if isinstance(method, QuadratureSpec):
        return _quadrature_matrix(params, a, method)
    if isinstance(method, MonteCarlo):
        return toeplitz_matrices_mc(params, [a], method)[0]
    raise TypeError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    detail: Mapping = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "passed": self.passed,
            **{k: v for k, v in self.detail.items()},
        }


@dataclass(frozen=True)
class VerificationReport:
    params: SpaceParams
    partition: BlockPartition
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "n": self.params.n,
            "m": self.params.m,
            "partition": list(self.partition.blocks),
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def component_eigenvalues(T: OperatorMatrix, decomposition: IsotypicDecomposition):
    """Per component: mean diagonal entry, its standard error, and the spread.

    The spread is the largest deviation of a diagonal entry from the mean.
    """
    diag = np.diag(T.entries)
    sd = np.diag(T.stderr) if T.stderr is not None else np.zeros(len(diag))
    means, ses, spreads = [], [], []
    for comp in decomposition:
        pos = list(comp.basis_positions)
        mu = diag[pos].mean()
        means.append(mu)
        ses.append(math.sqrt(float(np.sum(sd[pos] ** 2))) / len(pos))
        spreads.append(float(np.max(np.abs(diag[pos] - mu))))
    return np.array(means), np.array(ses), np.array(spreads)


def _standardized_max(values: np.ndarray, scales: np.ndarray) -> float:
    values = np.abs(values)
    if values.size == 0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(scales > 0, values / np.where(scales > 0, scales, 1.0), np.where(values > 0, np.inf, 0.0))
    return float(np.max(z))


def spectrum_vs_matrix(
    params: SpaceParams,
    kappa: BlockPartition,
    a: Symbol,
    spec: QuadratureSpec | None = None,
    mc: MonteCarlo | tuple[int, int] = (200_000, 0),
    partner: Symbol | None = None,
    sigma: float = SIGMA,
) -> VerificationReport:
    """Check the closed-form spectrum against a brute-force Monte Carlo matrix.

    off_diagonal : largest off-diagonal entry, in standard errors.
    eigenvalues : largest gap between the component means of the matrix
        diagonal and ``gamma(d)``, in combined standard errors.
    commutator : ``||[T_a, T_b]||_F`` against a second invariant symbol ``b``
        (default ``total_weight``), bounded by propagated matrix errors.
    """
    spec = spec or QuadratureSpec()
    if not isinstance(mc, MonteCarlo):
        mc = MonteCarlo(*mc)
    partner = partner or make_symbol("total_weight", n=params.n)
    if not partner.is_invariant_under(kappa):
        raise ValueError("the partner symbol must be invariant under the same block group")

    table = block_radial_spectrum(params, kappa, a, spec)
    Ta, Tb = toeplitz_matrices_mc(params, [a, partner], mc)
    dec = isotypic_decomposition(params, kappa)

    off_mask = ~np.eye(Ta.dim, dtype=bool)
    off = _standardized_max(Ta.entries[off_mask], Ta.stderr[off_mask])
    off_mag = float(np.max(np.abs(Ta.entries[off_mask]))) if Ta.dim > 1 else 0.0

    means, ses, _ = component_eigenvalues(Ta, dec)
    gammas = np.array([table.entries[c.degrees] for c in dec])
    qerr = np.array([table.errors[c.degrees] for c in dec])
    gap = np.abs(means - gammas)
    eig = _standardized_max(gap, np.sqrt(ses**2 + (qerr / sigma) ** 2))

    comm = commutator_norm(Ta, Tb)
    ea, eb = Ta.error_estimate, Tb.error_estimate
    na, nb = np.linalg.norm(Ta.entries, 2), np.linalg.norm(Tb.entries, 2)
    comm_tol = 2.0 * sigma * (ea * nb + na * eb) + 2.0 * (sigma * ea) * (sigma * eb)

    checks = (
        Check("off_diagonal", off, sigma, {"unit": "standard errors", "max_magnitude": off_mag}),
        Check("eigenvalues", eig, sigma, {"unit": "standard errors", "max_gap": float(np.max(gap))}),
        Check("commutator", comm, comm_tol, {"unit": "frobenius", "partner": partner.family}),
    )
    return VerificationReport(params, kappa, checks)
