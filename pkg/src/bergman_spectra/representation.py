"""The representation ``(pi_m(A) f)(z) = f(A^{-1} z)`` of U(n) and its block subgroups.

Matrices are written in the orthonormal basis ``(e_p)`` in graded-lex order,
where every isotypic component of a block subgroup is spanned by basis
vectors.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bergman import SpaceParams, _seed_sequence, orthonormal_coefficients
from .combinatorics import BasisOrder, compositions, homogeneous_dimension
from .matrices import OperatorMatrix
from .symbols import BlockPartition

UNITARITY_TOL = 1e-10
RANK_RTOL = 1e-6


@dataclass(frozen=True)
class GroupElement:
    matrix: np.ndarray
    partition: BlockPartition | None = None

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"group element must be a square matrix, got shape {a.shape}")
        defect = unitarity_defect(a)
        if defect > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (defect {defect:.2e})")
        if self.partition is not None:
            if self.partition.n != a.shape[0]:
                raise ValueError("partition does not match matrix size")
            if np.any(a[~block_mask(self.partition)] != 0):
                raise ValueError("matrix has entries outside its blocks")
        object.__setattr__(self, "matrix", a)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def inverse(self) -> "GroupElement":
        return GroupElement(self.matrix.conj().T, self.partition)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        part = self.partition if self.partition == other.partition else None
        return GroupElement(self.matrix @ other.matrix, part)


def unitarity_defect(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])))) if a.size else 0.0


def block_mask(kappa: BlockPartition) -> np.ndarray:
    mask = np.zeros((kappa.n, kappa.n), dtype=bool)
    for sl in kappa.slices():
        mask[sl, sl] = True
    return mask


# ---------------------------------------------------------------------------
# Haar sampling


def haar_unitaries(k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-distributed ``k x k`` unitaries via QR of a Ginibre matrix.

    Each column of Q is rescaled by the phase of the matching diagonal entry
    of R so that the decomposition is unique.
    """
    z = (rng.standard_normal((count, k, k)) + 1j * rng.standard_normal((count, k, k))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_samples(kappa: BlockPartition, count: int, seed: int) -> np.ndarray:
    """``(count, n, n)`` block-diagonal Haar samples of ``U(k_1) x ... x U(k_s)``."""
    rng = np.random.default_rng(_seed_sequence(seed, *kappa.blocks))
    out = np.zeros((count, kappa.n, kappa.n), dtype=complex)
    for sl, k in zip(kappa.slices(), kappa.blocks):
        out[:, sl, sl] = haar_unitaries(k, count, rng)
    return out


def haar_sample(kappa: BlockPartition, seed: int) -> GroupElement:
    return GroupElement(haar_samples(kappa, 1, seed)[0], kappa)


# ---------------------------------------------------------------------------
# matrices of pi_m


def _shift_tables(n: int, m: int, order: BasisOrder):
    """``tables[j][q, l]``: level-``j`` position of ``q + e_l`` for ``q`` at level ``j-1``."""
    tables = [None]
    for j in range(1, m + 1):
        lower = order.indices[order.level_slice(j - 1)]
        start = order.level_slice(j).start
        tab = np.empty((len(lower), n), dtype=np.int64)
        for a, q in enumerate(lower):
            for l in range(n):
                qq = list(q)
                qq[l] += 1
                tab[a, l] = order.index_of(qq) - start
        tables.append(tab)
    return tables


def rep_matrices(params: SpaceParams, ks: np.ndarray, order: BasisOrder | None = None) -> np.ndarray:
    """Matrices of ``pi_m(k)`` for a stack ``ks`` of shape ``(S, n, n)``.

    The polynomial ``e_p(k^{-1} z)`` is expanded exactly by multiplying the
    linear forms ``(k^{-1} z)_i`` one factor at a time.
    """
    order = order or params.order
    n, m = params.n, params.m
    ks = np.asarray(ks, dtype=complex)
    if ks.ndim == 2:
        ks = ks[None]
    S = ks.shape[0]
    kinv = np.conj(np.transpose(ks, (0, 2, 1)))
    tables = _shift_tables(n, m, order)
    dim = len(order)
    out = np.zeros((S, dim, dim), dtype=complex)
    out[:, 0, 0] = 1.0
    # prev[s, :, a]: monomial coefficients at level j-1 of the a-th level-(j-1) product
    prev = np.ones((S, 1, 1), dtype=complex)
    for j in range(1, m + 1):
        sl_prev, sl = order.level_slice(j - 1), order.level_slice(j)
        lower_start = sl_prev.start
        level = order.indices[sl]
        cur = np.zeros((S, len(level), len(level)), dtype=complex)
        tab = tables[j]
        for a, p in enumerate(level):
            i = next(idx for idx, v in enumerate(p) if v > 0)
            parent = list(p)
            parent[i] -= 1
            pa = order.index_of(parent) - lower_start
            col = prev[:, :, pa]
            for l in range(n):
                cur[:, tab[:, l], a] += col * kinv[:, i, l][:, None]
        out[:, sl, sl] = cur
        prev = cur
    c = orthonormal_coefficients(params)
    return out * (c[None, None, :] / c[None, :, None])


def rep_matrix(params: SpaceParams, order: BasisOrder | None, k) -> OperatorMatrix:
    """Matrix of ``pi_m(k)`` in the basis ``(e_p)``; ``k`` must be unitary."""
    order = order or params.order
    if not isinstance(k, GroupElement):
        k = GroupElement(np.asarray(k, dtype=complex))
    if k.n != params.n:
        raise ValueError(f"group element acts on C^{k.n}, expected n={params.n}")
    return OperatorMatrix(params, order, rep_matrices(params, k.matrix, order)[0], provenance="closed_form")


# ---------------------------------------------------------------------------
# isotypic decomposition


@dataclass(frozen=True)
class IsotypicComponent:
    degrees: tuple[int, ...]
    dimension: int
    basis_positions: tuple[int, ...]

    @property
    def multiplicity(self) -> int:
        return 1


@dataclass(frozen=True)
class IsotypicDecomposition:
    params: SpaceParams
    partition: BlockPartition
    components: tuple[IsotypicComponent, ...]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def dimensions(self) -> list[int]:
        return [c.dimension for c in self.components]

    def component_of(self) -> np.ndarray:
        """Component index of every basis position."""
        out = np.empty(self.params.space_dimension(), dtype=np.int64)
        for j, c in enumerate(self.components):
            out[list(c.basis_positions)] = j
        return out

    def projectors(self) -> np.ndarray:
        """``(l, dim)`` 0/1 indicator rows of the components."""
        P = np.zeros((len(self.components), self.params.space_dimension()))
        for j, c in enumerate(self.components):
            P[j, list(c.basis_positions)] = 1.0
        return P


def degree_vectors(s: int, m: int) -> list[tuple[int, ...]]:
    """All ``d`` in N^s with ``|d| <= m``: by total degree, then descending lex."""
    return [d for k in range(m + 1) for d in reversed(list(compositions(s, k)))]


def isotypic_decomposition(params: SpaceParams, kappa: BlockPartition) -> IsotypicDecomposition:
    """Split ``P_m(C^n)`` by block-degree vectors.

    The component with degrees ``d`` is the span of the ``e_p`` whose block
    sums equal ``d``; it is the tensor product of the homogeneous pieces of
    degrees ``d_b`` in each block, of dimension ``prod C(k_b + d_b - 1, d_b)``.
    """
    if kappa.n != params.n:
        raise ValueError(f"partition {kappa.blocks} sums to {kappa.n} != n={params.n}")
    order = params.order
    buckets: dict[tuple[int, ...], list[int]] = {}
    for pos, p in enumerate(order):
        buckets.setdefault(kappa.block_degrees(p), []).append(pos)
    comps = []
    for d in degree_vectors(kappa.s, params.m):
        positions = tuple(buckets.get(d, ()))
        dim = math.prod(homogeneous_dimension(k, db) for k, db in zip(kappa.blocks, d))
        assert dim == len(positions)
        comps.append(IsotypicComponent(degrees=d, dimension=dim, basis_positions=positions))
    return IsotypicDecomposition(params=params, partition=kappa, components=tuple(comps))


# ---------------------------------------------------------------------------
# operator averaging and the commutant


def _torus_average(T: np.ndarray) -> np.ndarray:
    # distinct multi-indices carry distinct torus characters, so only the diagonal survives
    return np.diag(np.diag(T))


def average_operator(
    params: SpaceParams,
    kappa: BlockPartition,
    T,
    samples: int = 1000,
    seed: int = 0,
) -> OperatorMatrix:
    """Haar average ``int_K pi(k) T pi(k)^{-1} dk``.

    For the torus this is exact diagonal extraction.  For larger ``K`` the
    torus part is still integrated exactly (the Haar measure of ``K`` is
    invariant under T^n on both sides) and the rest is a Monte Carlo mean over
    ``samples`` Haar draws.
    """
    if kappa.n != params.n:
        raise ValueError(f"partition {kappa.blocks} sums to {kappa.n} != n={params.n}")
    order = params.order
    if isinstance(T, OperatorMatrix):
        A = np.asarray(T.entries, dtype=complex)
        in_err = T.error_estimate
        in_stderr = T.stderr
    else:
        A = np.asarray(T, dtype=complex)
        in_err, in_stderr = 0.0, None
    dim = params.space_dimension()
    if A.shape != (dim, dim):
        raise ValueError(f"operator shape {A.shape} does not match dimension {dim}")

    D = np.diag(A)
    if kappa.is_torus():
        err = float(np.linalg.norm(np.diag(in_stderr))) if in_stderr is not None else in_err
        return OperatorMatrix(params, order, np.diag(D), error_estimate=err, provenance="averaged")

    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    ks = haar_samples(kappa, samples, seed)
    total = np.zeros(dim, dtype=complex)
    total_sq = np.zeros(dim)
    for start in range(0, samples, 256):
        R = rep_matrices(params, ks[start : start + 256], order)
        # diag(R diag(D) R^H)_p = sum_q |R_pq|^2 D_q
        vals = np.einsum("spq,q->sp", np.abs(R) ** 2, D)
        total += vals.sum(axis=0)
        total_sq += (np.abs(vals) ** 2).sum(axis=0)
    mean = total / samples
    if samples > 1:
        var = np.maximum(total_sq / samples - np.abs(mean) ** 2, 0.0) * samples / (samples - 1)
        haar_err = float(np.sqrt(var.sum() / samples))
    else:
        haar_err = math.inf
    err = math.hypot(in_err, haar_err)
    return OperatorMatrix(params, order, np.diag(mean), error_estimate=err, provenance="averaged")


@dataclass(frozen=True)
class CommutantReport:
    dimension: int
    singular_values: np.ndarray
    threshold: float
    margin: float


def _walk_projector(M: np.ndarray, max_squarings: int = 80) -> np.ndarray:
    """Limit of powers of a symmetric doubly stochastic matrix."""
    P, last = M, math.inf
    for _ in range(max_squarings):
        P2 = P @ P
        change = float(np.max(np.abs(P2 - P)))
        if change >= last:
            # rounding floor reached; further squaring only amplifies drift
            return P
        P, last = P2, change
        if change < 1e-13:
            return P
    return P


def commutant_analysis(
    params: SpaceParams,
    kappa: BlockPartition,
    probes: int,
    samples: int,
    seed: int,
) -> CommutantReport:
    """Numerical rank of the span of ``probes`` K-averaged random matrices.

    The averaging integrates the torus exactly and then runs the symmetric
    random walk on ``K`` generated by ``samples`` Haar draws to convergence.
    Its limit is the orthogonal projection onto the operators commuting with
    all draws, which is the commutant of ``K`` for generic draws.
    """
    if kappa.n != params.n:
        raise ValueError(f"partition {kappa.blocks} sums to {kappa.n} != n={params.n}")
    if probes < 1 or samples < 1:
        raise ValueError("probes and samples must be positive")
    dim = params.space_dimension()
    rng = np.random.default_rng(_seed_sequence(seed, params.n, params.m, *kappa.blocks))
    X = rng.standard_normal((probes, dim, dim)) + 1j * rng.standard_normal((probes, dim, dim))
    V = np.diagonal(X, axis1=1, axis2=2)  # torus average of each probe
    if not kappa.is_torus():
        R = rep_matrices(params, haar_samples(kappa, samples, seed), params.order)
        M = np.mean(np.abs(R) ** 2, axis=0)
        P = _walk_projector(0.5 * (M + M.T))
        V = V @ P.T
    sv = np.linalg.svd(V, compute_uv=False)
    thr = RANK_RTOL * sv[0]
    kept, dropped = sv[sv > thr], sv[sv <= thr]
    margin = math.inf
    if kept.size:
        margin = min(margin, kept[-1] / thr)
    if dropped.size and dropped[0] > 0:
        margin = min(margin, thr / dropped[0])
    return CommutantReport(dimension=int(kept.size), singular_values=sv, threshold=thr, margin=margin)


def commutant_dimension(
    params: SpaceParams,
    kappa: BlockPartition,
    probes: int,
    samples: int = 16,
    seed: int = 0,
) -> int:
    """Dimension of the algebra of operators commuting with ``pi_m(K)``.

    Equals the sum of squared multiplicities; ``probes`` must be at least the
    number of isotypic components for the rank to saturate.
    """
    report = commutant_analysis(params, kappa, probes, samples, seed)
    if report.margin < 10.0:
        warnings.warn(
            f"commutant rank decision margin {report.margin:.3g} is below 10",
            RuntimeWarning,
            stacklevel=2,
        )
    return report.dimension
