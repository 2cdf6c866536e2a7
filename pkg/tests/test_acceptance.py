"""Acceptance criteria, one test per criterion, at the stated tolerances."""
import itertools
import json
import math
import os
import subprocess
import sys

import numpy as np
from scipy import special

from bergman_spectra.bergman import SpaceParams
from bergman_spectra.combinatorics import compositions
from bergman_spectra.quadrature import QuadratureSpec, integrate_halfline, integrate_orthant
from bergman_spectra.representation import (
    average_operator,
    commutant_analysis,
    haar_samples,
    isotypic_decomposition,
    rep_matrices,
    unitarity_defect,
)
from bergman_spectra.symbols import BlockPartition, make_symbol, radialize_block, radialize_torus
from bergman_spectra.toeplitz import (
    MonteCarlo,
    block_radial_spectrum,
    radial_spectrum,
    toeplitz_matrices_mc,
    toeplitz_matrix,
)


def ordered_partitions(n):
    """All block partitions of n, i.e. compositions with positive parts."""
    for s in range(1, n + 1):
        for c in compositions(s, n - s):
            yield BlockPartition(tuple(x + 1 for x in c))


def test_criterion_01_identity_normalization(criterion):
    one = make_symbol("constant", {"c": 1})
    worst, cases = 0.0, 0
    for n in (1, 2, 3):
        for m in range(6):
            for kappa in ordered_partitions(n):
                for reduce in (True, False):
                    t = block_radial_spectrum(SpaceParams(n, m), kappa, one, radial_reduction=reduce)
                    worst = max(worst, max(abs(v - 1) for v in t.entries.values()))
                    cases += 1
    assert criterion(1, "identity normalization", worst <= 1e-10, f"max |gamma-1| = {worst:.2e} over {cases} tables")


def test_criterion_02_beta_dirichlet_battery(criterion):
    beta_worst = 0.0
    for n in range(1, 5):
        for m in range(7):
            ks = np.arange(m + 1)
            res = integrate_halfline(lambda r: np.exp(np.outer(np.log(r), n + ks - 1) - (n + m + 1) * np.log1p(r)[:, None]))
            exact = np.array([math.factorial(n + k - 1) * math.factorial(m - k) / math.factorial(n + m) for k in ks])
            beta_worst = max(beta_worst, float(np.max(np.abs(res.value / exact - 1))))

    dir_worst, count = 0.0, 0
    for s in (1, 2, 3):
        cases = [
            (alpha, sum(alpha) + gap)
            for alpha in itertools.product(range(1, 12), repeat=s)
            if sum(alpha) + 1 <= 12
            for gap in (1, 2, 3)
        ]
        for start in range(0, len(cases), 40):
            batch = cases[start : start + 40]
            A = np.array([a for a, _ in batch], dtype=float).T
            B = np.array([b for _, b in batch], dtype=float)

            def f(t):
                return np.exp(np.log(t) @ (A - 1) - np.log1p(t.sum(axis=1))[:, None] * B)

            vals = integrate_orthant(f, s, QuadratureSpec(64)).value
            for (alpha, beta), v in zip(batch, vals):
                exact = math.exp(sum(special.gammaln(a) for a in alpha) + special.gammaln(beta - sum(alpha)) - special.gammaln(beta))
                dir_worst = max(dir_worst, abs(v / exact - 1))
                count += 1
    ok = beta_worst <= 1e-10 and dir_worst <= 1e-8
    detail = f"half-line rel err {beta_worst:.1e}, Dirichlet rel err {dir_worst:.1e} over {count} integrals"
    assert criterion(2, "Beta/Dirichlet battery", ok, detail)


def test_criterion_03_separately_radial_closed_form(criterion):
    quad_worst, mc_worst_z, mc_checks = 0.0, 0.0, 0
    for n in (1, 2, 3):
        for m in range(6):
            P = SpaceParams(n, m)
            symbols = [make_symbol("coordinate_weight", {"i": i}, n=n) for i in range(1, n + 1)]
            mats = toeplitz_matrices_mc(P, symbols, MonteCarlo(10**6, seed=100 * n + m))
            for i, (a, T) in enumerate(zip(symbols, mats)):
                table = block_radial_spectrum(P, BlockPartition.torus(n), a)
                closed = np.array([(p[i] + 1) / (n + m + 1) for p in P.order])
                quad_worst = max(quad_worst, float(np.max(np.abs(table.per_index() - closed))))
                z = np.abs(np.real(np.diag(T.entries)) - closed) / np.diag(T.stderr)
                mc_worst_z = max(mc_worst_z, float(np.max(z)))
                mc_checks += len(closed)
    ok = quad_worst <= 1e-9 and mc_worst_z <= 4.0
    detail = f"quadrature max err {quad_worst:.1e}; Monte Carlo max {mc_worst_z:.2f} sigma over {mc_checks} diagonals"
    assert criterion(3, "separately radial closed form", ok, detail)


def test_criterion_04_radial_closed_form(criterion):
    worst = 0.0
    for n in (1, 2, 3):
        for m in range(6):
            vals, _ = radial_spectrum(SpaceParams(n, m), make_symbol("total_weight"))
            worst = max(worst, float(np.max(np.abs(vals - [(n + k) / (n + m + 1) for k in range(m + 1)]))))
    ball = block_radial_spectrum(SpaceParams(1, 1), BlockPartition((1,)), make_symbol("ball_indicator", {"R": 1}))
    ball_err = abs(ball[(0,)] - 0.75)
    ok = worst <= 1e-9 and ball_err <= 1e-9
    assert criterion(4, "radial closed form", ok, f"total_weight err {worst:.1e}; ball_indicator err {ball_err:.1e}")


RADIAL_CATALOGUE = [
    ("constant", {"c": 1.5}),
    ("total_weight", {}),
    ("ball_indicator", {"R": 1.0}),
    ("gaussian", {"alpha": 1.0}),
]


def test_criterion_05_diagonality(criterion):
    mc_worst, quad_worst = 0.0, 0.0
    for n in (1, 2):
        for m in range(4):
            P = SpaceParams(n, m)
            symbols = [make_symbol(f, p) for f, p in RADIAL_CATALOGUE]
            mats = toeplitz_matrices_mc(P, symbols, MonteCarlo(200_000, seed=10 * n + m))
            off = ~np.eye(P.space_dimension(), dtype=bool)
            for a, T in zip(symbols, mats):
                if off.any():
                    mc_worst = max(mc_worst, float(np.max(np.abs(T.entries[off]) / T.stderr[off])))
                Q = toeplitz_matrix(P, a, QuadratureSpec())
                quad_worst = max(quad_worst, Q.off_diagonal_max())
    ok = mc_worst <= 4.0 and quad_worst <= 1e-8
    assert criterion(5, "diagonality of radial symbols", ok, f"Monte Carlo max {mc_worst:.2f} sigma; quadrature max {quad_worst:.1e}")


def invariant_pool(kappa: BlockPartition, rng):
    n = kappa.n
    pool = [
        make_symbol("constant", {"c": float(rng.uniform(-1, 1))}),
        make_symbol("total_weight"),
        make_symbol("gaussian", {"alpha": float(rng.uniform(0.1, 2))}),
        make_symbol("ball_indicator", {"R": float(rng.uniform(0.3, 2))}),
    ]
    pool += [make_symbol("block_weight", {"b": b}, partition=kappa) for b in range(1, kappa.s + 1)]
    if kappa.is_torus():
        pool += [make_symbol("coordinate_weight", {"i": i}, n=n) for i in range(1, n + 1)]
    return pool


def test_criterion_06_commutativity(criterion):
    rng = np.random.default_rng(6)
    worst, pairs = 0.0, 0
    for n in (1, 2, 3):
        for m in range(5):
            P = SpaceParams(n, m)
            for kappa in ordered_partitions(n):
                pool = invariant_pool(kappa, rng)
                for _ in range(5):
                    i, j = rng.choice(len(pool), size=2, replace=False)
                    A = toeplitz_matrix(P, pool[i], QuadratureSpec())
                    B = toeplitz_matrix(P, pool[j], QuadratureSpec())
                    comm = np.linalg.norm(A.entries @ B.entries - B.entries @ A.entries)
                    worst = max(worst, float(comm))
                    pairs += 1
    assert criterion(6, "commutativity", worst <= 1e-8, f"max commutator {worst:.1e} over {pairs} pairs")


def test_criterion_07_isotypic_bookkeeping(criterion):
    sums_ok, const_worst, formula_worst = True, 0.0, 0.0
    rank_ok, margin_min, cases = True, math.inf, 0
    spec = QuadratureSpec(24)
    for n in range(1, 5):
        for m in range(7):
            P = SpaceParams(n, m)
            for kappa in ordered_partitions(n):
                dec = isotypic_decomposition(P, kappa)
                sums_ok &= sum(dec.dimensions) == math.comb(n + m, n)
                for b in range(1, kappa.s + 1):
                    a = make_symbol("block_weight", {"b": b}, partition=kappa)
                    # per-index eigenvalues from the n-dimensional torus integral, independent of the block formula
                    diag = block_radial_spectrum(P, BlockPartition.torus(n), a, spec, radial_reduction=False).per_index()
                    blk = block_radial_spectrum(P, kappa, a, spec, radial_reduction=False)
                    for comp in dec:
                        vals = diag[list(comp.basis_positions)]
                        const_worst = max(const_worst, float(np.ptp(vals)))
                        formula_worst = max(formula_worst, float(np.max(np.abs(vals - blk[comp.degrees]))))
                rep = commutant_analysis(P, kappa, probes=len(dec) + 4, samples=16, seed=n * 100 + m)
                rank_ok &= rep.dimension == len(dec)
                margin_min = min(margin_min, rep.margin)
                cases += 1
    ok = sums_ok and const_worst <= 1e-8 and formula_worst <= 1e-8 and rank_ok and margin_min >= 10
    detail = (f"{cases} (n, m, partition) cases; constancy {const_worst:.1e}; vs block formula {formula_worst:.1e}; "
              f"commutant = component count: {rank_ok}; min rank margin {margin_min:.1e}")
    assert criterion(7, "isotypic bookkeeping", ok, detail)


def test_criterion_08_averaging_identity(criterion):
    P = SpaceParams(2, 2)
    a = make_symbol("phase", {"i": 1})
    T = toeplitz_matrix(P, a, MonteCarlo(10**6, seed=8))
    results = []
    for kappa in (BlockPartition((1, 1)), BlockPartition((2,))):
        avg = average_operator(P, kappa, T, samples=2000, seed=9)
        if kappa.is_torus():
            a_tilde = radialize_torus(a, 16, n=2)
        else:
            a_tilde = radialize_block(a, kappa, 2000, seed=10)
        Tt = toeplitz_matrix(P, a_tilde, QuadratureSpec(32))
        gap = float(np.linalg.norm(avg.entries - Tt.entries))
        tol = 4.0 * math.hypot(avg.error_estimate, Tt.error_estimate)
        results.append((kappa.blocks, gap, tol))
    # torus path: exact diagonal extraction, cross-checked by the finite subgroup of 8th roots of unity
    torus = average_operator(P, BlockPartition.torus(2), T).entries
    exact = np.array_equal(torus, np.diag(np.diag(T.entries)))
    roots = np.exp(2j * np.pi * np.arange(8) / 8)
    ks = np.array([np.diag([s, t]) for s in roots for t in roots])
    R = rep_matrices(P, ks, P.order)
    finite = np.mean(R @ T.entries[None] @ np.conj(np.transpose(R, (0, 2, 1))), axis=0)
    machine = float(np.max(np.abs(finite - torus)))
    ok = all(g <= t for _, g, t in results) and exact and machine <= 1e-14
    detail = "; ".join(f"kappa={k}: |diff| {g:.1e} <= {t:.1e}" for k, g, t in results)
    detail += f"; torus exact: {exact}, finite-group check {machine:.1e}"
    assert criterion(8, "averaging identity", ok, detail)


def test_criterion_09_representation_contract(criterion):
    hom, uni, inter = 0.0, 0.0, 0.0
    inter_ok = True
    for n in (1, 2, 3):
        for m in range(5):
            P = SpaceParams(n, m)
            ks = haar_samples(BlockPartition.unitary(n), 100, seed=n * 10 + m)
            R = rep_matrices(P, ks, P.order)
            prods = rep_matrices(P, ks[0::2] @ ks[1::2], P.order)
            hom = max(hom, float(np.max(np.abs(prods - R[0::2] @ R[1::2]))))
            uni = max(uni, max(unitarity_defect(r) for r in R[:50]))
            for kappa in ordered_partitions(n):
                for a in invariant_pool(kappa, np.random.default_rng(n + m)):
                    T = toeplitz_matrix(P, a, QuadratureSpec(32))
                    for r in rep_matrices(P, haar_samples(kappa, 20, seed=m), P.order):
                        d = float(np.linalg.norm(r @ T.entries - T.entries @ r))
                        inter = max(inter, d)
                        inter_ok &= d <= 1e-8 + T.error_estimate
    ok = hom <= 1e-10 and uni <= 1e-10 and inter_ok
    detail = f"homomorphism {hom:.1e}; unitarity {uni:.1e}; intertwining {inter:.1e}"
    assert criterion(9, "representation contract", ok, detail)


def test_criterion_10_reproducibility(criterion, tmp_path):
    jobs = {
        "spectrum": {"n": 3, "m": 3, "group": [2, 1], "symbol": {"family": "gaussian", "parameters": {"alpha": 0.5}}},
        "matrix": {"n": 2, "m": 3, "symbol": {"family": "phase", "parameters": {"i": 2}},
                   "method": {"monte_carlo": {"count": 200000, "seed": 42}}},
        "verify": {"n": 2, "m": 2, "group": [1, 1], "symbol": {"family": "coordinate_weight", "parameters": {"i": 1}},
                   "method": {"monte_carlo": {"count": 100000, "seed": 5}}},
        "average": {"n": 2, "m": 2, "group": [2], "symbol": {"family": "phase", "parameters": {"i": 1}},
                    "method": {"monte_carlo": {"count": 100000, "seed": 6}}, "average": {"samples": 300, "seed": 7}},
        "decompose": {"n": 3, "m": 3, "group": [1, 2], "commutant": {"seed": 3}},
    }
    identical = True
    for command, doc in jobs.items():
        cfg = tmp_path / f"{command}.json"
        cfg.write_text(json.dumps(doc))
        outputs = []
        for workers in ("1", "1", "3"):
            out = tmp_path / f"{command}-{len(outputs)}.out"
            env = {**os.environ, "BERGMAN_SPECTRA_WORKERS": workers}
            proc = subprocess.run(
                [sys.executable, "-m", "bergman_spectra.cli", command, "--config", str(cfg), "--out", str(out)],
                env=env, capture_output=True,
            )
            identical &= proc.returncode == 0
            outputs.append(out.read_bytes())
        identical &= len(set(outputs)) == 1
    assert criterion(10, "reproducibility", identical, f"{len(jobs)} commands x 3 runs (1, 1 and 3 workers) byte-identical")
