import math

import numpy as np
import pytest
from scipy import special

from bergman_spectra.bergman import SpaceParams, evaluate_basis
from bergman_spectra.matrices import OperatorMatrix, commutator_norm
from bergman_spectra.quadrature import QuadratureSpec, integrate_halfline, integrate_orthant
from bergman_spectra.representation import isotypic_decomposition
from bergman_spectra.symbols import BlockPartition, make_symbol
from bergman_spectra.toeplitz import (
    MonteCarlo,
    block_radial_spectrum,
    component_eigenvalues,
    normalizing_constant,
    polynomial_norm_sq,
    radial_spectrum,
    rayleigh_quotient,
    representative_vector,
    separately_radial_spectrum,
    spectrum_vs_matrix,
    toeplitz_matrices_mc,
    toeplitz_matrix,
)

RADIAL = [("total_weight", {}), ("gaussian", {"alpha": 0.8}), ("constant", {"c": 2.0})]


def test_constant_gives_scaled_identity():
    P = SpaceParams(3, 2)
    T = toeplitz_matrix(P, make_symbol("constant", {"c": 2.5}), QuadratureSpec())
    assert np.max(np.abs(T.entries - 2.5 * np.eye(10))) <= 1e-12
    assert T.provenance == "quadrature"


def test_spectrum_examples():
    t = block_radial_spectrum(SpaceParams(1, 2), BlockPartition((1,)), make_symbol("total_weight"))
    np.testing.assert_allclose([t[(k,)] for k in range(3)], [0.25, 0.5, 0.75], atol=1e-14)
    a = make_symbol("block_weight", {"b": 1}, partition=(2, 1))
    t = block_radial_spectrum(SpaceParams(3, 1), BlockPartition((2, 1)), a)
    assert t[(0, 0)] == pytest.approx(0.4, abs=1e-13)
    # Dirichlet oracle: C(0,0) * Gamma(3) Gamma(1) Gamma(2) / Gamma(6)
    assert float(normalizing_constant(SpaceParams(3, 1), BlockPartition((2, 1)), (0, 0))) == 24
    assert 24 * math.gamma(3) * math.gamma(1) * math.gamma(2) / math.gamma(6) == pytest.approx(0.4)
    t = separately_radial_spectrum(SpaceParams(2, 2), make_symbol("coordinate_weight", {"i": 1}))
    for p in SpaceParams(2, 2).order:
        assert t.per_index_view[p] == pytest.approx((p[0] + 1) / 5, abs=1e-13)


def test_ball_indicator_uses_split_radial_integral():
    t = block_radial_spectrum(SpaceParams(1, 1), BlockPartition((1,)), make_symbol("ball_indicator", {"R": 1}))
    assert t[(0,)] == pytest.approx(0.75, abs=1e-12)
    assert t.method == "quadrature:radial"
    with pytest.raises(ValueError):
        block_radial_spectrum(
            SpaceParams(2, 1), BlockPartition((1, 1)), make_symbol("ball_indicator"), radial_reduction=False
        )


def test_identity_normalization_all_partitions():
    one = make_symbol("constant", {"c": 1})
    for n, blocks in [(1, (1,)), (2, (1, 1)), (2, (2,)), (3, (2, 1)), (3, (1, 2)), (3, (1, 1, 1)), (4, (2, 2))]:
        for m in range(5):
            t = block_radial_spectrum(SpaceParams(n, m), BlockPartition(blocks), one, radial_reduction=False)
            assert max(abs(v - 1) for v in t.entries.values()) <= 1e-10


def test_alternative_prefactor_fails_normalization():
    # A prefactor m!/(p!(m-|p|)!) in front of the same Dirichlet integral gives m!/(n+m)! at a = 1,
    # not 1; the (n+m)!/(p!(m-|p|)!) prefactor used here is the one that normalizes.
    n, m = 2, 3
    for p in [(0, 0), (1, 2), (2, 0)]:
        integral = integrate_orthant(
            lambda t: np.prod(t ** np.array(p), axis=1) * (1 + t.sum(axis=1)) ** -(n + m + 1), n
        ).value
        denom = math.prod(math.factorial(x) for x in p) * math.factorial(m - sum(p))
        wrong = math.factorial(m) / denom * integral
        right = math.factorial(n + m) / denom * integral
        assert wrong == pytest.approx(math.factorial(m) / math.factorial(n + m), rel=1e-12)
        assert right == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("family,params", RADIAL)
def test_consistency_chain(family, params):
    for n, m in [(2, 3), (3, 2)]:
        P = SpaceParams(n, m)
        a = make_symbol(family, params)
        rad = block_radial_spectrum(P, BlockPartition.unitary(n), a).per_index()
        torus = block_radial_spectrum(P, BlockPartition.torus(n), a, radial_reduction=False).per_index()
        blk = block_radial_spectrum(P, BlockPartition((1, n - 1)), a, radial_reduction=False).per_index()
        assert np.max(np.abs(rad - torus)) <= 1e-10
        assert np.max(np.abs(rad - blk)) <= 1e-10


def test_block_symbol_torus_path_is_component_constant():
    P = SpaceParams(3, 3)
    kappa = BlockPartition((2, 1))
    a = make_symbol("block_weight", {"b": 1}, partition=kappa)
    blk = block_radial_spectrum(P, kappa, a)
    torus = block_radial_spectrum(P, BlockPartition.torus(3), a)
    for p in P.order:
        assert torus.per_index_view[p] == pytest.approx(blk.per_index_view[p], abs=1e-10)


def test_per_index_view_and_dimensions():
    P = SpaceParams(3, 2)
    kappa = BlockPartition((2, 1))
    t = block_radial_spectrum(P, kappa, make_symbol("total_weight"))
    for p, v in t.per_index_view.items():
        assert v == t.entries[kappa.block_degrees(p)]
    assert list(t.dimensions.values()) == isotypic_decomposition(P, kappa).dimensions


def test_radial_closed_form():
    for n in range(1, 4):
        for m in range(6):
            vals, errs = radial_spectrum(SpaceParams(n, m), make_symbol("total_weight"))
            np.testing.assert_allclose(vals, [(n + k) / (n + m + 1) for k in range(m + 1)], atol=1e-12)


def test_gaussian_against_scipy_oracle():
    # gamma(k) = C int r^{n+k-1} e^{-alpha r} (1+r)^{-(n+m+1)} dr = C Gamma(n+k) U(n+k, k-m, alpha)
    n, m, alpha = 2, 3, 0.8
    vals, _ = radial_spectrum(SpaceParams(n, m), make_symbol("gaussian", {"alpha": alpha}))
    for k in range(m + 1):
        C = math.factorial(n + m) / (math.factorial(n + k - 1) * math.factorial(m - k))
        oracle = C * math.gamma(n + k) * special.hyperu(n + k, k - m, alpha)
        assert vals[k] == pytest.approx(oracle, rel=1e-10)


def test_eigenvalues_respect_symbol_range():
    P = SpaceParams(3, 3)
    for a in [make_symbol("total_weight"), make_symbol("coordinate_weight", {"i": 2}),
              make_symbol("ball_indicator", {"R": 0.7}), make_symbol("gaussian", {"alpha": 3.0})]:
        t = block_radial_spectrum(P, a.invariance_partition(3), a)
        vals = np.array(list(t.entries.values()))
        assert np.all(vals >= -1e-10) and np.all(vals <= 1 + 1e-10)


def test_rejects_insufficient_invariance():
    P = SpaceParams(2, 2)
    with pytest.raises(ValueError):
        block_radial_spectrum(P, BlockPartition.unitary(2), make_symbol("coordinate_weight", {"i": 1}))
    with pytest.raises(ValueError):
        toeplitz_matrix(P, make_symbol("phase", {"i": 1}), QuadratureSpec())
    with pytest.raises(ValueError):
        block_radial_spectrum(P, BlockPartition((3,)), make_symbol("total_weight"))


def test_representative_vector_examples():
    P = SpaceParams(2, 2)
    v = representative_vector(P, BlockPartition.unitary(2), (0,))
    assert v[0] == 1 and np.all(v[1:] == 0)
    v = representative_vector(P, BlockPartition.unitary(2), (1,))
    assert polynomial_norm_sq(P, v) == pytest.approx(1.0)
    for n, m, k in [(2, 2, 1), (3, 4, 2), (2, 5, 3)]:
        P = SpaceParams(n, m)
        v = representative_vector(P, BlockPartition.unitary(n), (k,))
        expected = math.factorial(n + k - 1) * math.factorial(m - k) / (math.factorial(n - 1) * math.factorial(m))
        assert polynomial_norm_sq(P, v) == pytest.approx(expected, rel=1e-12)
        # one-dimensional oracle: int |z|^{2k} over the sphere average gives the same norm
        C = math.factorial(n + m) / (math.factorial(n - 1) * math.factorial(m))
        oracle = C * integrate_halfline(lambda r: r ** (n - 1 + k) * (1 + r) ** -(n + m + 1)).value
        assert oracle == pytest.approx(expected, rel=1e-10)
    P = SpaceParams(3, 3)
    for p in P.order:
        v = representative_vector(P, BlockPartition.torus(3), p)
        assert v[P.order.index_of(p)] == 1 and np.count_nonzero(v) == 1
    with pytest.raises(ValueError):
        representative_vector(P, BlockPartition.torus(3), (2, 2, 0))


def test_representative_vector_is_supported_on_its_component():
    P = SpaceParams(4, 3)
    kappa = BlockPartition((2, 2))
    for comp in isotypic_decomposition(P, kappa):
        v = representative_vector(P, kappa, comp.degrees)
        assert set(np.flatnonzero(v)) == set(comp.basis_positions)


def test_monte_carlo_matrix_properties():
    P = SpaceParams(2, 2)
    a = make_symbol("total_weight")
    T = toeplitz_matrix(P, a, MonteCarlo(50000, seed=3))
    assert T.provenance == "monte_carlo"
    np.testing.assert_array_equal(T.entries, T.entries.conj().T)
    assert T.asymmetry < 1e-12
    vals, _ = radial_spectrum(P, a)
    expected = np.array([vals[p.degree()] for p in P.order])
    assert np.all(np.abs(np.diag(T.entries) - expected) <= 4 * np.diag(T.stderr) + 1e-15)
    off = ~np.eye(6, dtype=bool)
    assert np.all(np.abs(T.entries[off]) <= 4.5 * T.stderr[off] + 1e-15)


def test_monte_carlo_worker_count_does_not_change_result(monkeypatch):
    P = SpaceParams(2, 3)
    a = make_symbol("phase", {"i": 1})
    mc = MonteCarlo(150000, seed=8)
    monkeypatch.setenv("BERGMAN_SPECTRA_WORKERS", "1")
    one = toeplitz_matrix(P, a, mc).entries
    monkeypatch.setenv("BERGMAN_SPECTRA_WORKERS", "3")
    three = toeplitz_matrix(P, a, mc).entries
    np.testing.assert_array_equal(one, three)


def test_rayleigh_quotients_match_block_spectrum():
    P = SpaceParams(3, 2)
    kappa = BlockPartition((2, 1))
    a = make_symbol("block_weight", {"b": 2}, partition=kappa)
    t = block_radial_spectrum(P, kappa, a)
    T = toeplitz_matrix(P, a, MonteCarlo(200000, seed=1))
    for comp in isotypic_decomposition(P, kappa):
        v = representative_vector(P, kappa, comp.degrees)
        q = rayleigh_quotient(T, v)
        se = max(T.stderr[i, i] for i in comp.basis_positions)
        assert abs(q - t[comp.degrees]) <= 4 * se + 1e-12


def test_real_part_matrix_at_m1():
    # Re(z) is unbounded and kept out of the catalogue; at n = m = 1 its first moments exist.
    # Deterministic oracle: phase trapezoid times the radial rule.
    P = SpaceParams(1, 1)
    theta = np.exp(2j * np.pi * np.arange(16) / 16)

    def entry(q, p):
        def f(r):
            z = np.sqrt(r)[:, None] * theta[None, :]
            E = evaluate_basis(P, None, z.reshape(-1, 1)).reshape(len(r), len(theta), 2)
            vals = (z.real * E[:, :, p] * np.conj(E[:, :, q])).mean(axis=1)
            return 2 * vals * (1 + r) ** -3
        return integrate_halfline(f, QuadratureSpec(64)).value

    M = np.array([[entry(q, p) for p in range(2)] for q in range(2)])
    np.testing.assert_allclose(M, [[0, 0.5], [0.5, 0]], atol=1e-6)


def test_commutator_norm_examples():
    P = SpaceParams(1, 1)
    T = OperatorMatrix(P, P.order, np.array([[0, 1], [0, 0]], dtype=complex))
    D = OperatorMatrix(P, P.order, np.diag([1, 2]).astype(complex))
    # T D - D T = [[0, 2 - 1], [0, 0]]
    assert commutator_norm(T, D) == pytest.approx(1.0, abs=1e-15)
    assert commutator_norm(T, T.entries.T) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert commutator_norm(T, np.eye(2)) == 0
    assert commutator_norm(np.diag([1.0, 3.0]), np.diag([2.0, 5.0])) == 0
    with pytest.raises(ValueError):
        commutator_norm(np.eye(2), np.eye(3))


def test_verification_examples():
    one = spectrum_vs_matrix(
        SpaceParams(2, 2), BlockPartition((1, 1)), make_symbol("constant", {"c": 1}), mc=MonteCarlo(50000, 1)
    )
    assert one.passed
    ball = spectrum_vs_matrix(
        SpaceParams(1, 1), BlockPartition((1,)), make_symbol("ball_indicator", {"R": 1}), mc=MonteCarlo(100000, 2)
    )
    assert ball.passed
    assert ball["eigenvalues"].detail["max_gap"] < 0.01
    pair = spectrum_vs_matrix(
        SpaceParams(2, 3), BlockPartition((1, 1)), make_symbol("coordinate_weight", {"i": 1}),
        mc=MonteCarlo(100000, 3), partner=make_symbol("coordinate_weight", {"i": 2}),
    )
    assert pair.passed
    assert pair.to_dict()["checks"][2]["name"] == "commutator"


def test_verification_detects_a_wrong_group():
    # a torus symbol is not constant on U(2)-levels: checking it against the torus spectrum of a
    # different symbol must fail
    P = SpaceParams(2, 2)
    a = make_symbol("coordinate_weight", {"i": 1})
    Ta, = toeplitz_matrices_mc(P, [a], MonteCarlo(100000, 4))
    means, ses, spreads = component_eigenvalues(Ta, isotypic_decomposition(P, BlockPartition.unitary(2)))
    assert np.max(spreads / np.maximum(ses, 1e-300)) > 10
