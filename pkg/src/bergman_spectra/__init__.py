"""Toeplitz operators on weighted Bergman spaces of polynomials on C^n.

The space of polynomials of degree at most ``m`` in ``n`` variables carries
the inner product of the probability measure
``nu_m ~ (1+|z|^2)^{-(n+m+1)} dz``.  This package builds Toeplitz matrices of
bounded symbols in the orthonormal monomial basis, computes their spectra for
symbols invariant under block-unitary groups ``U(k_1) x ... x U(k_s)``, and
checks the representation-theoretic structure by brute force.
"""
from .bergman import SpaceParams, evaluate_basis, kernel, monomial_inner_product, sample_measure
from .combinatorics import BasisOrder, MultiIndex, enumerate_multi_indices, multinomial
from .matrices import OperatorMatrix, commutator_norm
from .quadrature import ConvergenceError, QuadratureSpec, integrate_halfline, integrate_orthant, mc_expectation
from .representation import (
    GroupElement,
    IsotypicDecomposition,
    average_operator,
    commutant_dimension,
    haar_sample,
    isotypic_decomposition,
    rep_matrix,
)
from .symbols import BlockPartition, Symbol, evaluate, make_symbol, radialize_block, radialize_torus
from .toeplitz import (
    MonteCarlo,
    SpectrumTable,
    VerificationReport,
    block_radial_spectrum,
    representative_vector,
    spectrum_vs_matrix,
    toeplitz_matrix,
)

__all__ = [
    "BasisOrder", "BlockPartition", "ConvergenceError", "GroupElement", "IsotypicDecomposition",
    "MonteCarlo", "MultiIndex", "OperatorMatrix", "QuadratureSpec", "SpaceParams", "SpectrumTable",
    "Symbol", "VerificationReport", "average_operator", "block_radial_spectrum", "commutant_dimension",
    "commutator_norm", "enumerate_multi_indices", "evaluate", "evaluate_basis", "haar_sample",
    "integrate_halfline", "integrate_orthant", "isotypic_decomposition", "kernel", "make_symbol",
    "mc_expectation", "monomial_inner_product", "multinomial", "radialize_block", "radialize_torus",
    "rep_matrix", "representative_vector", "sample_measure", "spectrum_vs_matrix", "toeplitz_matrix",
]
