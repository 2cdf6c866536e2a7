"""Dense operator matrices in the orthonormal basis ``(e_p)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bergman import SpaceParams
from .combinatorics import BasisOrder

PROVENANCES = ("closed_form", "quadrature", "monte_carlo", "averaged")


@dataclass(frozen=True)
class OperatorMatrix:
    """A matrix together with the basis it is written in.

    ``entries[q, p]`` is the ``e_q`` coefficient of the image of ``e_p``.
    ``stderr`` holds per-entry standard errors for Monte Carlo matrices;
    ``error_estimate`` is a Frobenius-norm error scale for the whole matrix.
    """

    params: SpaceParams
    order: BasisOrder
    entries: np.ndarray
    error_estimate: float = 0.0
    provenance: str = "closed_form"
    stderr: np.ndarray | None = None
    asymmetry: float = 0.0

    def __post_init__(self):
        dim = self.params.space_dimension()
        if self.entries.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.entries.shape} does not match dimension {dim}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)

    def off_diagonal_max(self) -> float:
        off = self.entries - np.diag(np.diag(self.entries))
        return float(np.max(np.abs(off))) if off.size else 0.0


def _as_array(T) -> np.ndarray:
    return np.asarray(T.entries if isinstance(T, OperatorMatrix) else T)


def commutator_norm(T1, T2) -> float:
    """Frobenius norm of ``T1 T2 - T2 T1``."""
    a, b = _as_array(T1), _as_array(T2)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"commutator needs equal square shapes, got {a.shape} and {b.shape}")
    return float(np.linalg.norm(a @ b - b @ a))
