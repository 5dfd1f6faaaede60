"""
Confluent SUSY Toolkit - Spectral Check
Finite-difference Hamiltonian -d^2/dx^2 + V with Dirichlet truncation, lowest
eigenvalues by Sturm-sequence bisection and Richardson error estimates
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.linalg import eigvalsh_tridiagonal

from .schrodinger_core import Grid, SampledFunction

logger = logging.getLogger(__name__)

EIGENVALUE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DiscreteHamiltonian:
    """Symmetric tridiagonal matrix on the interior points of a grid"""

    grid: Grid
    diagonal: np.ndarray
    off_diagonal: float

    @property
    def dimension(self) -> int:
        return len(self.diagonal)

    def to_dense(self) -> np.ndarray:
        off = np.full(self.dimension - 1, self.off_diagonal)
        return np.diag(self.diagonal) + np.diag(off, 1) + np.diag(off, -1)


@dataclass
class SpectrumReport:
    """Lowest eigenvalues with Richardson error estimates and the bound-state count"""

    eigenvalues: List[float]
    errors: List[Optional[float]]
    threshold: float
    bound_count: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "index": range(len(self.eigenvalues)),
            "eigenvalue": self.eigenvalues,
            "error": [np.nan if e is None else e for e in self.errors],
            "bound": [e < self.threshold for e in self.eigenvalues],
        })

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues,
            "errors": self.errors,
            "threshold": self.threshold,
            "bound_count": self.bound_count,
        }


def build_hamiltonian(V: SampledFunction) -> DiscreteHamiltonian:
    """
    3-point discretization of -d^2/dx^2 + V, psi = 0 at both grid ends

    Args:
        V: Potential sampled on the grid

    Returns:
        DiscreteHamiltonian of dimension n_points - 2
    """
    h = V.grid.h
    diagonal = 2.0 / h ** 2 + np.asarray(V.values[1:-1], dtype=float)
    logger.debug(f"Hamiltonian of dimension {len(diagonal)} with h={h:.4g}")
    return DiscreteHamiltonian(V.grid, diagonal, -1.0 / h ** 2)


def lowest_eigenvalues(H: DiscreteHamiltonian, count: int) -> List[float]:
    """
    The `count` smallest eigenvalues, ascending

    Args:
        H: Discrete Hamiltonian
        count: Number of eigenvalues (>= 1)

    Returns:
        Eigenvalues bracketed by Sturm-sequence bisection to EIGENVALUE_TOL
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    count = min(count, H.dimension)
    off = np.full(H.dimension - 1, H.off_diagonal)
    values = eigvalsh_tridiagonal(H.diagonal, off, select="i", select_range=(0, count - 1),
                                  lapack_driver="stebz", tol=EIGENVALUE_TOL)
    return [float(v) for v in np.sort(values)]


def sturm_count(H: DiscreteHamiltonian, t: float) -> int:
    """Number of eigenvalues strictly below t (negative pivots of H - t)"""
    b2 = H.off_diagonal ** 2
    guard = np.finfo(float).eps * max(abs(H.off_diagonal), 1.0)
    count = 0
    pivot = 1.0
    for i, a in enumerate(H.diagonal):
        pivot = a - t - (b2 / pivot if i else 0.0)
        if pivot == 0.0:
            pivot = -guard
        if pivot < 0:
            count += 1
    return count


def bound_state_count(H: DiscreteHamiltonian, threshold: float) -> int:
    return sturm_count(H, threshold)


def richardson_errors(V: SampledFunction, eigenvalues: List[float]) -> List[Optional[float]]:
    """|E_h - E_2h| / 3 per eigenvalue; None when the grid cannot be halved"""
    grid = V.grid
    try:
        coarse = grid.coarsen(2)
    except ValueError as e:
        logger.info(f"Richardson estimate skipped: {e}")
        return [None] * len(eigenvalues)
    coarse_values = lowest_eigenvalues(build_hamiltonian(SampledFunction(coarse, V.values[::2])), len(eigenvalues))
    return [abs(fine - rough) / 3.0 for fine, rough in zip(eigenvalues, coarse_values)]


def spectrum(V: SampledFunction, count: int, threshold: Optional[float] = None) -> SpectrumReport:
    """
    Lowest eigenvalues of -d^2/dx^2 + V with error column and bound-state count

    Args:
        V: Sampled potential
        count: Number of eigenvalues
        threshold: Continuum edge (defaults to the smaller end value of V)

    Returns:
        SpectrumReport
    """
    if threshold is None:
        threshold = float(min(V.values[0], V.values[-1]))
    H = build_hamiltonian(V)
    eigenvalues = lowest_eigenvalues(H, count)
    errors = richardson_errors(V, eigenvalues)
    bound = bound_state_count(H, threshold)
    logger.info(
        f"Spectrum of '{V.name}': " + ", ".join(f"{e:.6f}" for e in eigenvalues)
        + f" ({bound} below {threshold:.3g})"
    )
    return SpectrumReport(eigenvalues, errors, threshold, bound)
