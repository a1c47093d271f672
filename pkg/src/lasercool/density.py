"""Density-matrix and spectrum primitives.

Validation of quantum states, extraction of eigenvalue spectra, purity
measures, and the majorization partial order used to compare how mixed two
spectra are.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EigensolverFailure,
    NegativeEigenvalue,
    NotHermitian,
    TraceDeviation,
)

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
EIG_TOL = 1e-9


@dataclass(frozen=True)
class Tolerances:
    """Validation tolerances; defaults suit double precision at small N."""

    herm: float = HERM_TOL
    trace: float = TRACE_TOL
    psd: float = PSD_TOL
    eig: float = EIG_TOL


DEFAULT_TOLERANCES = Tolerances()


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """A validated Hermitian, unit-trace, positive-semidefinite state.

    Construct through :func:`validate`; the constructor itself does not
    re-check the invariants.
    """

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(np.array(self.matrix, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.matrix)).copy()


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues arranged in decreasing order; a point on the simplex."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.array(self.values, dtype=float)))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, k):
        return self.values[k]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.values, dtype=dtype)


class MajorizationOrder(enum.Enum):
    LESS_THAN = "less_than"  # x is majorized by y (x more mixed)
    GREATER_THAN = "greater_than"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def _as_vector(lam) -> np.ndarray:
    if isinstance(lam, Spectrum):
        return lam.values
    return np.asarray(lam, dtype=float)


def sort_descending(values: np.ndarray) -> np.ndarray:
    """Sort descending with a stable tie rule (original index order kept)."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(-values, kind="stable")
    return values[order]


def validate(m, tol: Tolerances = DEFAULT_TOLERANCES) -> DensityMatrix:
    """Check the three state invariants and wrap the matrix on success.

    Raises NotHermitian, TraceDeviation or NegativeEigenvalue, each carrying
    the measured deviation, when the corresponding invariant fails.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")

    herm_dev = float(np.max(np.abs(m - m.conj().T)))
    if herm_dev > tol.herm:
        raise NotHermitian(herm_dev)

    trace_dev = float(abs(np.trace(m) - 1.0))
    if trace_dev > tol.trace:
        raise TraceDeviation(trace_dev)

    try:
        eigenvalues = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as err:  # pragma: no cover - LAPACK rarely fails at small N
        raise EigensolverFailure(str(err)) from err
    min_eig = float(eigenvalues[0])
    if min_eig < -tol.psd:
        raise NegativeEigenvalue(-min_eig)

    return DensityMatrix(m)


def spectrum(rho: DensityMatrix, tol: Tolerances = DEFAULT_TOLERANCES) -> Spectrum:
    """Eigenvalues of a state, sorted in decreasing order.

    Values within `tol.psd` of the [0, 1] boundary are clipped onto it so the
    simplex stays closed under floating-point drift; larger excursions raise.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    try:
        values = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as err:  # pragma: no cover
        raise EigensolverFailure(str(err)) from err
    if values[0] < -tol.psd:
        raise NegativeEigenvalue(float(-values[0]))
    if values[-1] > 1.0 + tol.psd:
        raise TraceDeviation(float(values[-1] - 1.0))
    values = np.clip(values, 0.0, 1.0)
    return Spectrum(sort_descending(values))


def as_spectrum(values, tol: Tolerances = DEFAULT_TOLERANCES) -> Spectrum:
    """Build a Spectrum from raw probabilities, sorting and checking the simplex."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if v.min() < -tol.psd:
        raise NegativeEigenvalue(float(-v.min()))
    total_dev = float(abs(v.sum() - 1.0))
    if total_dev > max(tol.trace, 1e-8):
        raise TraceDeviation(total_dev)
    return Spectrum(sort_descending(np.clip(v, 0.0, 1.0)))


def purity_largest(lam) -> float:
    """The largest eigenvalue; the cooling objective throughout the package."""
    return float(_as_vector(lam)[0])


def purity_tr2(lam) -> float:
    """Sum of squared eigenvalues; 1 exactly on pure states."""
    v = _as_vector(lam)
    return float(np.dot(v, v))


def entropy_vn(lam) -> float:
    """Von Neumann entropy -sum(p ln p) with 0 ln 0 := 0 (k = 1)."""
    v = _as_vector(lam)
    positive = v[v > 0.0]
    return float(-np.sum(positive * np.log(positive)))


def majorizes(x, y, atol: float = 1e-12) -> MajorizationOrder:
    """Compare two probability vectors by prefix sums of their sorted orders."""
    xv = _as_vector(x)
    yv = _as_vector(y)
    if xv.shape != yv.shape:
        raise DimensionMismatch(f"length mismatch: {xv.shape} vs {yv.shape}")
    cx = np.cumsum(sort_descending(xv))
    cy = np.cumsum(sort_descending(yv))
    diff = cx - cy
    if np.all(np.abs(diff) <= atol):
        return MajorizationOrder.EQUAL
    if np.all(diff <= atol):
        return MajorizationOrder.LESS_THAN
    if np.all(diff >= -atol):
        return MajorizationOrder.GREATER_THAN
    return MajorizationOrder.INCOMPARABLE
