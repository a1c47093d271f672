"""Spectrum-level dynamics under fast unitary control.

With complete, instantaneous unitary control the state is characterized by
its eigenvalue vector alone, and the dissipative motion of that vector is
linear:

    lambda' = (Theta^T B Theta + Theta^T o D) lambda

where ``Theta = |U|^2`` is the doubly-stochastic image of the applied
unitary, ``B`` holds the off-diagonal emission gains, ``D`` the diagonal
losses, and ``Theta^T o D`` is the diagonal matrix whose diagonal is
``Theta^T diag(D)``.  The matrix ``A = B + D`` has zero column sums, so the
total population is conserved for every admissible control.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .density import sort_descending
from .errors import (
    DimensionMismatch,
    InvariantViolation,
    LaserCoolError,
    NotDoublyStochastic,
    NotUnitary,
)
from .lindblad import RateMatrix, dissipator, haar_unitary, unitarity_defect

DS_TOL = 1e-10

# Simplex tolerances enforced on every emitted trajectory point.
TRAJECTORY_SUM_TOL = 1e-8
TRAJECTORY_NEG_TOL = 1e-8


@dataclass(frozen=True)
class DoublyStochastic:
    """A matrix with unit row and column sums, entries in [0, 1].

    ``order_maintaining`` marks controls that stand for continuous
    re-ordering of the eigenvalues: the integrator then re-sorts the
    spectrum descending after every step.
    """

    theta: np.ndarray
    order_maintaining: bool = False

    def __post_init__(self):
        th = np.array(self.theta, dtype=float)
        if th.ndim != 2 or th.shape[0] != th.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {th.shape}")
        worst = max(
            float(np.max(np.abs(th.sum(axis=0) - 1.0))),
            float(np.max(np.abs(th.sum(axis=1) - 1.0))),
            float(max(0.0, -th.min())),
            float(max(0.0, th.max() - 1.0)),
        )
        if worst > DS_TOL:
            raise NotDoublyStochastic(worst)
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @classmethod
    def identity(cls, n: int, order_maintaining: bool = False) -> "DoublyStochastic":
        return cls(np.eye(n), order_maintaining=order_maintaining)

    @classmethod
    def permutation(cls, perm) -> "DoublyStochastic":
        perm = tuple(perm)
        n = len(perm)
        p = np.zeros((n, n))
        p[np.arange(n), perm] = 1.0
        return cls(p)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class SpectralGenerator:
    """Population-rate generator split as A = B + D.

    ``a`` has the emission rates off the diagonal and the negated total
    out-rates on it (zero column sums); ``b`` is its nonnegative off-diagonal
    part and ``d`` the nonpositive diagonal part.
    """

    a: np.ndarray
    b: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "d"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def diagonal_losses(self) -> np.ndarray:
        return np.diagonal(self.d).copy()


def build_generator(rates: RateMatrix) -> SpectralGenerator:
    a = np.array(rates.gamma, dtype=float)
    np.fill_diagonal(a, -rates.out_rates())
    b = np.array(rates.gamma, dtype=float)
    d = np.diag(np.diagonal(a))
    return SpectralGenerator(a=a, b=b, d=d)


def theta_from_unitary(u, tol: float = 1e-10) -> DoublyStochastic:
    """Entrywise squared modulus of a unitary; always doubly stochastic."""
    u = np.asarray(u, dtype=complex)
    defect = unitarity_defect(u)
    if defect > tol:
        raise NotUnitary(defect)
    return DoublyStochastic(np.abs(u) ** 2)


def _theta_array(theta) -> np.ndarray:
    if isinstance(theta, DoublyStochastic):
        return theta.theta
    return np.asarray(theta, dtype=float)


def theta_compose_D(theta, d) -> np.ndarray:
    """Diagonal matrix whose diagonal is Theta^T applied to diag(D)."""
    th = _theta_array(theta)
    d = np.asarray(d, dtype=float)
    diag = np.diagonal(d) if d.ndim == 2 else d
    if th.shape[0] != diag.shape[0]:
        raise DimensionMismatch(
            f"control dimension {th.shape[0]} does not match diagonal length {diag.shape[0]}"
        )
    return np.diag(th.T @ diag)


def transition_matrix(theta, gen: SpectralGenerator) -> np.ndarray:
    """The generator Theta^T B Theta + Theta^T o D of the controlled motion."""
    th = _theta_array(theta)
    if th.shape[0] != gen.dim:
        raise DimensionMismatch(
            f"control dimension {th.shape[0]} does not match generator dimension {gen.dim}"
        )
    return th.T @ gen.b @ th + np.diag(th.T @ gen.diagonal_losses())


def spectral_rhs(lam, theta, gen: SpectralGenerator) -> np.ndarray:
    """Rate of change of the eigenvalues; components always sum to zero."""
    v = np.asarray(lam, dtype=float)
    m = transition_matrix(theta, gen)
    if v.shape[0] != m.shape[0]:
        raise DimensionMismatch(
            f"spectrum length {v.shape[0]} does not match generator dimension {m.shape[0]}"
        )
    return m @ v


def spectral_rhs_oracle(lam, u, rates: RateMatrix) -> np.ndarray:
    """Eigenvalue motion computed from the full-matrix generator.

    Conjugates diag(lambda) by the unitary, applies the dissipator, rotates
    back and reads the diagonal.  Used as the independent cross-check of
    :func:`spectral_rhs`.
    """
    u = np.asarray(u, dtype=complex)
    defect = unitarity_defect(u)
    if defect > 1e-10:
        raise NotUnitary(defect)
    v = np.asarray(lam, dtype=float)
    rho = u @ np.diag(v.astype(complex)) @ u.conj().T
    return np.real(np.diagonal(u.conj().T @ dissipator(rho, rates) @ u)).copy()


def _resolve_policy_step(policy, lam, t):
    theta = policy(lam, t)
    if not isinstance(theta, DoublyStochastic):
        theta = DoublyStochastic(theta)
    return theta


def spectral_propagate(lam0, policy, gen: SpectralGenerator, T: float, dt: float | None = None):
    """Integrate the controlled eigenvalue motion.

    ``policy(lam, t)`` returns the control for the step starting at t; the
    control is held fixed across the step's internal stages.  When the
    returned control is flagged ``order_maintaining`` the spectrum is
    re-sorted descending after the step, which realizes continuous
    permutation control in the small-step limit.  Emitted points must stay
    on the simplex to within 1e-8 or the run aborts.
    """
    if T < 0.0:
        raise LaserCoolError("horizon must be nonnegative")
    if dt is None:
        fastest = float(gen.b.max())
        dt = 1e-3 if fastest == 0.0 else 1e-3 / fastest
    if dt <= 0.0:
        raise LaserCoolError("dt must be positive")

    lam = np.asarray(lam0, dtype=float).copy()
    n_steps = max(1, math.ceil(T / dt - 1e-9)) if T > 0.0 else 0
    h = T / n_steps if n_steps else 0.0

    trajectory = [(0.0, lam.copy())]
    for k in range(n_steps):
        t = k * h
        theta = _resolve_policy_step(policy, lam, t)
        m = transition_matrix(theta, gen)
        k1 = m @ lam
        k2 = m @ (lam + 0.5 * h * k1)
        k3 = m @ (lam + 0.5 * h * k2)
        k4 = m @ (lam + h * k3)
        lam = lam + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if theta.order_maintaining:
            lam = sort_descending(lam)
        t_next = (k + 1) * h
        if abs(lam.sum() - 1.0) > TRAJECTORY_SUM_TOL:
            raise InvariantViolation(
                f"population sum drifted by {abs(lam.sum() - 1.0):.3e}", time=t_next
            )
        if lam.min() < -TRAJECTORY_NEG_TOL:
            raise InvariantViolation(
                f"population went negative by {-lam.min():.3e}", time=t_next
            )
        trajectory.append((t_next, lam.copy()))
    return trajectory


def sample_unistochastic(n: int, rng) -> DoublyStochastic:
    """Squared-modulus image of a Haar-random unitary."""
    return theta_from_unitary(haar_unitary(n, rng))


def _permutation_tuples(n: int):
    return list(itertools.permutations(range(n)))


def sample_birkhoff(n: int, rng, max_components: int = 24) -> DoublyStochastic:
    """Random convex combination of permutation matrices.

    Covers the full doubly-stochastic polytope, a strict superset of the
    unistochastic matrices for n >= 3.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    perms = _permutation_tuples(n)
    if len(perms) > max_components:
        chosen = rng.choice(len(perms), size=max_components, replace=False)
        perms = [perms[int(i)] for i in chosen]
    weights = rng.dirichlet(np.ones(len(perms)))
    theta = np.zeros((n, n))
    for w, perm in zip(weights, perms):
        theta[np.arange(n), perm] += w
    return DoublyStochastic(theta)
