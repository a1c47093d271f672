"""Full-matrix dissipative dynamics with instantaneous unitary control kicks.

The only relaxation channel is spontaneous emission: jump operators
``E_ij = |i><j|`` applied at rate ``gamma[i, j]`` (decay from level j to
level i).  Between kicks the state obeys ``rho' = L(rho)`` with

    L(rho) = sum_ij gamma_ij (E_ij rho E_ij^dag - 1/2 {E_ij^dag E_ij, rho})

Coherent control is modelled exclusively as instantaneous unitary
conjugations ``rho -> U rho U^dag`` at scheduled times; pulse shapes play no
role at this level of description.  This module is the ground-truth oracle
for the spectrum-level propagation in :mod:`lasercool.spectral`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import DensityMatrix, Tolerances, validate
from .errors import (
    DimensionMismatch,
    InvariantViolation,
    LaserCoolError,
    NotUnitary,
)

UNITARY_TOL = 1e-10

# Tolerances enforced on every emitted trajectory state.
TRAJECTORY_TRACE_TOL = 1e-8
TRAJECTORY_PSD_TOL = 1e-8
TRAJECTORY_HERM_TOL = 1e-10

_TRAJECTORY_TOLERANCES = Tolerances(
    herm=TRAJECTORY_HERM_TOL, trace=TRAJECTORY_TRACE_TOL, psd=TRAJECTORY_PSD_TOL
)


@dataclass(frozen=True)
class RateMatrix:
    """Spontaneous-emission rates; ``gamma[i, j]`` is the rate from j to i."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionMismatch(f"rate matrix must be square, got shape {g.shape}")
        if g.min() < 0.0:
            raise LaserCoolError(f"negative emission rate {g.min():.3e}")
        if np.max(np.abs(np.diagonal(g))) > 0.0:
            raise LaserCoolError("rate matrix must have a zero diagonal")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @classmethod
    def lambda_system(cls, gamma1: float, gamma2: float) -> "RateMatrix":
        """Three levels; the middle level decays to the outer two."""
        g = np.zeros((3, 3))
        g[0, 1] = gamma1
        g[2, 1] = gamma2
        return cls(g)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    @property
    def max_rate(self) -> float:
        return float(self.gamma.max())

    def out_rates(self) -> np.ndarray:
        """Total decay rate out of each level (column sums)."""
        return self.gamma.sum(axis=0)


def default_step(rates: RateMatrix) -> float:
    """Fixed integration step, 1e-3 over the fastest emission rate."""
    m = rates.max_rate
    return 1e-3 if m == 0.0 else 1e-3 / m


def unitarity_defect(u: np.ndarray) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True)
class ControlSchedule:
    """Ordered instantaneous kick events (time, unitary)."""

    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        checked = []
        previous = -np.inf
        for time, u in self.events:
            time = float(time)
            if time < 0.0:
                raise LaserCoolError(f"kick time {time} is negative")
            if time <= previous:
                raise LaserCoolError("kick times must be strictly increasing")
            previous = time
            u = np.array(u, dtype=complex)
            defect = unitarity_defect(u)
            if defect > UNITARY_TOL:
                raise NotUnitary(defect)
            u.setflags(write=False)
            checked.append((time, u))
        object.__setattr__(self, "events", tuple(checked))

    def __len__(self) -> int:
        return len(self.events)


def dissipator(rho, rates: RateMatrix) -> np.ndarray:
    """Spontaneous-emission generator applied to a state.

    The jump structure reduces to diagonal feeding plus uniform damping:
    populations flow in as ``gamma @ diag(rho)`` while every element (k, l)
    is damped at half the summed out-rates of levels k and l.  The result is
    Hermitian and traceless for Hermitian input.
    """
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if r.shape[0] != rates.dim:
        raise DimensionMismatch(
            f"state dimension {r.shape[0]} does not match rates dimension {rates.dim}"
        )
    gains = np.diag(rates.gamma @ np.diagonal(r))
    out = rates.out_rates()
    damping = 0.5 * (out[:, None] + out[None, :]) * r
    return gains - damping


def apply_unitary(rho: DensityMatrix, u: np.ndarray, tol: float = UNITARY_TOL) -> DensityMatrix:
    """Conjugate a state, ``U rho U^dag``; the spectrum is unchanged."""
    defect = unitarity_defect(u)
    if defect > tol:
        raise NotUnitary(defect)
    u = np.asarray(u, dtype=complex)
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    return DensityMatrix(u @ r @ u.conj().T)


def haar_unitary(n: int, seed) -> np.ndarray:
    """Draw a Haar-distributed n x n unitary, deterministic for a fixed seed.

    QR of a complex Ginibre matrix with the R diagonal rephased to unit
    modulus, which removes the sign/phase ambiguity of the factorization.
    """
    if n < 1:
        raise LaserCoolError("dimension must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def _rk4_step(r: np.ndarray, rates: RateMatrix, h: float) -> np.ndarray:
    k1 = dissipator(r, rates)
    k2 = dissipator(r + 0.5 * h * k1, rates)
    k3 = dissipator(r + 0.5 * h * k2, rates)
    k4 = dissipator(r + h * k3, rates)
    return r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _checked_state(r: np.ndarray, time: float) -> DensityMatrix:
    try:
        return validate(r, _TRAJECTORY_TOLERANCES)
    except LaserCoolError as err:
        raise InvariantViolation(f"state invariant violated ({err})", time=time) from err


def propagate(rho0, rates: RateMatrix, schedule=None, T: float = 1.0, dt: float | None = None):
    """Integrate the dissipative evolution with scheduled unitary kicks.

    Fixed-step 4th-order integration between kick events; each kick conjugates
    the state instantaneously.  Every emitted state is validated, and trace
    drift beyond 1e-8 or an eigenvalue below -1e-8 aborts with the offending
    time.  Returns a list of (time, DensityMatrix) samples, one per step.
    """
    if T < 0.0:
        raise LaserCoolError("horizon must be nonnegative")
    if dt is None:
        dt = default_step(rates)
    if dt <= 0.0:
        raise LaserCoolError("dt must be positive")
    if schedule is None:
        schedule = ControlSchedule()
    elif not isinstance(schedule, ControlSchedule):
        schedule = ControlSchedule(tuple(schedule))
    for time, _ in schedule.events:
        if time > T:
            raise LaserCoolError(f"kick time {time} exceeds horizon {T}")

    state = rho0 if isinstance(rho0, DensityMatrix) else validate(rho0)
    r = np.array(state.matrix)

    trajectory = []
    events = list(schedule.events)
    t = 0.0
    while events and events[0][0] <= 0.0:
        _, u = events.pop(0)
        r = u @ r @ u.conj().T
    trajectory.append((0.0, _checked_state(r, 0.0)))

    breakpoints = [time for time, _ in events] + [T]
    kicks = {time: u for time, u in events}
    for right in breakpoints:
        span = right - t
        if span > 1e-15:
            n_steps = max(1, math.ceil(span / dt - 1e-9))
            h = span / n_steps
            for k in range(n_steps):
                r = _rk4_step(r, rates, h)
                t_emit = t + (k + 1) * h
                trajectory.append((t_emit, _checked_state(r, t_emit)))
        t = right
        if right in kicks:
            u = kicks[right]
            r = u @ r @ u.conj().T
            trajectory.append((t, _checked_state(r, t)))
    return trajectory
