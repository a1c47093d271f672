"""Exception types shared across the package."""

from __future__ import annotations


class LaserCoolError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(LaserCoolError):
    pass


class NotHermitian(LaserCoolError):
    def __init__(self, deviation: float):
        self.deviation = float(deviation)
        super().__init__(f"matrix is not Hermitian (max |m - m^dag| = {deviation:.3e})")


class TraceDeviation(LaserCoolError):
    def __init__(self, deviation: float):
        self.deviation = float(deviation)
        super().__init__(f"trace deviates from unity by {deviation:.3e}")


class NegativeEigenvalue(LaserCoolError):
    def __init__(self, deviation: float):
        self.deviation = float(deviation)
        super().__init__(f"smallest eigenvalue is negative by {deviation:.3e}")


class EigensolverFailure(LaserCoolError):
    pass


class NotUnitary(LaserCoolError):
    def __init__(self, deviation: float):
        self.deviation = float(deviation)
        super().__init__(f"matrix is not unitary (max |U^dag U - I| = {deviation:.3e})")


class NotDoublyStochastic(LaserCoolError):
    def __init__(self, deviation: float):
        self.deviation = float(deviation)
        super().__init__(
            f"matrix is not doubly stochastic (worst row/column/entry deviation = {deviation:.3e})"
        )


class InvariantViolation(LaserCoolError):
    """A conserved quantity drifted beyond tolerance during integration."""

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        if time is not None:
            message = f"{message} at t = {time:.6g}"
        super().__init__(message)


class DegenerateInput(LaserCoolError):
    pass


class DomainViolation(LaserCoolError):
    pass


class GridUnderflow(LaserCoolError):
    pass
