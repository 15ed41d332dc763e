"""Exception types raised across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """An argument lies outside its valid range."""


class DegenerateScenarioError(RuntimeError):
    """A drop has too few base stations to define the nearest two."""


class ConsistencyError(ValueError):
    """Inputs that must agree with each other do not (e.g. p_c + p_e != 1)."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate and its error bound travel with the exception
    so callers can decide whether the result is still usable.
    """

    def __init__(self, message: str, estimate: float, error_bound: float, intervals: int):
        super().__init__(f"{message} (estimate={estimate!r}, error_bound={error_bound!r}, intervals={intervals})")
        self.estimate = estimate
        self.error_bound = error_bound
        self.intervals = intervals
