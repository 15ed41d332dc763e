"""Stretched path loss ``L(r) = exp(-alpha * r**beta)``.

``alpha`` is the obstacle resistance and ``beta`` the obstacle density
exponent. Distances are in meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class PathLossParams:
    alpha: float = 0.1
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be positive and finite, got {self.alpha!r}")
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ParameterError(f"beta must be positive and finite, got {self.beta!r}")


def exponent(r, params: PathLossParams):
    """Return ``alpha * r**beta``, i.e. ``-log L(r)``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise ParameterError("distance must be non-negative")
    out = params.alpha * np.power(r_arr, params.beta)
    return float(out) if out.ndim == 0 else out


def loss(r, params: PathLossParams):
    """Attenuation factor in (0, 1] at distance ``r`` (scalar or array).

    Very large exponents underflow to 0.0 in floating point; callers that
    need ratios of attenuations should work with :func:`exponent` instead.
    """
    out = np.exp(-np.asarray(exponent(r, params)))
    return float(out) if out.ndim == 0 else out
