"""Closed-form and quadrature results for the power-ratio classification.

The network-averaged CEU probability is the conditional CEU probability
``T L(r2) / (L(r1) + T L(r2))`` averaged over the joint law of the nearest
and second-nearest BS distances of a PPP.

With ``u = pi*lam*r1**2`` and ``v = pi*lam*(r2**2 - r1**2)`` that joint law
becomes two independent unit exponentials, which is the form integrated here:
the outer integral runs over ``u`` (i.e. ``r1``) and the inner one over
``v >= 0`` (i.e. ``r2 > r1``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .errors import ParameterError, QuadratureError
from .pathloss import PathLossParams
from .quadrature import QuadratureSpec, integrate, integrate_semi_infinite

__all__ = [
    "QuadratureSpec",
    "average_ceu_probability",
    "integrate_semi_infinite",
    "joint_nearest_pdf",
    "nearest_pdf",
]

# exp(-u) < 1e-12 beyond this point
_U_MAX = -math.log(1e-12)


def joint_nearest_pdf(r1, r2, lam: float):
    """Joint density of (nearest, second-nearest) BS distance, per m^2."""
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    c = 2.0 * math.pi * lam
    with np.errstate(over="ignore", invalid="ignore"):
        val = c * c * r1 * r2 * np.exp(-math.pi * lam * r2 * r2)
    out = np.where((r1 > 0) & (r2 > r1) & np.isfinite(r2), val, 0.0)
    return float(out) if out.ndim == 0 else out


def nearest_pdf(r, lam: float):
    """Rayleigh density of the nearest-BS distance, ``2 pi lam r exp(-pi lam r^2)``."""
    r = np.asarray(r, dtype=float)
    out = np.where(r >= 0, 2.0 * math.pi * lam * r * np.exp(-math.pi * lam * r * r), 0.0)
    return float(out) if out.ndim == 0 else out


def average_ceu_probability(lam: float, T: float, params: PathLossParams,
                            quad: QuadratureSpec | None = None) -> float:
    """Probability that a typical user is a CEU, averaged over fading and geometry.

    ``T`` is the linear classification threshold. Raises
    :class:`QuadratureError` (with the best estimate attached) when the
    requested tolerance is not met.
    """
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    if not T > 0:
        raise ParameterError("threshold must be positive")
    quad = quad or QuadratureSpec()
    log_T = math.log(T)
    a, b = params.alpha, params.beta
    k = math.pi * lam
    # split the error budget so outer + inner + truncation stays within tolerance
    outer_quad = QuadratureSpec(quad.relative_tolerance / 2, quad.absolute_tolerance / 2, quad.max_subdivisions)
    inner_quad = QuadratureSpec(quad.relative_tolerance / 10, quad.absolute_tolerance / 10, quad.max_subdivisions)
    worst_inner = [0.0]

    def inner(u: float) -> float:
        s1 = a * (u / k) ** (b / 2)

        def g(v):
            s2 = a * ((u + v) / k) ** (b / 2)
            # T L2 / (L1 + T L2) written as a logistic of the log ratio
            return np.exp(-v) * expit(log_T - (s2 - s1))

        val, err = integrate_semi_infinite(g, 0.0, inner_quad)
        worst_inner[0] = max(worst_inner[0], err)
        return val

    def outer(u):
        return np.exp(-u) * np.array([inner(x) for x in np.atleast_1d(u)])

    try:
        # [0, _U_MAX] carries all but 1e-12 of the outer weight
        value, err = integrate(outer, 0.0, _U_MAX, outer_quad)
    except QuadratureError as exc:
        raise QuadratureError("average CEU probability did not converge",
                              exc.estimate, exc.error_bound + worst_inner[0], exc.intervals) from exc
    err += worst_inner[0] + math.exp(-_U_MAX)
    if err > max(quad.absolute_tolerance, quad.relative_tolerance * abs(value)):
        raise QuadratureError("average CEU probability error bound above tolerance", value, err, 0)
    return min(max(value, 0.0), 1.0)
