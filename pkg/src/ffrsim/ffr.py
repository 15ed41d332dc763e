"""Power-ratio user classification and the two-level FFR power scheme.

A user is a cell-edge user (CEU) when the faded signal from its nearest base
station is weaker than ``T`` times the faded signal from the second-nearest
one; otherwise it is a cell-center user (CCU). CCUs are served with power
``P`` and CEUs with ``a * P``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConsistencyError, ParameterError


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


class UserClass(enum.Enum):
    CCU = "CCU"
    CEU = "CEU"


@dataclass(frozen=True)
class FfrConfig:
    """Classification threshold, power ratio, base power and sub-band count.

    The threshold is kept in dB (the unit every figure and config file uses)
    and exposed in linear form through :attr:`threshold_T`, so that a config
    written to disk and read back yields bit-identical linear values.
    """

    threshold_T_db: float = 0.0
    power_ratio_a: float = 10.0
    base_power_P: float = 1.0
    subbands_N: int = 10

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold_T_db):
            raise ParameterError("threshold_T_db must be finite")
        if not self.power_ratio_a > 0:
            raise ParameterError(f"power_ratio_a must be positive, got {self.power_ratio_a!r}")
        if not self.base_power_P > 0:
            raise ParameterError(f"base_power_P must be positive, got {self.base_power_P!r}")
        if int(self.subbands_N) != self.subbands_N or self.subbands_N < 1:
            raise ParameterError(f"subbands_N must be a positive integer, got {self.subbands_N!r}")

    @property
    def threshold_T(self) -> float:
        return db_to_linear(self.threshold_T_db)


def classify(g1: float, g2: float, L1: float, L2: float, T: float) -> UserClass:
    """Classify one user from its two broadcast-channel gains and attenuations.

    CEU iff ``g1*L1 / (g2*L2) < T``; a ratio exactly equal to ``T`` is a CCU.
    """
    if g1 <= 0 or g2 <= 0:
        raise ParameterError("fading gains must be positive")
    if not (0 < L1 <= 1 and 0 < L2 <= 1):
        raise ParameterError("attenuations must lie in (0, 1]")
    if T <= 0:
        raise ParameterError("threshold must be positive")
    return UserClass.CEU if (g1 * L1) / (g2 * L2) < T else UserClass.CCU


def ceu_prob_conditional(L1: float, L2: float, T: float) -> float:
    """P(CEU | r1, r2) with i.i.d. unit-mean exponential gains: ``T*L2 / (L1 + T*L2)``."""
    if not (0 < L1 <= 1 and 0 < L2 <= 1):
        raise ParameterError("attenuations must lie in (0, 1]")
    if T <= 0:
        raise ParameterError("threshold must be positive")
    return T * L2 / (L1 + T * L2)


def tx_power(user_class: UserClass, cfg: FfrConfig) -> float:
    if user_class is UserClass.CEU:
        return cfg.power_ratio_a * cfg.base_power_P
    return cfg.base_power_P


def split_densities(lam: float, p_e: float) -> tuple[float, float]:
    """Densities of BSs transmitting at the CCU and CEU power levels.

    Returns ``(lambda_c, lambda_e)``; ``lambda_c`` is computed as the
    remainder so the two sum to ``lam`` up to one rounding step.
    """
    if lam < 0:
        raise ParameterError("density must be non-negative")
    if not 0 <= p_e <= 1:
        raise ParameterError("p_e must lie in [0, 1]")
    lambda_e = lam * p_e
    return lam - lambda_e, lambda_e


def average_power(cfg: FfrConfig, p_c: float, p_e: float) -> float:
    """Mean serving power ``P * (p_c + a * p_e)``."""
    if abs(p_c + p_e - 1.0) > 1e-12:
        raise ConsistencyError(f"p_c + p_e must equal 1, got {p_c + p_e!r}")
    return cfg.base_power_P * (p_c + cfg.power_ratio_a * p_e)
