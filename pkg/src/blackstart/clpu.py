"""Staircase cold-load-pickup demand."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class ClpuCoefficients:
    alpha1: float = 0.8
    alpha2: float = 0.4
    alpha3: float = 0.15

    def __post_init__(self):
        if not self.alpha1 >= self.alpha2 >= self.alpha3 >= 0.0:
            raise ValueError("CLPU coefficients must satisfy alpha1 >= alpha2 >= alpha3 >= 0")

    @property
    def alpha(self) -> tuple[float, float, float]:
        return (self.alpha1, self.alpha2, self.alpha3)


def _status(history: Sequence[int], t: int) -> int:
    return int(history[t]) if t >= 0 else 0


def demand_multiplier(history: Sequence[int], coeffs: ClpuCoefficients, t: int) -> float:
    """Factor applied to the diversified load at step ``t``.

    ``history[k]`` is the picked-up status at step ``k``; steps before 0
    count as not picked up.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    y = [_status(history, t - k) for k in range(4)]
    a1, a2, a3 = coeffs.alpha
    return a1 * (y[0] - y[1]) + a2 * (y[1] - y[2]) + a3 * (y[2] - y[3]) + y[0]


def clpu_active_demand(
    profile: Sequence[float], history: Sequence[int], coeffs: ClpuCoefficients, t: int
) -> float:
    # surge terms scaled one by one so integer-valued cases stay exact in floats
    p = float(profile[t])
    y = [_status(history, t - k) for k in range(4)]
    a1, a2, a3 = coeffs.alpha
    return p * y[0] + p * a1 * (y[0] - y[1]) + p * a2 * (y[1] - y[2]) + p * a3 * (y[2] - y[3])


def clpu_reactive_demand(p_actual: float, pf_angle: float) -> float:
    if abs(pf_angle) >= math.pi / 2:
        raise ValueError("power-factor angle must lie strictly inside (-pi/2, pi/2)")
    return p_actual * math.tan(pf_angle)


def demand_series(
    profile: Sequence[float], history: Sequence[int], coeffs: ClpuCoefficients
) -> list[float]:
    return [clpu_active_demand(profile, history, coeffs, t) for t in range(len(history))]
