"""Grid-forming (VSG) inverter and grid-following PV models.

All powers are in kW/kvar/kVA, energies in kWh, frequencies in Hz.
Per-unit quantities are on the inverter's own rating ``s_rat``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

PV_Q_RATIO = 0.484  # IEEE 1547-2018 category B reactive capability


class OverdampedWarning(UserWarning):
    """The VSG loop has no oscillatory mode, so there is no frequency overshoot."""


class IntegrationError(RuntimeError):
    pass


def damping_ratio(h: float, d: float, kf: float, t_lp: float) -> tuple[float, float]:
    """Natural frequency (rad/s) and damping ratio of the VSG frequency loop.

    The loop is ``2H s + D`` in parallel with a droop ``kf / (1 + t_lp s)``,
    whose characteristic polynomial is ``2H T s^2 + (2H + D T) s + (D + kf)``.
    """
    wn = math.sqrt((d + kf) / (2.0 * h * t_lp))
    xi = (2.0 * h + d * t_lp) / (2.0 * (d + kf)) * wn
    return wn, xi


def gamma_compute(h: float, d: float, kf: float, t_lp: float) -> float:
    """Overshoot factor ``gamma`` relating the nadir to the QSS deviation.

    ``f_nadir = f_pre - (1 + gamma) * (f_pre - f_qss)``.  Returns 0 with an
    :class:`OverdampedWarning` when the loop is not underdamped.
    """
    if h <= 0 or t_lp <= 0:
        raise ValueError("h and t_lp must be positive")
    if d + kf <= 0:
        raise ValueError("d + kf must be positive")
    wn, xi = damping_ratio(h, d, kf, t_lp)
    if xi >= 1.0:
        warnings.warn("no overshoot; gamma=0 by convention", OverdampedWarning, stacklevel=2)
        return 0.0
    wr = wn * math.sqrt(1.0 - xi * xi)
    # first extremum of the step response, always in (0, pi/wr)
    t_nad = math.atan2(wr * t_lp, xi * wn * t_lp - 1.0) / wr
    return math.sqrt(t_lp * kf / (2.0 * h)) * math.exp(-xi * wn * t_nad)


def critical_lag(h: float, d: float, kf: float) -> float:
    """Smallest low-pass constant at which the loop is critically damped.

    Any lag below it is overdamped (gamma = 0).
    """
    # (2h + d T)^2 = 8 h T (d + kf)  ->  d^2 T^2 + (4hd - 8h(d+kf)) T + 4h^2 = 0
    a, b, c = d * d, 4 * h * d - 8 * h * (d + kf), 4 * h * h
    if a == 0:
        return -c / b
    return (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)


def lag_for_gamma(h: float, d: float, kf: float, gamma: float, t_max: float = 10.0) -> float:
    """Low-pass constant ``T`` on the lightly damped branch giving ``gamma``.

    gamma rises monotonically from 0 at critical damping (smallest ``T`` with
    xi = 1) so a bracketed root search on ``(T_crit, t_max]`` is unique.
    """
    lo = critical_lag(h, d, kf) * (1 + 1e-9)

    def f(t):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OverdampedWarning)
            return gamma_compute(h, d, kf, t) - gamma

    return brentq(f, lo, t_max, xtol=1e-12)


@dataclass(frozen=True)
class GfmiParams:
    """VSG control constants and ratings of one battery-backed GFMI."""

    s_rat: float
    c: float
    h: float
    d: float
    kf: float
    kv: float = 0.05
    gamma: float = 0.0
    v_star: float = 1.0
    f_star: float = 60.0
    t_lp: float | None = None

    def __post_init__(self):
        if self.s_rat <= 0 or self.c <= 0 or self.h <= 0:
            raise ValueError("s_rat, c and h must be positive")
        if self.d + self.kf <= 0:
            raise ValueError("d + kf must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.t_lp is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OverdampedWarning)
                g = gamma_compute(self.h, self.d, self.kf, self.t_lp)
            if abs(g - self.gamma) > 1e-3:
                raise ValueError(
                    f"gamma={self.gamma} inconsistent with t_lp={self.t_lp} (expected {g:.4f})"
                )

    @property
    def droop_hz_per_kw(self) -> float:
        """QSS frequency drop per kW of total output."""
        return self.f_star / (self.s_rat * (self.d + self.kf))


@dataclass(frozen=True)
class GfmiOperatingPoint:
    p_phase: tuple[float, ...]
    q_phase: tuple[float, ...]
    soc: float
    f_qss: float
    v_sq: tuple[float, ...]


class FreqResponse(NamedTuple):
    f_qss: float
    rocof: float
    f_nadir: float


def _check_range(params: GfmiParams, value: float, name: str):
    if abs(value) > params.s_rat * (1 + 1e-9):
        raise ValueError(f"|{name}|={abs(value):g} exceeds rating {params.s_rat:g} kVA")


def qss_frequency(params: GfmiParams, p_total: float, delta_f_star: float = 0.0) -> float:
    _check_range(params, p_total, "p_total")
    p_pu = p_total / params.s_rat
    return params.f_star * (1.0 - p_pu / (params.d + params.kf)) + delta_f_star


def rocof_estimate(params: GfmiParams, delta_p: float) -> float:
    """Initial rate of change of frequency (Hz/s), negative on pickup."""
    _check_range(params, delta_p, "delta_p")
    return -params.f_star * (delta_p / params.s_rat) / (2.0 * params.h)


def nadir_estimate(params: GfmiParams, f_pre: float, delta_p: float) -> float:
    _check_range(params, delta_p, "delta_p")
    dev = params.f_star * (delta_p / params.s_rat) / (params.d + params.kf)
    return f_pre - dev * (1.0 + params.gamma)


def frequency_response(params: GfmiParams, p_pre: float, delta_p: float) -> FreqResponse:
    """Closed-form (f_qss, RoCoF, nadir) for a step of ``delta_p`` from ``p_pre``."""
    f_pre = qss_frequency(params, p_pre)
    return FreqResponse(
        qss_frequency(params, p_pre + delta_p),
        rocof_estimate(params, delta_p),
        nadir_estimate(params, f_pre, delta_p),
    )


def terminal_voltage_sq(params: GfmiParams, q_total: float) -> tuple[float, float]:
    """Squared terminal voltage and its droop increment ``dv_cc``.

    Returns ``(v, dv_cc)`` with ``v = v_star**2 + dv_cc = (v_star - kv*q_pu)**2``.
    """
    _check_range(params, q_total, "q_total")
    q_pu = q_total / params.s_rat
    dv_cc = -2.0 * params.v_star * params.kv * q_pu + (params.kv * q_pu) ** 2
    return params.v_star**2 + dv_cc, dv_cc


def soc_step(params: GfmiParams, soc_prev: float, p_total: float, dt: float) -> tuple[float, bool]:
    """Advance the state of charge by one step of ``dt`` hours.

    Discharge (positive ``p_total``) lowers the SoC.  The second element is
    False when the result leaves [0, 1].
    """
    if not 0.0 <= soc_prev <= 1.0:
        raise ValueError(f"soc_prev={soc_prev} outside [0, 1]")
    soc = soc_prev - p_total * dt / params.c
    return soc, 0.0 <= soc <= 1.0


def pv_output(forecast_kw: float, bus_status_prev: int | bool) -> float:
    """Grid-following PV only produces one full step after its bus energizes."""
    return float(forecast_kw) * (1.0 if bus_status_prev else 0.0)


def pv_q_bounds(rated_kw: float, bus_status_prev: int | bool) -> tuple[float, float]:
    cap = PV_Q_RATIO * rated_kw * (1.0 if bus_status_prev else 0.0)
    return -cap, cap


# --------------------------------------------------------------------------- ODE


class StepTrajectory(NamedTuple):
    t: np.ndarray
    f: np.ndarray
    rocof: float
    f_nadir: float
    f_qss: float


ROCOF_WINDOW_S = 0.5


def _vsg_rhs(params: GfmiParams, t_lp: float, dp_pu: float):
    two_h = 2.0 * params.h

    d, kf = params.d, params.kf

    def rhs(w, pm):
        # w: per-unit frequency deviation, pm: lagged droop power (pu)
        return (-dp_pu - d * w + pm) / two_h, (-kf * w - pm) / t_lp

    return rhs


def simulate_vsg_step(
    params: GfmiParams,
    p_pre: float,
    delta_p: float,
    duration: float = 30.0,
    dt_sim: float = 1e-3,
    t_lp: float | None = None,
) -> StepTrajectory:
    """RK4 integration of the reduced-order VSG frequency loop after a load step.

    The model is the swing equation ``2H dw/dt = -dP - D w + p_m`` with
    droop feedback through a first-order lag ``T dp_m/dt = -kf w - p_m``.
    It starts from the QSS point at ``p_pre``.
    """
    t_lp = params.t_lp if t_lp is None else t_lp
    if t_lp is None:
        raise ValueError("simulation needs the low-pass time constant t_lp")
    if dt_sim > duration / 1000.0:
        raise ValueError("dt_sim must be at most duration/1000")
    _check_range(params, p_pre + delta_p, "p_pre + delta_p")
    n = int(round(duration / dt_sim))
    rhs = _vsg_rhs(params, t_lp, delta_p / params.s_rat)
    # error state relative to the pre-event QSS point
    w0 = -(p_pre / params.s_rat) / (params.d + params.kf)
    w, pm = 0.0, 0.0
    traj = np.empty(n + 1)
    traj[0] = 0.0
    h, h2, h6 = dt_sim, 0.5 * dt_sim, dt_sim / 6.0
    for k in range(n):
        a1, b1 = rhs(w, pm)
        a2, b2 = rhs(w + h2 * a1, pm + h2 * b1)
        a3, b3 = rhs(w + h2 * a2, pm + h2 * b2)
        a4, b4 = rhs(w + h * a3, pm + h * b3)
        w += h6 * (a1 + 2 * a2 + 2 * a3 + a4)
        pm += h6 * (b1 + 2 * b2 + 2 * b3 + b4)
        traj[k + 1] = w
    if not np.all(np.isfinite(traj)) or np.max(np.abs(traj)) > 10.0:
        raise IntegrationError("VSG integration diverged; reduce dt_sim")
    t = np.arange(n + 1) * dt_sim
    f = params.f_star * (1.0 + w0 + traj)
    nw = max(1, int(round(ROCOF_WINDOW_S / dt_sim)))
    slopes = np.diff(f[: nw + 1]) / dt_sim
    rocof = float(slopes[np.argmax(np.abs(slopes))])
    f_nadir = float(f.min()) if delta_p >= 0 else float(f.max())
    return StepTrajectory(t, f, rocof, f_nadir, float(f[-1]))
