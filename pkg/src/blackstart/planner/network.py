"""Linearized unbalanced branch-flow coefficients.

With squared phase voltages ``v`` in per-unit and per-phase flows in kW/kvar,
each line obeys ``v_j = v_i - 2 (Rbar @ P + Xbar @ Q)`` on its phases.
"""
from __future__ import annotations

import numpy as np

from ..feeder import PHASES, FeederModel, Line

A = np.exp(-2j * np.pi / 3)
# GAMMA[n, m] ~ V_n / V_m for a balanced abc set
GAMMA = np.array([[1, A**2, A], [A, 1, A**2], [A**2, A, 1]])


def sensitivity(line: Line, base_kv_ln: float) -> tuple[np.ndarray, np.ndarray]:
    """(Rbar, Xbar) in per-unit-squared per kW (kvar) for ``line``'s phases."""
    idx = [PHASES.index(p) for p in line.phases]
    g = GAMMA[np.ix_(idx, idx)]
    zc = np.conj(line.impedance())
    scale = 1.0 / (base_kv_ln**2 * 1000.0)
    return np.real(g * zc) * scale, -np.imag(g * zc) * scale


def line_coefficients(feeder: FeederModel) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    kv = feeder.base_kv_ln
    return {ln.id: sensitivity(ln, kv) for ln in feeder.lines if not ln.is_switch}


def exact_receiving_voltage(z_ohm: np.ndarray, v_send: np.ndarray, s_recv_kva: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Receiving-end phasors (volts) of a lossy line by fixed-point iteration.

    ``s_recv_kva`` is the complex power drawn at the receiving end per phase.
    Used to test the linearization; not part of the planner.
    """
    v = v_send.astype(complex).copy()
    s = s_recv_kva * 1000.0
    for _ in range(200):
        i = np.conj(s / v)
        nv = v_send - z_ohm @ i
        if np.max(np.abs(nv - v)) < tol:
            return nv
        v = nv
    raise RuntimeError("power flow iteration did not converge")
