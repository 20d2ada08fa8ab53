"""Per-unit model of a three-level converter feeding an RL grid connection.

All quantities are per unit except time (seconds) and frequency (Hz).
Currents and voltages in the stationary frame use the amplitude-invariant
Clarke transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT3_2 = math.sqrt(3.0) / 2.0

K = (2.0 / 3.0) * np.array([[1.0, -0.5, -0.5],
                            [0.0, SQRT3_2, -SQRT3_2]])
K_INV = 1.5 * K.T

SWITCH_LEVELS = (-1, 0, 1)


@dataclass(frozen=True)
class SystemParams:
    R: float = 0.015
    L: float = 0.266
    V_g: float = 1.0
    V_dc: float = 1.9
    f1: float = 50.0
    T_s: float = 100e-6
    omega_base: float = field(init=False)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.R < 0:
            raise ValueError(f"R must be non-negative, got {self.R}")
        if not self.V_dc > 0:
            raise ValueError(f"V_dc must be positive, got {self.V_dc}")
        if not self.T_s > 0 or not self.f1 > 0:
            raise ValueError("T_s and f1 must be positive")
        object.__setattr__(self, "omega_base", 2.0 * math.pi * self.f1)


@dataclass(frozen=True)
class PlantMatrices:
    A: np.ndarray  # 2x2
    B: np.ndarray  # 2x3, acts on the switch position
    D: np.ndarray  # 2x3, acts on the abc grid voltage
    C: np.ndarray  # 2x2

    @property
    def decay(self) -> float:
        return float(self.A[0, 0])


def clarke(abc) -> np.ndarray:
    return K @ np.asarray(abc, dtype=float)


def inv_clarke(ab) -> np.ndarray:
    return K_INV @ np.asarray(ab, dtype=float)


def _hold_gain(R: float, a: float, dt: float, omega_base: float, L: float) -> float:
    """Integral of the RL impulse response over one hold interval, in pu/pu."""
    if a * dt < 1e-8:
        # (1 - exp(-a dt)) / R expanded around a dt = 0
        x = a * dt
        return omega_base * dt / L * (1.0 - x / 2.0 + x * x / 6.0)
    return (1.0 - math.exp(-a * dt)) / R


def discretize(p: SystemParams, dt: float | None = None) -> PlantMatrices:
    """Exact zero-order-hold discretization of the current dynamics.

    ``dt`` defaults to the controller sampling interval; the simulator also
    uses it at the finer plant resolution.
    """
    if not p.L > 0:
        raise ValueError("L must be positive")
    dt = p.T_s if dt is None else dt
    a = p.R * p.omega_base / p.L
    gain = _hold_gain(p.R, a, dt, p.omega_base, p.L)
    eye = np.eye(2)
    return PlantMatrices(
        A=math.exp(-a * dt) * eye,
        B=gain * (p.V_dc / 2.0) * K,
        D=-gain * K,
        C=eye.copy(),
    )


def step_plant(m: PlantMatrices, x, u, v_g_abc) -> np.ndarray:
    return m.A @ np.asarray(x, float) + m.B @ np.asarray(u, float) + m.D @ np.asarray(v_g_abc, float)


def grid_voltage(p: SystemParams, t: float) -> np.ndarray:
    """Balanced grid voltage in abc; phase a peaks at t = 0."""
    theta = p.omega_base * t
    return p.V_g * np.cos(theta - np.array([0.0, 2.0, 4.0]) * math.pi / 3.0)


def current_reference(P: float, Q: float, v_g_ab) -> np.ndarray:
    """Stationary-frame current that delivers P and Q at grid voltage ``v_g_ab``.

    Uses P = v.i and Q = v_beta*i_alpha - v_alpha*i_beta.
    """
    va, vb = float(v_g_ab[0]), float(v_g_ab[1])
    mag2 = va * va + vb * vb
    if mag2 == 0.0:
        raise ValueError("current reference undefined for zero grid voltage")
    return np.array([P * va + Q * vb, P * vb - Q * va]) / mag2


def rotate(ab, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * ab[0] - s * ab[1], s * ab[0] + c * ab[1]])
