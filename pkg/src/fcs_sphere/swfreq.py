"""Second-order IIR estimate of the device switching frequency."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_DEVICES = 12  # four devices per phase leg of a three-level NPC converter


@dataclass(frozen=True)
class FilterParams:
    a1: float = 0.99
    a2: float = 0.99
    T_s: float = 100e-6

    def __post_init__(self):
        for name in ("a1", "a2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if not self.T_s > 0:
            raise ValueError("T_s must be positive")


def filter_matrices(fp: FilterParams):
    """Return ``(A_sw, B_sw, C_sw)``; the second state is the frequency in Hz."""
    A = np.array([[fp.a1, 0.0],
                  [1.0 - fp.a1, fp.a2]])
    B = (1.0 - fp.a2) / (N_DEVICES * fp.T_s) * np.array([[1.0, 1.0, 1.0],
                                                          [0.0, 0.0, 0.0]])
    C = np.array([[0.0, 1.0]])
    return A, B, C


def transitions(u, u_prev) -> np.ndarray:
    return np.abs(np.asarray(u, dtype=int) - np.asarray(u_prev, dtype=int))


def step_filter(fp: FilterParams, x, p) -> np.ndarray:
    A, B, _ = filter_matrices(fp)
    return A @ np.asarray(x, dtype=float) + B @ np.asarray(p, dtype=float)


def slack(f_sw: float, f_star: float) -> float:
    return max(f_sw - f_star, 0.0)


def dc_gain(fp: FilterParams, p) -> float:
    """Steady-state frequency for a constant transition vector."""
    return float(np.sum(p)) / (N_DEVICES * fp.T_s)
