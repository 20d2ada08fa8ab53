"""Performance figures computed from a simulation trace."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .plant import K_INV

I_NOMINAL_PEAK = 1.0  # pu


@dataclass
class Metrics:
    tdd: float        # %
    e_I2: float       # %
    e_I: float        # %, square root of the above
    f_sw_avg: float   # Hz
    time_total: float
    time_max: float
    time_p70: float
    time_p95: float
    nodes_max: int
    nodes_p70: int
    nodes_p95: int
    nodes_total: int

    def as_dict(self):
        return asdict(self)


def _window_mask(t, t0, T, dt):
    # half-open [t0, t0 + T) on the sample grid
    start = int(round(t0 / dt))
    stop = int(round((t0 + T) / dt))
    idx = np.rint(np.asarray(t) / dt).astype(np.int64)
    return (idx >= start) & (idx < stop)


def harmonic_distortion(samples_abc: np.ndarray, periods: int,
                        nominal_peak: float = I_NOMINAL_PEAK) -> float:
    """Distortion of phase currents over an integer number of fundamental periods, in %.

    Every DFT bin except the fundamental counts as distortion; the result is
    normalised by the rms of the nominal current and averaged over phases.
    """
    x = np.atleast_2d(np.asarray(samples_abc, dtype=float))
    if x.shape[0] != 3 and x.shape[1] == 3:
        x = x.T
    N = x.shape[1]
    X = np.fft.rfft(x, axis=1) / N
    power = np.abs(X) ** 2
    # one-sided spectrum: every bin except DC and Nyquist carries two mirrored halves
    power[:, 1:] *= 2.0
    if N % 2 == 0:
        power[:, -1] /= 2.0
    distortion = power.sum(axis=1) - power[:, periods]
    i_nom_rms = nominal_peak / math.sqrt(2.0)
    return float(np.mean(np.sqrt(np.maximum(distortion, 0.0)) / i_nom_rms) * 100.0)


def tdd(trace, t0: float, T: float) -> float:
    """Current TDD in % from the plant-resolution samples of ``trace``."""
    periods = T * trace.f1
    if abs(periods - round(periods)) > 1e-6:
        raise ValueError("TDD window must span an integer number of fundamental periods")
    if trace.i_sub is None:
        raise ValueError("trace has no plant-resolution samples")
    n_sub = int(round(trace.T_s / trace.T_sim))
    t_sub = np.arange(len(trace.i_sub)) * trace.T_sim
    mask = _window_mask(t_sub, t0, T, trace.T_sim)
    if mask.sum() != int(round(T / trace.T_sim)):
        raise ValueError("TDD window lies outside the trace")
    abc = trace.i_sub[mask] @ K_INV.T
    return harmonic_distortion(abc, int(round(periods)))


def tracking_error(trace, t0: float, T: float) -> float:
    """Time-averaged squared current error over the window, scaled by 1/sqrt(2), in %."""
    mask = _window_mask(trace.t, t0, T, trace.T_s)
    if not mask.any():
        raise ValueError("empty measurement window")
    err = trace.i_ref[mask] - trace.i[mask]
    integral = float(np.sum(err * err)) * trace.T_s
    return integral / (math.sqrt(2.0) * T) * 100.0


def avg_fsw(trace, t0: float, T: float) -> float:
    mask = _window_mask(trace.t, t0, T, trace.T_s)
    if not mask.any():
        raise ValueError("empty measurement window")
    return float(np.mean(trace.fsw[mask]))


def nearest_rank(values, pct: float):
    v = np.sort(np.asarray(values))
    if v.size == 0:
        raise ValueError("no samples")
    rank = max(1, math.ceil(pct / 100.0 * v.size))
    return v[rank - 1]


def timing_stats(trace) -> dict:
    if len(trace.solve_time) == 0:
        raise ValueError("empty trace")
    st, nd = trace.solve_time, trace.nodes
    return {
        "time_total": float(st.sum()),
        "time_max": float(st.max()),
        "time_p70": float(nearest_rank(st, 70)),
        "time_p95": float(nearest_rank(st, 95)),
        "nodes_total": int(nd.sum()),
        "nodes_max": int(nd.max()),
        "nodes_p70": int(nearest_rank(nd, 70)),
        "nodes_p95": int(nearest_rank(nd, 95)),
    }


def evaluate(trace, t0: float, T: float) -> Metrics:
    e2 = tracking_error(trace, t0, T)
    return Metrics(
        tdd=tdd(trace, t0, T) if trace.i_sub is not None else float("nan"),
        e_I2=e2,
        e_I=math.sqrt(e2 / 100.0) * 100.0,
        f_sw_avg=avg_fsw(trace, t0, T),
        **timing_stats(trace),
    )
