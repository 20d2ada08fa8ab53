"""Closed-loop receding-horizon simulation of both controllers."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import horizon
from .horizon import FL, FT
from .plant import SystemParams, clarke, current_reference, discretize, grid_voltage, rotate
from .sphere_fl import SlackContext, decode_fl, initial_solution_fl
from .sphere_ft import decode_ft, initial_solution_ft
from .swfreq import FilterParams, filter_matrices


@dataclass(frozen=True)
class Ramp:
    """``v0`` before ``t_start``, ``v1`` from ``t_end`` on, linear in between.

    ``t_start == t_end`` gives a step; ``v0 == v1`` a constant.
    """
    v0: float
    v1: float = None
    t_start: float = 0.0
    t_end: float = 0.0

    def __post_init__(self):
        if self.v1 is None:
            object.__setattr__(self, "v1", self.v0)
        if self.t_end < self.t_start:
            raise ValueError("ramp must end after it starts")

    def __call__(self, t: float) -> float:
        if t < self.t_start:
            return self.v0
        if t >= self.t_end:
            return self.v1
        frac = (t - self.t_start) / (self.t_end - self.t_start)
        return self.v0 + frac * (self.v1 - self.v0)


STEADY, RAMP, STEP, FSWSTEP = "steady", "ramp", "step", "fswstep"


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    P: Ramp
    Q: Ramp
    f_star: Ramp
    t0: float
    T: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.t0 < 0 or self.t0 + self.T > self.duration + 1e-12:
            raise ValueError(f"measurement window [{self.t0}, {self.t0 + self.T}] "
                             f"exceeds the simulated {self.duration} s")


def builtin_scenarios(params: SystemParams = SystemParams(), f_star: float = 250.0,
                      P_low: float = 0.3, P_high: float = 1.0, f_star_high: float = 300.0):
    period = 1.0 / params.f1
    zero = Ramp(0.0)
    return {
        STEADY: Scenario(STEADY, 1.5, Ramp(P_high), zero, Ramp(f_star), 0.5, 1.0),
        RAMP: Scenario(RAMP, 1.205 + 2 * period, Ramp(P_low, P_high, 1.205, 1.205 + period),
                       zero, Ramp(f_star), 1.205, period),
        STEP: Scenario(STEP, 0.6 + 2 * period, Ramp(P_low, P_high, 0.6, 0.6), zero,
                       Ramp(f_star), 0.6, period),
        FSWSTEP: Scenario(FSWSTEP, 0.4 + 2 * period, Ramp(P_high), zero,
                          Ramp(f_star, f_star_high, 0.4, 0.4), 0.4, period),
    }


@dataclass(frozen=True)
class ControllerParams:
    N_p: int = 5
    lambda_u: float = 13e-3
    lambda_sw: float = 60.0
    f_sw_base: float = 100.0  # Hz; switching frequency enters the cost in these units
    a1: float = 0.99
    a2: float = 0.99
    a1_visual: float = 0.995
    a2_visual: float = 0.995
    use_bound: bool = True


@dataclass(frozen=True)
class SimConfig:
    system: SystemParams = field(default_factory=SystemParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    T_sim: float = 1e-6
    store_substeps: bool = True

    @property
    def substeps(self) -> int:
        n = round(self.system.T_s / self.T_sim)
        if n < 1 or abs(n * self.T_sim - self.system.T_s) > 1e-9 * self.system.T_s:
            raise ValueError("T_s must be an integer multiple of T_sim")
        return n


@dataclass
class SimTrace:
    scenario: str
    controller: str
    use_bound: bool
    T_s: float
    T_sim: float
    f1: float
    t: np.ndarray
    i_ref: np.ndarray        # (n, 2) alpha-beta
    i: np.ndarray            # (n, 2) alpha-beta, sampled at the control instants
    u: np.ndarray            # (n, 3)
    p: np.ndarray            # (n, 3)
    fsw: np.ndarray
    fsw_visual: np.ndarray
    fsw_ref: np.ndarray
    solve_time: np.ndarray   # seconds
    nodes: np.ndarray
    i_sub: Optional[np.ndarray] = None  # (n * substeps, 2) alpha-beta
    plant_mismatch: float = 0.0

    def __len__(self):
        return len(self.t)


def _substep_kernel(config: SimConfig):
    """Decay powers and accumulated gains for the plant samples inside one interval."""
    sub = discretize(config.system, config.T_sim)
    a = sub.decay
    n = config.substeps
    g = a ** np.arange(n + 1)
    h = np.concatenate([[0.0], np.cumsum(g[:-1])])
    return sub, g, h


def run_closed_loop(scenario: Scenario, controller: str, config: SimConfig = SimConfig(),
                    progress=None) -> SimTrace:
    """Simulate one controller on one scenario, one control interval at a time."""
    if controller not in (FT, FL):
        raise ValueError(f"unknown controller {controller!r}")
    sysp, cp = config.system, config.controller
    T_s = sysp.T_s
    fp = FilterParams(cp.a1, cp.a2, T_s)
    fp_vis = FilterParams(cp.a1_visual, cp.a2_visual, T_s)
    A_sw, B_sw, C_sw = filter_matrices(fp)
    Av, Bv, Cv = filter_matrices(fp_vis)
    problem = horizon.assemble(controller, sysp, fp, N_p=cp.N_p,
                               lambda_u=cp.lambda_u, lambda_sw=cp.lambda_sw,
                               f_base=cp.f_sw_base)
    plant = problem.plant
    sub, g, h = _substep_kernel(config)
    n_sub = config.substeps
    N_p = cp.N_p
    n = int(round(scenario.duration / T_s))
    theta = sysp.omega_base * T_s

    rec_t = np.arange(n) * T_s
    rec_iref = np.zeros((n, 2))
    rec_i = np.zeros((n, 2))
    rec_u = np.zeros((n, 3), dtype=int)
    rec_p = np.zeros((n, 3), dtype=int)
    rec_f = np.zeros(n)
    rec_fv = np.zeros(n)
    rec_fref = np.zeros(n)
    rec_time = np.zeros(n)
    rec_nodes = np.zeros(n, dtype=np.int64)
    i_sub = np.zeros((n * n_sub, 2)) if config.store_substeps else None

    def reference(t):
        v_ab = clarke(grid_voltage(sysp, t))
        if not v_ab.any():
            return v_ab, np.zeros(2)
        return v_ab, current_reference(scenario.P(t), scenario.Q(t), v_ab)

    _, i0 = reference(0.0)
    x = i0.copy()
    f0 = scenario.f_star(0.0)
    x_sw = np.array([f0, f0])
    x_vis = x_sw.copy()
    u_prev = np.zeros(3, dtype=int)
    prev_opt = None
    mismatch = 0.0

    for k in range(n):
        t = rec_t[k]
        v_abc = grid_voltage(sysp, t)
        _, i_ref = reference(t)
        f_star = scenario.f_star(t)
        refs = np.array([rotate(i_ref, m * theta) for m in range(1, N_p + 1)])

        t_start = time.perf_counter()
        if controller == FT:
            Y = np.hstack([refs, np.full((N_p, 1), f_star)])
            pt = horizon.linear_term(problem, np.concatenate([x, x_sw]), v_abc, Y, u_prev)
            U_ini, rho2 = initial_solution_ft(problem, pt.U_hat, u_prev, prev_opt)
            res = decode_ft(problem, pt.U_hat, U_ini, rho2, u_prev)
        else:
            ctx = SlackContext.build(problem, x_sw, f_star, u_prev)
            pt = horizon.linear_term(problem, x, v_abc, refs, u_prev)
            U_ini, rho2 = initial_solution_fl(problem, pt.U_hat, ctx, prev_opt)
            res = decode_fl(problem, pt.U_hat, U_ini, rho2, ctx, use_bound=cp.use_bound)
        rec_time[k] = time.perf_counter() - t_start
        rec_nodes[k] = res.nodes_visited
        prev_opt = res.U_opt
        u = res.first_switch
        p = np.abs(u - u_prev)

        rec_iref[k] = i_ref
        rec_i[k] = x
        rec_u[k] = u
        rec_p[k] = p
        rec_f[k] = C_sw[0] @ x_sw
        rec_fv[k] = Cv[0] @ x_vis
        rec_fref[k] = f_star

        # plant samples at T_sim inside the interval; inputs are held constant
        drive = sub.B @ u + sub.D @ v_abc
        if i_sub is not None:
            i_sub[k * n_sub:(k + 1) * n_sub] = g[:n_sub, None] * x + h[:n_sub, None] * drive
        x_fine = g[n_sub] * x + h[n_sub] * drive
        x_coarse = plant.A @ x + plant.B @ u + plant.D @ v_abc
        mismatch = max(mismatch, float(np.max(np.abs(x_fine - x_coarse))))
        x = x_fine

        x_sw = A_sw @ x_sw + B_sw @ p
        x_vis = Av @ x_vis + Bv @ p
        u_prev = u
        if progress is not None:
            progress(k, n)

    return SimTrace(scenario.name, controller, cp.use_bound, T_s, config.T_sim, sysp.f1,
                    rec_t, rec_iref, rec_i, rec_u, rec_p, rec_f, rec_fv, rec_fref,
                    rec_time, rec_nodes, i_sub, mismatch)


def with_bound(config: SimConfig, use_bound: bool) -> SimConfig:
    return replace(config, controller=replace(config.controller, use_bound=use_bound))
