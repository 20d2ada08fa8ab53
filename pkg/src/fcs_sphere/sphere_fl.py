"""Sphere decoder for the frequency-limiting controller.

The search vector stacks ``[u_a, u_b, u_c, s]`` per horizon step, where
``s`` is the slack of the switching-frequency limit one step later.  Slack
entries are not free: each is fixed by rolling the frequency filter along
the switch positions chosen so far.  Future slack cost can optionally be
bounded from below by letting the filter decay with no further switching.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .horizon import HorizonProblem, ils_cost
from .plant import SWITCH_LEVELS
from .sphere_ft import DecodeResult, shift_sequence, switch_sequence
from .swfreq import filter_matrices

# Relative slack on the pruning bound; keeps it admissible under rounding.
BOUND_MARGIN = 1e-9


@dataclass(frozen=True)
class SlackContext:
    """Filter data for evaluating slacks along a branch.

    ``C_sw`` and ``f_star`` are already divided by the problem's frequency
    base, so slacks come out in cost units.
    """
    A_sw: np.ndarray
    B_sw: np.ndarray
    C_sw: np.ndarray
    x_sw_init: np.ndarray
    f_star: float
    u_prev: np.ndarray
    lambda_sw: float
    powers: np.ndarray  # row n holds C_sw @ A_sw**n, n = 0 .. N_p

    @classmethod
    def build(cls, problem: HorizonProblem, x_sw, f_star: float, u_prev) -> "SlackContext":
        A, B, C = filter_matrices(problem.filt)
        C = C / problem.f_base
        rows = [C[0]]
        for _ in range(problem.N_p):
            rows.append(rows[-1] @ A)
        return cls(A, B, C, np.asarray(x_sw, dtype=float), float(f_star) / problem.f_base,
                   np.asarray(u_prev, dtype=int), problem.lambda_sw, np.array(rows))


def slack_eval(ctx: SlackContext, x_sw, u, u_prev):
    """Advance the filter by one switching step; return ``(x_sw_next, slack)``."""
    p = np.abs(np.asarray(u, dtype=float) - np.asarray(u_prev, dtype=float))
    x_next = ctx.A_sw @ np.asarray(x_sw, dtype=float) + ctx.B_sw @ p
    return x_next, max(float(ctx.C_sw[0] @ x_next) - ctx.f_star, 0.0)


def prop1_bound(ctx: SlackContext, x_sw, remaining: int, lambda_sw: Optional[float] = None) -> float:
    """Slack cost of the next ``remaining`` steps if no device switches again.

    A lower bound on the true future slack cost for any future switching,
    since transitions only ever add to the filter state.
    """
    if remaining <= 0:
        return 0.0
    lam = ctx.lambda_sw if lambda_sw is None else lambda_sw
    if remaining >= len(ctx.powers):
        A = ctx.A_sw
        rows = [ctx.C_sw[0] @ np.linalg.matrix_power(A, n) for n in range(1, remaining + 1)]
        f = np.array(rows) @ np.asarray(x_sw, dtype=float)
    else:
        f = ctx.powers[1:remaining + 1] @ np.asarray(x_sw, dtype=float)
    excess = np.maximum(f - ctx.f_star, 0.0)
    return float(lam * excess @ excess)


def stack_fl(ctx: SlackContext, switches) -> np.ndarray:
    """Full FL search vector with slacks rolled out from ``ctx.x_sw_init``."""
    switches = np.asarray(switches, dtype=int).reshape(-1, 3)
    out = np.zeros((len(switches), 4))
    x, prev = ctx.x_sw_init, ctx.u_prev
    for i, u in enumerate(switches):
        x, s = slack_eval(ctx, x, u, prev)
        out[i, :3] = u
        out[i, 3] = s
        prev = u
    return out.ravel()


def babai_fl(problem: HorizonProblem, U_hat, ctx: SlackContext) -> np.ndarray:
    """Nearest-plane rounding with slack entries evaluated on the way."""
    V = problem.V
    U = np.zeros(problem.dim)
    x, prev = ctx.x_sw_init, ctx.u_prev
    for l in range(problem.dim):
        if l % 4 < 3:
            centre = (U_hat[l] - V[l, :l] @ U[:l]) / V[l, l]
            U[l] = min(max(round(centre), -1), 1)
        else:
            u = U[l - 3:l].astype(int)
            x, U[l] = slack_eval(ctx, x, u, prev)
            prev = u
    return U


def initial_solution_fl(problem: HorizonProblem, U_hat, ctx: SlackContext,
                        previous_opt: Optional[np.ndarray] = None):
    """Warm start: the cheaper of the Babai estimate and the shifted previous optimum."""
    U_ini = babai_fl(problem, U_hat, ctx)
    rho2 = ils_cost(problem, U_hat, U_ini)
    if previous_opt is not None:
        guess = stack_fl(ctx, shift_sequence(switch_sequence(previous_opt, 4)))
        cost = ils_cost(problem, U_hat, guess)
        if cost < rho2:
            U_ini, rho2 = guess, cost
    return U_ini, rho2


def decode_fl(problem: HorizonProblem, U_hat, U_ini, rho2_ini: float,
              ctx: SlackContext, use_bound: bool = True) -> DecodeResult:
    """Depth-first branch and bound over the FL lattice.

    With ``use_bound`` the no-further-switching slack cost is added to the
    partial distance before comparing against the radius; the optimum is
    the same either way, only fewer nodes are visited.
    """
    t0 = time.perf_counter()
    V = problem.V.tolist()
    Uh = [float(v) for v in U_hat]
    n = problem.dim
    N_p = problem.N_p
    (a11, a12), (a21, a22) = ctx.A_sw.tolist()
    b1 = ctx.B_sw[0].tolist()
    b2 = ctx.B_sw[1].tolist()
    c1, c2 = ctx.C_sw[0].tolist()
    f_star = ctx.f_star
    lam = ctx.lambda_sw
    powers = ctx.powers.tolist()
    scale = 1.0 - BOUND_MARGIN

    def bound(x1, x2, remaining):
        total = 0.0
        for i in range(1, remaining + 1):
            e = powers[i][0] * x1 + powers[i][1] * x2 - f_star
            if e > 0.0:
                total += e * e
        return lam * total * scale

    U = [0.0] * n
    best = [float(v) for v in U_ini]
    rho2 = float(rho2_ini)
    nodes = 0

    def search(l, d2, lb, prev, x1, x2):
        nonlocal rho2, nodes, best
        row = V[l]
        partial = Uh[l]
        for i in range(l):
            partial -= row[i] * U[i]
        diag = row[l]
        if l % 4 < 3:
            for u in SWITCH_LEVELS:
                nodes += 1
                r = partial - diag * u
                d = d2 + r * r
                if d + lb < rho2:
                    U[l] = u
                    search(l + 1, d, lb, prev, x1, x2)
            return
        ua, ub, uc = U[l - 3], U[l - 2], U[l - 1]
        pa, pb, pc = abs(ua - prev[0]), abs(ub - prev[1]), abs(uc - prev[2])
        y1 = a11 * x1 + a12 * x2 + b1[0] * pa + b1[1] * pb + b1[2] * pc
        y2 = a21 * x1 + a22 * x2 + b2[0] * pa + b2[1] * pb + b2[2] * pc
        s = c1 * y1 + c2 * y2 - f_star
        if s < 0.0:
            s = 0.0
        step = l // 4
        lb_next = bound(y1, y2, N_p - step - 1) if use_bound else 0.0
        nodes += 1
        r = partial - diag * s
        d = d2 + r * r
        if d + lb_next < rho2:
            U[l] = s
            if l + 1 < n:
                search(l + 1, d, lb_next, (ua, ub, uc), y1, y2)
            else:
                best = U[:]
                rho2 = d

    x1, x2 = (float(v) for v in ctx.x_sw_init)
    lb0 = bound(x1, x2, N_p) if use_bound else 0.0
    search(0, 0.0, lb0, tuple(float(v) for v in ctx.u_prev), x1, x2)
    return DecodeResult(U_opt=np.array(best), cost=rho2, nodes_visited=nodes,
                        elapsed=time.perf_counter() - t0)
