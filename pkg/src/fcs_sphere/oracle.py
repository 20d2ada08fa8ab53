"""Exhaustive reference solvers that never touch the full-horizon matrices.

Every switch sequence is rolled out through the plant and filter one step at
a time and the stage costs are summed directly.  Sequences are enumerated
in lexicographic order over {-1, 0, 1}; ties go to the first one.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .horizon import FL, FT, HorizonProblem
from .swfreq import filter_matrices

MAX_HORIZON = 4


@dataclass
class OracleResult:
    U_opt: np.ndarray
    cost: float
    evaluated_count: int


@lru_cache(maxsize=None)
def all_sequences(N_p: int) -> np.ndarray:
    """Every switch sequence, shape ``(3**(3 N_p), N_p, 3)``."""
    seqs = np.array(list(itertools.product((-1, 0, 1), repeat=3 * N_p)), dtype=int)
    seqs = seqs.reshape(-1, N_p, 3)
    seqs.setflags(write=False)
    return seqs


def _rollout(problem: HorizonProblem, kind: str, seqs, x_ph, x_sw, v_g, i_ref, f_ref, u_prev):
    """Stage-cost sums for a batch of sequences ``(M, N_p, 3)``.

    ``f_ref`` is in Hz; frequencies and slacks are costed in units of the
    problem's frequency base.
    """
    seqs = np.asarray(seqs, dtype=float)
    M, N_p, _ = seqs.shape
    # elementwise arithmetic only: a sequence costs the same bits in any batch
    A, B, D = problem.plant.A, problem.plant.B, problem.plant.D
    A_sw, B_sw, C_sw = filter_matrices(problem.filt)
    dv = D @ np.asarray(v_g, dtype=float)
    x1 = np.full(M, float(x_ph[0]))
    x2 = np.full(M, float(x_ph[1]))
    s1 = np.full(M, float(x_sw[0]))
    s2 = np.full(M, float(x_sw[1]))
    prev = [np.full(M, float(v)) for v in u_prev]
    cost = np.zeros(M)
    slacks = np.zeros((M, N_p))
    f_ref = np.asarray(f_ref, dtype=float) / problem.f_base
    for l in range(N_p):
        u = [seqs[:, l, j] for j in range(3)]
        du = [u[j] - prev[j] for j in range(3)]
        x1, x2 = (A[0, 0] * x1 + A[0, 1] * x2 + B[0, 0] * u[0] + B[0, 1] * u[1] + B[0, 2] * u[2] + dv[0],
                  A[1, 0] * x1 + A[1, 1] * x2 + B[1, 0] * u[0] + B[1, 1] * u[1] + B[1, 2] * u[2] + dv[1])
        p = [np.abs(d) for d in du]
        s1, s2 = (A_sw[0, 0] * s1 + A_sw[0, 1] * s2 + B_sw[0, 0] * p[0] + B_sw[0, 1] * p[1] + B_sw[0, 2] * p[2],
                  A_sw[1, 0] * s1 + A_sw[1, 1] * s2 + B_sw[1, 0] * p[0] + B_sw[1, 1] * p[1] + B_sw[1, 2] * p[2])
        f = (C_sw[0, 0] * s1 + C_sw[0, 1] * s2) / problem.f_base
        e1 = i_ref[l][0] - x1
        e2 = i_ref[l][1] - x2
        cost += e1 * e1 + e2 * e2 + problem.lambda_u * (du[0] * du[0] + du[1] * du[1] + du[2] * du[2])
        if kind == FT:
            ef = f_ref[l] - f
            cost += problem.lambda_sw * ef * ef
        else:
            sl = np.maximum(f - f_ref[l], 0.0)
            slacks[:, l] = sl
            cost += problem.lambda_sw * sl * sl
        prev = u
    return cost, slacks


def _stack(kind, seq, u_prev, slacks):
    seq = np.asarray(seq, dtype=float)
    if kind == FT:
        prev = np.vstack([np.asarray(u_prev, dtype=float)[None, :3], seq[:-1]])
        return np.hstack([seq, np.abs(seq - prev)]).ravel()
    return np.hstack([seq, np.asarray(slacks)[:, None]]).ravel()


def _check_horizon(problem):
    if problem.N_p > MAX_HORIZON:
        raise ValueError(f"exhaustive search is limited to N_p <= {MAX_HORIZON}")


def enumerate_ft(problem: HorizonProblem, x_T, v_g, Y_star, u_prev) -> OracleResult:
    """Minimise the tracking cost over all switch sequences.

    ``x_T`` is ``[i_alpha, i_beta, x_sw1, x_sw2]``; ``Y_star`` has rows
    ``[i_alpha*, i_beta*, f_sw*]`` for steps k+1 .. k+N_p.
    """
    _check_horizon(problem)
    x_T = np.asarray(x_T, dtype=float)
    Y = np.asarray(Y_star, dtype=float).reshape(problem.N_p, 3)
    seqs = all_sequences(problem.N_p)
    cost, _ = _rollout(problem, FT, seqs, x_T[:2], x_T[2:], v_g, Y[:, :2], Y[:, 2], np.asarray(u_prev)[:3])
    best = int(np.argmin(cost))
    return OracleResult(_stack(FT, seqs[best], u_prev, None), float(cost[best]), len(seqs))


def enumerate_fl(problem: HorizonProblem, x_S, x_sw, v_g, Y_star, u_prev, f_star) -> OracleResult:
    """Minimise the limiting cost over all switch sequences.

    ``Y_star`` has rows ``[i_alpha*, i_beta*]`` for steps k+1 .. k+N_p.
    """
    _check_horizon(problem)
    Y = np.asarray(Y_star, dtype=float).reshape(problem.N_p, 2)
    f_ref = np.full(problem.N_p, float(f_star))
    seqs = all_sequences(problem.N_p)
    cost, slacks = _rollout(problem, FL, seqs, x_S, x_sw, v_g, Y, f_ref, np.asarray(u_prev)[:3])
    best = int(np.argmin(cost))
    return OracleResult(_stack(FL, seqs[best], u_prev, slacks[best]), float(cost[best]), len(seqs))


def rollout_cost(problem: HorizonProblem, sequence, x_ph, x_sw, v_g, Y_star, u_prev,
                 f_star=None) -> float:
    """Stage-cost sum of a single switch sequence ``(N_p, 3)``.

    For frequency tracking ``Y_star`` rows carry the frequency reference in
    the third column; for limiting pass ``f_star`` separately.
    """
    seq = np.asarray(sequence, dtype=float).reshape(1, problem.N_p, 3)
    if problem.kind == FT:
        Y = np.asarray(Y_star, dtype=float).reshape(problem.N_p, 3)
        i_ref, f_ref = Y[:, :2], Y[:, 2]
    else:
        i_ref = np.asarray(Y_star, dtype=float).reshape(problem.N_p, 2)
        f_ref = np.full(problem.N_p, float(f_star))
    cost, _ = _rollout(problem, problem.kind, seq, x_ph, x_sw, v_g, i_ref, f_ref,
                       np.asarray(u_prev, dtype=float)[:3])
    return float(cost[0])
