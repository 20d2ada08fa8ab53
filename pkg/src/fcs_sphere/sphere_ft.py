"""Sphere decoder for the frequency-tracking controller.

The search vector stacks ``[u_a, u_b, u_c, p_a, p_b, p_c]`` per horizon
step.  Switch entries branch over {-1, 0, 1}; each ``p`` entry has the single
admissible value ``|u - u_prev|`` for its phase.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .horizon import HorizonProblem, ils_cost
from .plant import SWITCH_LEVELS


@dataclass
class DecodeResult:
    U_opt: np.ndarray
    cost: float
    nodes_visited: int
    elapsed: float

    @property
    def first_switch(self) -> np.ndarray:
        return self.U_opt[:3].astype(int)


def switch_sequence(U, step_size: int) -> np.ndarray:
    """Switch positions per step, shape ``(N_p, 3)``."""
    return np.rint(np.asarray(U).reshape(-1, step_size)[:, :3]).astype(int)


def stack_ft(switches, u_prev) -> np.ndarray:
    """Full FT search vector from a switch sequence, with ``p = |du|`` imposed."""
    switches = np.asarray(switches, dtype=int).reshape(-1, 3)
    prev = np.vstack([np.asarray(u_prev, dtype=int).reshape(1, 3), switches[:-1]])
    return np.hstack([switches, np.abs(switches - prev)]).astype(float).ravel()


def shift_sequence(switches) -> np.ndarray:
    """Drop the applied step and repeat the last one."""
    switches = np.asarray(switches, dtype=int).reshape(-1, 3)
    return np.vstack([switches[1:], switches[-1:]])


def babai_ft(problem: HorizonProblem, U_hat, u_prev) -> np.ndarray:
    """Nearest-plane rounding of the unconstrained solution, kept feasible."""
    V = problem.V
    n = problem.dim
    U = np.zeros(n)
    prev = [int(v) for v in u_prev]
    for l in range(n):
        j = l % 6
        if j < 3:
            centre = (U_hat[l] - V[l, :l] @ U[:l]) / V[l, l]
            U[l] = min(max(round(centre), -1), 1)
        else:
            U[l] = abs(U[l - 3] - prev[j - 3])
            if j == 5:
                prev = [int(U[l - 5]), int(U[l - 4]), int(U[l - 3])]
    return U


def initial_solution_ft(problem: HorizonProblem, U_hat, u_prev,
                        previous_opt: Optional[np.ndarray] = None):
    """Warm start: the cheaper of the Babai estimate and the shifted previous optimum."""
    U_ini = babai_ft(problem, U_hat, u_prev)
    rho2 = ils_cost(problem, U_hat, U_ini)
    if previous_opt is not None:
        guess = stack_ft(shift_sequence(switch_sequence(previous_opt, 6)), u_prev)
        cost = ils_cost(problem, U_hat, guess)
        if cost < rho2:
            U_ini, rho2 = guess, cost
    return U_ini, rho2


def tree_size_ft(N_p: int) -> int:
    """Number of nodes of the full FT search tree (root excluded)."""
    total, width = 0, 1
    for l in range(6 * N_p):
        if l % 6 < 3:
            width *= 3
        total += width
    return total


def decode_ft(problem: HorizonProblem, U_hat, U_ini, rho2_ini: float, u_prev) -> DecodeResult:
    """Depth-first branch and bound over the FT lattice.

    Returns the incumbent ``U_ini`` unchanged if nothing strictly cheaper
    than ``rho2_ini`` exists.
    """
    t0 = time.perf_counter()
    V = problem.V.tolist()
    Uh = [float(v) for v in U_hat]
    n = problem.dim
    U = [0.0] * n
    best = [float(v) for v in U_ini]
    rho2 = float(rho2_ini)
    nodes = 0

    def search(l, d2, prev):
        nonlocal rho2, nodes, best
        row = V[l]
        partial = Uh[l]
        for i in range(l):
            partial -= row[i] * U[i]
        diag = row[l]
        j = l % 6
        if j < 3:
            cands = SWITCH_LEVELS
        else:
            cands = (abs(U[l - 3] - prev[j - 3]),)
        if j == 5:
            nxt = (U[l - 5], U[l - 4], U[l - 3])
        else:
            nxt = prev
        for u in cands:
            nodes += 1
            r = partial - diag * u
            d = d2 + r * r
            if d < rho2:
                U[l] = u
                if l + 1 < n:
                    search(l + 1, d, nxt)
                else:
                    best = U[:]
                    rho2 = d

    search(0, 0.0, tuple(float(v) for v in u_prev))
    return DecodeResult(U_opt=np.array(best), cost=rho2, nodes_visited=nodes,
                        elapsed=time.perf_counter() - t0)
