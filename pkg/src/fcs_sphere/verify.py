"""Self-check suites run by ``fcs-sphere verify``.

Each suite draws its own random instances from a seeded generator, so a
report is reproducible from its seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import horizon, oracle
from .horizon import FL, FT
from .plant import SystemParams, grid_voltage
from .simulator import ControllerParams
from .sphere_fl import (SlackContext, decode_fl, initial_solution_fl, prop1_bound, slack_eval,
                        stack_fl)
from .sphere_ft import decode_ft, initial_solution_ft, switch_sequence
from .swfreq import FilterParams, dc_gain, filter_matrices, step_filter

ORACLE_TOL = 1e-9
RESIDUAL_TOL = 1e-10
FORM_VAR_TOL = 1e-16
DC_TOL = 1e-3  # Hz
BOUND_REL_TOL = 1e-12


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class Instance:
    """One control step: measured states, grid voltage and references."""
    x_ph: np.ndarray
    x_sw: np.ndarray
    v_g: np.ndarray
    u_prev: np.ndarray
    i_ref: np.ndarray   # (N_p, 2)
    f_star: float

    def y_ft(self) -> np.ndarray:
        return np.hstack([self.i_ref, np.full((len(self.i_ref), 1), self.f_star)])


def random_instance(rng: np.random.Generator, N_p: int,
                    params: SystemParams = SystemParams()) -> Instance:
    theta = rng.uniform(0.0, 2.0 * math.pi)
    mag = rng.uniform(0.0, 1.2)
    step = params.omega_base * params.T_s
    i_ref = np.array([[mag * math.cos(theta + m * step), mag * math.sin(theta + m * step)]
                      for m in range(1, N_p + 1)])
    return Instance(
        x_ph=rng.uniform(-1.2, 1.2, 2),
        x_sw=rng.uniform(100.0, 400.0, 2),
        v_g=grid_voltage(params, rng.uniform(0.0, 1.0 / params.f1)),
        u_prev=rng.integers(-1, 2, 3),
        i_ref=i_ref,
        f_star=float(rng.uniform(150.0, 350.0)),
    )


def solve_ft(problem, inst: Instance):
    x = np.concatenate([inst.x_ph, inst.x_sw])
    pt = horizon.linear_term(problem, x, inst.v_g, inst.y_ft(), inst.u_prev)
    U_ini, rho2 = initial_solution_ft(problem, pt.U_hat, inst.u_prev)
    return decode_ft(problem, pt.U_hat, U_ini, rho2, inst.u_prev)


def solve_fl(problem, inst: Instance, use_bound: bool = True):
    ctx = SlackContext.build(problem, inst.x_sw, inst.f_star, inst.u_prev)
    pt = horizon.linear_term(problem, inst.x_ph, inst.v_g, inst.i_ref, inst.u_prev)
    U_ini, rho2 = initial_solution_fl(problem, pt.U_hat, ctx)
    return decode_fl(problem, pt.U_hat, U_ini, rho2, ctx, use_bound=use_bound)


def instance_cost(problem, inst: Instance, switches) -> float:
    """Stage-cost sum of ``switches`` on ``inst``, by rollout."""
    if problem.kind == FT:
        return oracle.rollout_cost(problem, switches, inst.x_ph, inst.x_sw, inst.v_g,
                                   inst.y_ft(), inst.u_prev)
    return oracle.rollout_cost(problem, switches, inst.x_ph, inst.x_sw, inst.v_g,
                               inst.i_ref, inst.u_prev, inst.f_star)


def _perturbation(dim: int, eps: Optional[float]):
    return None if eps is None else eps * np.eye(dim)


def check_oracle(rng, count: int = 200, horizons=(1, 2), f_base: float = 100.0,
                 perturb: Optional[float] = None) -> SuiteResult:
    """Both decoders against exhaustive search, compared by rollout cost."""
    sysp, fp = SystemParams(), FilterParams()
    worst, failures = 0.0, 0
    for N_p in horizons:
        problems = {
            kind: horizon.assemble(kind, sysp, fp, N_p=N_p, f_base=f_base,
                                   hessian_perturbation=_perturbation(
                                       horizon.STEP_SIZE[kind] * N_p, perturb))
            for kind in (FT, FL)
        }
        for _ in range(count):
            inst = random_instance(rng, N_p, sysp)
            pairs = (
                (problems[FT], solve_ft(problems[FT], inst),
                 oracle.enumerate_ft(problems[FT], np.concatenate([inst.x_ph, inst.x_sw]),
                                     inst.v_g, inst.y_ft(), inst.u_prev)),
                (problems[FL], solve_fl(problems[FL], inst),
                 oracle.enumerate_fl(problems[FL], inst.x_ph, inst.x_sw, inst.v_g,
                                     inst.i_ref, inst.u_prev, inst.f_star)),
            )
            for problem, res, ref in pairs:
                cost = instance_cost(problem, inst, switch_sequence(res.U_opt, problem.step_size))
                gap = abs(cost - ref.cost)
                worst = max(worst, gap)
                failures += gap > ORACLE_TOL
    n = 2 * count * len(horizons)
    return SuiteResult("oracle-equivalence", failures == 0,
                       f"{n - failures}/{n} decodes match, worst gap {worst:.3g}")


def future_slack_cost(ctx: SlackContext, x_sw, u_prev, switches) -> float:
    """Slack cost of rolling the filter along ``switches``."""
    total, x, prev = 0.0, x_sw, u_prev
    for u in switches:
        x, s = slack_eval(ctx, x, u, prev)
        total += s * s
        prev = u
    return ctx.lambda_sw * total


def check_prop1(rng, count: int = 1000) -> SuiteResult:
    """Lower bound never exceeds the slack cost of a random future."""
    sysp = SystemParams()
    violations, tight = 0, 0
    for _ in range(count):
        fp = FilterParams(rng.uniform(0.9, 0.999), rng.uniform(0.9, 0.999), sysp.T_s)
        problem = horizon.assemble_fl(sysp, fp, N_p=5, lambda_sw=rng.uniform(1.0, 200.0))
        x_sw = rng.uniform(0.0, 600.0, 2)
        f_star = rng.uniform(100.0, 400.0)
        u_prev = rng.integers(-1, 2, 3)
        ctx = SlackContext.build(problem, x_sw, f_star, u_prev)
        remaining = int(rng.integers(0, 6))
        switches = rng.integers(-1, 2, (remaining, 3))
        if rng.random() < 0.2:  # the no-switching future makes the bound tight
            switches[:] = u_prev
        lb = prop1_bound(ctx, ctx.x_sw_init, remaining)
        J = future_slack_cost(ctx, ctx.x_sw_init, u_prev, switches)
        violations += lb > J * (1.0 + BOUND_REL_TOL) + 1e-300
        tight += lb > 0 and math.isclose(lb, J, rel_tol=1e-9)
    return SuiteResult("prop1-admissibility", violations == 0,
                       f"{violations} violations in {count} draws ({tight} tight)")


def check_factorization(rng, draws: int = 50, form_samples: int = 100,
                        perturb: Optional[float] = None) -> SuiteResult:
    """V'V reproduces H, and the ILS objective tracks the rollout cost up to a constant."""
    worst_res, worst_var, failures = 0.0, 0.0, 0
    for _ in range(draws):
        sysp = SystemParams(R=rng.uniform(0.0, 0.05), L=rng.uniform(0.1, 0.5),
                            V_dc=rng.uniform(1.5, 2.5))
        fp = FilterParams(rng.uniform(0.9, 0.999), rng.uniform(0.9, 0.999), sysp.T_s)
        N_p = int(rng.integers(1, 6))
        kw = dict(N_p=N_p, lambda_u=rng.uniform(1e-3, 0.1), lambda_sw=rng.uniform(1.0, 200.0),
                  f_base=rng.choice([100.0, 250.0]))
        inst = random_instance(rng, N_p, sysp)
        for kind in (FT, FL):
            problem = horizon.assemble(kind, sysp, fp, hessian_perturbation=_perturbation(
                horizon.STEP_SIZE[kind] * N_p, perturb), **kw)
            res = np.linalg.norm(problem.V.T @ problem.V - problem.H) / np.linalg.norm(problem.H)
            worst_res = max(worst_res, res)
            var = form_variance(problem, inst, rng, form_samples)
            worst_var = max(worst_var, var)
            failures += (res >= RESIDUAL_TOL) + (var >= FORM_VAR_TOL)
    return SuiteResult("factorization-residual", failures == 0,
                       f"worst residual {worst_res:.3g}, worst form variance {worst_var:.3g}")


def form_variance(problem, inst: Instance, rng, samples: int = 100) -> float:
    """Variance of ILS cost minus rollout cost over random feasible inputs."""
    if problem.kind == FT:
        x = np.concatenate([inst.x_ph, inst.x_sw])
        pt = horizon.linear_term(problem, x, inst.v_g, inst.y_ft(), inst.u_prev)
    else:
        ctx = SlackContext.build(problem, inst.x_sw, inst.f_star, inst.u_prev)
        pt = horizon.linear_term(problem, inst.x_ph, inst.v_g, inst.i_ref, inst.u_prev)
    diffs = []
    for _ in range(samples):
        seq = rng.integers(-1, 2, (problem.N_p, 3))
        if problem.kind == FT:
            prev = np.vstack([inst.u_prev[None, :], seq[:-1]])
            U = np.hstack([seq, np.abs(seq - prev)]).ravel()
        else:
            U = stack_fl(ctx, seq)
        diffs.append(horizon.ils_cost(problem, pt.U_hat, U) - instance_cost(problem, inst, seq))
    return float(np.var(diffs))


def check_dc_gain(rng, count: int = 20) -> SuiteResult:
    """Constant transitions drive the filter to the closed-form frequency."""
    worst = 0.0
    cases = [(FilterParams(), np.ones(3))]
    for _ in range(count):
        fp = FilterParams(rng.uniform(0.0, 0.995), rng.uniform(0.0, 0.995), rng.uniform(2e-5, 5e-4))
        cases.append((fp, rng.integers(0, 3, 3).astype(float)))
    for fp, p in cases:
        x = np.zeros(2)
        steps = int(math.ceil(40.0 / (1.0 - max(fp.a1, fp.a2)))) + 100
        for _ in range(steps):
            x = step_filter(fp, x, p)
        _, _, C = filter_matrices(fp)
        worst = max(worst, abs(float(C[0] @ x) - dc_gain(fp, p)))
    return SuiteResult("filter-dc-gain", worst < DC_TOL,
                       f"{len(cases)} filters, worst error {worst:.3g} Hz")


def run_all(seed: int = 0, oracle_count: int = 200, perturb: Optional[float] = None,
            controller: ControllerParams = ControllerParams()):
    """All suites in a fixed order, each with its own stream derived from ``seed``."""
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    return [
        check_oracle(streams[0], oracle_count, f_base=controller.f_sw_base, perturb=perturb),
        check_prop1(streams[1]),
        check_factorization(streams[2], perturb=perturb),
        check_dc_gain(streams[3]),
    ]
