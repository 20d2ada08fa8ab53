"""Command-line front end: ``simulate`` runs scenarios, ``verify`` runs the self-checks."""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import metrics, verify
from .config import CONTROLLERS, SCENARIOS, ConfigError, RunConfig, load_config, override
from .plant import K_INV
from .simulator import run_closed_loop, with_bound

TRACE_HEADER = ("t,i_ref_a,i_ref_b,i_ref_c,i_a,i_b,i_c,u_a,u_b,u_c,"
                "p_a,p_b,p_c,fsw,fsw_visual,fsw_ref,solve_us,nodes")
THREADS_ENV = "FCS_SPHERE_THREADS"


@dataclass(frozen=True)
class Job:
    scenario: str
    controller: str
    use_bound: bool

    @property
    def label(self) -> str:
        return f"{self.scenario}_{self.controller}" + ("" if self.use_bound else "_nobound")


def trace_table(trace) -> np.ndarray:
    """One row per control step, columns as in ``TRACE_HEADER``."""
    return np.column_stack([
        trace.t,
        trace.i_ref @ K_INV.T,
        trace.i @ K_INV.T,
        trace.u,
        trace.p,
        trace.fsw,
        trace.fsw_visual,
        trace.fsw_ref,
        trace.solve_time * 1e6,
        trace.nodes,
    ])


def write_trace(path: Path, trace) -> None:
    np.savetxt(path, trace_table(trace), fmt="%.9g", delimiter=",",
               header=TRACE_HEADER, comments="")


def _run_job(cfg: RunConfig, job: Job):
    scenario = cfg.scenario_table()[job.scenario]
    sim = with_bound(cfg.sim_config(), job.use_bound)
    trace = run_closed_loop(scenario, job.controller, sim)
    write_trace(Path(cfg.out) / f"trace_{job.label}.csv", trace)
    return job, metrics.evaluate(trace, scenario.t0, scenario.T)


def worker_count(n_jobs: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1")
    return max(1, min(cap, n_jobs))


def plan(cfg: RunConfig, compare_bound: bool):
    jobs = []
    for s in cfg.scenarios:
        for c in cfg.controllers:
            jobs.append(Job(s, c, cfg.controller.use_bound))
            if compare_bound and c == "fl" and cfg.controller.use_bound:
                jobs.append(Job(s, c, False))
    return jobs


def run_jobs(cfg: RunConfig, jobs, log=print):
    workers = worker_count(len(jobs))
    results = {}
    if workers == 1:
        for job in jobs:
            t0 = time.perf_counter()
            _, m = _run_job(cfg, job)
            results[job] = m
            log(f"{job.label}: done in {time.perf_counter() - t0:.1f} s")
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_job, cfg, job) for job in jobs]
        for fut in futures:
            job, m = fut.result()
            results[job] = m
            log(f"{job.label}: done")
    return results


SUMMARY_FIELDS = ("tdd", "e_I2", "e_I", "f_sw_avg", "time_total", "time_max", "time_p70",
                  "time_p95", "nodes_p70", "nodes_p95", "nodes_max", "nodes_total")


def summary_rows(results):
    """Rows of the summary, with no-bound runs folded into the matching FL row."""
    rows = []
    for job, m in results.items():
        if not job.use_bound and Job(job.scenario, job.controller, True) in results:
            continue
        row = {"scenario": job.scenario, "controller": job.controller,
               "bound": int(job.use_bound), **{k: getattr(m, k) for k in SUMMARY_FIELDS}}
        twin = results.get(Job(job.scenario, job.controller, False)) if job.use_bound else None
        if twin is not None:
            row["nodes_p95_nobound"] = twin.nodes_p95
            row["nodes_p95_ratio"] = m.nodes_p95 / max(twin.nodes_p95, 1)
            row["time_p95_nobound"] = twin.time_p95
        rows.append(row)
    order = {s: i for i, s in enumerate(SCENARIOS)}
    rows.sort(key=lambda r: (order[r["scenario"]], r["controller"]))
    return rows


def format_tables(rows) -> str:
    compare = any("nodes_p95_nobound" in r for r in rows)
    head = (f"{'scenario':<9}{'ctrl':<5}{'TDD %':>8}{'e_I2 %':>9}{'e_I %':>8}{'fsw Hz':>9}"
            f"{'t70 ms':>9}{'t95 ms':>9}{'tmax ms':>9}{'n70':>7}{'n95':>7}{'nmax':>8}")
    if compare:
        head += f"{'n95 nb':>9}{'ratio':>7}"
    lines = [head, "-" * len(head)]
    for r in rows:
        line = (f"{r['scenario']:<9}{r['controller']:<5}{r['tdd']:>8.2f}{r['e_I2']:>9.3f}"
                f"{r['e_I']:>8.2f}{r['f_sw_avg']:>9.1f}{r['time_p70'] * 1e3:>9.3f}"
                f"{r['time_p95'] * 1e3:>9.3f}{r['time_max'] * 1e3:>9.3f}"
                f"{r['nodes_p70']:>7d}{r['nodes_p95']:>7d}{r['nodes_max']:>8d}")
        if "nodes_p95_nobound" in r:
            line += f"{r['nodes_p95_nobound']:>9d}{r['nodes_p95_ratio']:>7.2f}"
        lines.append(line)
    return "\n".join(lines)


def write_summary(out: Path, rows, cfg: RunConfig) -> None:
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in r.items()})
    kv = [f"seed={cfg.seed}", f"T_sim={cfg.T_sim:.9g}", f"f_sw_base={cfg.controller.f_sw_base:.9g}"]
    for r in rows:
        prefix = f"{r['scenario']}.{r['controller']}"
        kv += [f"{prefix}.{k}={v:.9g}" if isinstance(v, float) else f"{prefix}.{k}={v}"
               for k, v in r.items() if k not in ("scenario", "controller")]
    (out / "summary.txt").write_text(format_tables(rows) + "\n\n" + "\n".join(kv) + "\n")


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_jobs(cfg, plan(cfg, args.no_bound), log=lambda s: print(s, file=sys.stderr))
    rows = summary_rows(results)
    write_summary(out, rows, cfg)
    print(format_tables(rows))
    print(f"\nwrote traces and summary to {out}")
    return 0


def cmd_verify(args) -> int:
    cfg = _resolve(args)
    results = verify.run_all(cfg.seed, oracle_count=args.oracle_count, perturb=args.perturb_hessian,
                             controller=cfg.controller)
    print(f"verify seed={cfg.seed}")
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print("all suites passed" if not failed else f"failed: {', '.join(failed)}")
    return 1 if failed else 0


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    scen = None
    if args.scenario is not None:
        scen = SCENARIOS if args.scenario == "all" else (args.scenario,)
    ctrl = None
    if args.controller is not None:
        ctrl = CONTROLLERS if args.controller == "both" else (args.controller,)
    return override(cfg, scenarios=scen, controllers=ctrl, out=args.out, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="sectioned key=value configuration file")
    common.add_argument("--scenario", choices=SCENARIOS + ("all",))
    common.add_argument("--controller", choices=CONTROLLERS + ("both",))
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="seed for the verification suites")

    parser = argparse.ArgumentParser(prog="fcs-sphere",
                                     description="Sphere-decoding FCS-MPC for a grid-tied 3L-NPC converter.")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="run closed-loop scenarios")
    sim.add_argument("--no-bound", action="store_true",
                     help="also run FL without the slack lower bound and compare node counts")
    sim.set_defaults(func=cmd_simulate)
    ver = sub.add_parser("verify", parents=[common], help="run the self-check suites")
    ver.add_argument("--oracle-count", type=int, default=200, metavar="N",
                     help="random instances per horizon in the oracle suite (default 200)")
    ver.add_argument("--perturb-hessian", type=float, default=None, help=argparse.SUPPRESS)
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fcs-sphere: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
