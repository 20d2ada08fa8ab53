"""Run configuration read from a sectioned key=value file.

Every key is optional; an empty or missing file gives the default
converter, controller weights and scenarios.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .simulator import ControllerParams, SimConfig, builtin_scenarios
from .plant import SystemParams

SCENARIOS = ("steady", "ramp", "step", "fswstep")
CONTROLLERS = ("ft", "fl")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioParams:
    f_star: float = 250.0
    f_star_high: float = 300.0
    P_low: float = 0.3
    P_high: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams = field(default_factory=SystemParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    T_sim: float = 1e-6
    scenarios: tuple = SCENARIOS
    controllers: tuple = CONTROLLERS
    out: str = "out"
    seed: int = 0

    def sim_config(self) -> SimConfig:
        return SimConfig(self.system, self.controller, self.T_sim)

    def scenario_table(self):
        s = self.scenario
        return builtin_scenarios(self.system, f_star=s.f_star, P_low=s.P_low,
                                 P_high=s.P_high, f_star_high=s.f_star_high)


def _coerce(cls, section: str, items: dict):
    """Build dataclass ``cls`` from string items, rejecting unknown keys."""
    types = {f.name: f.type for f in fields(cls) if f.init}
    kw = {}
    for key, raw in items.items():
        if key not in types:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        kind = types[key]
        try:
            if kind in (bool, "bool"):
                kw[key] = configparser.ConfigParser.BOOLEAN_STATES[raw.strip().lower()]
            elif kind in (int, "int"):
                kw[key] = int(raw)
            else:
                kw[key] = float(raw)
        except (KeyError, ValueError):
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind}") from None
    try:
        return cls(**kw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _choices(raw: str, allowed, what: str) -> tuple:
    names = tuple(s.strip() for s in raw.replace(",", " ").split() if s.strip())
    if names in (("all",), ("both",)):
        return tuple(allowed)
    bad = [n for n in names if n not in allowed]
    if bad or not names:
        raise ConfigError(f"unknown {what}: {', '.join(bad) or raw!r}")
    return names


def parse_config(text: str = "") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys such as T_s and V_dc are case sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(cp.sections()) - {"system", "controller", "scenario", "output"}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    def sec(name):
        return dict(cp.items(name)) if cp.has_section(name) else {}

    system = _coerce(SystemParams, "system", sec("system"))
    controller = _coerce(ControllerParams, "controller", sec("controller"))
    scen = sec("scenario")
    run = {}
    if "name" in scen:
        run["scenarios"] = _choices(scen.pop("name"), SCENARIOS, "scenario")
    if "controller" in scen:
        run["controllers"] = _choices(scen.pop("controller"), CONTROLLERS, "controller")
    if "T_sim" in scen:
        try:
            run["T_sim"] = float(scen.pop("T_sim"))
        except ValueError:
            raise ConfigError("[scenario] T_sim must be a number") from None
    scenario = _coerce(ScenarioParams, "scenario", scen)
    output = sec("output")
    if "dir" in output:
        run["out"] = output.pop("dir")
    if "seed" in output:
        try:
            run["seed"] = int(output.pop("seed"))
        except ValueError:
            raise ConfigError("[output] seed must be an integer") from None
    if output:
        raise ConfigError(f"[output] unknown key(s): {', '.join(sorted(output))}")
    cfg = RunConfig(system, controller, scenario, **run)
    try:
        cfg.sim_config().substeps
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: Optional[str] = None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def override(cfg: RunConfig, **kw) -> RunConfig:
    """Replace run-level fields, skipping ``None`` values."""
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
