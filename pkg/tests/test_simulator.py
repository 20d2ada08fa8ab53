import numpy as np
import pytest

from fcs_sphere import simulator
from fcs_sphere.plant import SystemParams
from fcs_sphere.simulator import (ControllerParams, Ramp, Scenario, SimConfig, builtin_scenarios,
                                  run_closed_loop, with_bound)


def short(name="short", duration=0.01, P=1.0, f_star=250.0):
    return Scenario(name, duration, Ramp(P), Ramp(0.0), Ramp(f_star), 0.0, duration)


def test_ramp_profiles():
    r = Ramp(0.3, 1.0, 1.0, 2.0)
    assert r(0.5) == 0.3 and r(1.5) == pytest.approx(0.65) and r(2.0) == 1.0
    assert Ramp(2.0)(123.0) == 2.0
    step = Ramp(0.0, 1.0, 0.4, 0.4)
    assert step(0.3999) == 0.0 and step(0.4) == 1.0
    with pytest.raises(ValueError):
        Ramp(0, 1, 2, 1)


def test_builtin_scenarios():
    s = builtin_scenarios()
    assert (s["steady"].t0, s["steady"].t0 + s["steady"].T) == (0.5, 1.5)
    assert s["steady"].duration == 1.5
    assert s["ramp"].t0 == 1.205 and s["ramp"].P(1.205) == 0.3 and s["ramp"].P(1.225) == 1.0
    assert s["step"].P(0.5999) == 0.3 and s["step"].P(0.6) == 1.0
    assert s["fswstep"].t0 == 0.4 and s["fswstep"].T == pytest.approx(0.02)
    assert s["fswstep"].f_star(0.3999) == 250 and s["fswstep"].f_star(0.4) == 300


def test_scenario_window_checked():
    with pytest.raises(ValueError):
        Scenario("x", 1.0, Ramp(1), Ramp(0), Ramp(250), 0.5, 1.0)


def test_substeps_must_divide():
    with pytest.raises(ValueError):
        SimConfig(T_sim=3e-5).substeps


def test_unknown_controller():
    with pytest.raises(ValueError):
        run_closed_loop(short(), "mpc")


@pytest.mark.parametrize("kind", ["ft", "fl"])
def test_zero_grid_zero_reference(kind):
    cfg = SimConfig(system=SystemParams(V_g=0.0))
    tr = run_closed_loop(short(P=0.0, f_star=0.0, duration=0.003), kind, cfg)
    for arr in (tr.i_ref, tr.i, tr.u, tr.p, tr.fsw, tr.i_sub):
        assert not np.any(arr)


@pytest.mark.parametrize("kind", ["ft", "fl"])
def test_trace_invariants(kind):
    sc = short()
    tr = run_closed_loop(sc, kind)
    assert len(tr) == 100
    assert set(np.unique(tr.u)) <= {-1, 0, 1}
    prev = np.vstack([np.zeros((1, 3), int), tr.u[:-1]])
    np.testing.assert_array_equal(tr.p, np.abs(tr.u - prev))
    assert tr.plant_mismatch < 1e-6
    assert tr.i_sub.shape == (100 * 100, 2)
    # control-instant samples are the first sub-sample of each interval
    np.testing.assert_array_equal(tr.i_sub[::100], tr.i)
    assert (tr.nodes > 0).all()


def test_reproducible():
    a = run_closed_loop(short(), "fl")
    b = run_closed_loop(short(), "fl")
    for name in ("t", "i_ref", "i", "u", "p", "fsw", "fsw_visual", "fsw_ref", "nodes", "i_sub"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


@pytest.mark.parametrize("kind", ["ft", "fl"])
def test_applies_first_block_of_optimum(kind, monkeypatch):
    seen = []
    name = "decode_ft" if kind == "ft" else "decode_fl"
    inner = getattr(simulator, name)

    def spy(*args, **kw):
        res = inner(*args, **kw)
        seen.append(res.U_opt[:3].copy())
        return res

    monkeypatch.setattr(simulator, name, spy)
    tr = run_closed_loop(short(duration=0.005), kind)
    np.testing.assert_array_equal(tr.u, np.array(seen))


def test_bound_toggle_same_inputs():
    sc = short(duration=0.02)
    on = run_closed_loop(sc, "fl", with_bound(SimConfig(), True))
    off = run_closed_loop(sc, "fl", with_bound(SimConfig(), False))
    np.testing.assert_array_equal(on.u, off.u)
    assert on.use_bound and not off.use_bound
    assert on.nodes.sum() <= off.nodes.sum()


def test_coarser_plant_sampling():
    cfg = SimConfig(T_sim=1e-5, controller=ControllerParams(N_p=2))
    tr = run_closed_loop(short(), "ft", cfg)
    assert tr.i_sub.shape == (1000, 2)
