import numpy as np
import pytest

from fcs_sphere import horizon, oracle
from fcs_sphere.horizon import (augmented_fl, augmented_ft, build_pi_e_ft, build_pi_e_l_fl,
                                build_prediction, assemble_fl, assemble_ft, linear_term,
                                lower_generator)
from fcs_sphere.plant import SystemParams, discretize
from fcs_sphere.sphere_fl import SlackContext, stack_fl
from fcs_sphere.sphere_ft import stack_ft
from fcs_sphere.swfreq import FilterParams, filter_matrices
from fcs_sphere.verify import random_instance

SP, FP = SystemParams(), FilterParams()


def test_augmented_structure():
    plant = discretize(SP)
    A_sw, B_sw, C_sw = filter_matrices(FP)
    T = augmented_ft(plant, FP)
    np.testing.assert_array_equal(T.A[:2, :2], plant.A)
    np.testing.assert_array_equal(T.A[2:, 2:], A_sw)
    np.testing.assert_array_equal(T.B[2:, 3:], B_sw)
    np.testing.assert_array_equal(T.C[2, 2:], C_sw[0])
    np.testing.assert_array_equal(T.D[2:], 0)
    S = augmented_fl(plant)
    assert S.B.shape == (2, 4)
    np.testing.assert_array_equal(S.B[:, 3], 0)


def test_prediction_single_step():
    m = augmented_ft(discretize(SP), FP)
    G, U, P = build_prediction(m, 1)
    np.testing.assert_allclose(G, m.C @ m.A)
    np.testing.assert_allclose(U, m.C @ m.B)
    np.testing.assert_allclose(P, m.C @ m.D)


def test_prediction_second_block():
    m = augmented_ft(discretize(SP), FP)
    _, U, _ = build_prediction(m, 2)
    np.testing.assert_allclose(U[3:6, 0:6], m.C @ m.A @ m.B)
    np.testing.assert_array_equal(U[0:3, 6:12], 0)


def test_prediction_matches_rollout():
    rng = np.random.default_rng(1)
    m = augmented_ft(discretize(SP), FP)
    N = 4
    G, U, P = build_prediction(m, N)
    x, v = rng.normal(size=4), rng.normal(size=3)
    inputs = rng.normal(size=(N, 6))
    Y = G @ x + U @ inputs.ravel() + P @ np.tile(v, N)
    for l in range(N):
        x = m.A @ x + m.B @ inputs[l] + m.D @ v
        np.testing.assert_allclose(Y[3 * l:3 * l + 3], m.C @ x, atol=1e-10)
    with pytest.raises(ValueError):
        build_prediction(m, 0)


def test_pi_e_ft():
    Pi, E = build_pi_e_ft(1)
    np.testing.assert_array_equal(Pi, np.eye(6))
    np.testing.assert_array_equal(E, np.diag([1.0, 1, 1, 0, 0, 0]))  # acts on the 6-entry u_T(k-1)
    rng = np.random.default_rng(2)
    N = 3
    Pi, E = build_pi_e_ft(N)
    u_prev = rng.integers(-1, 2, 3)
    seq = rng.integers(-1, 2, (N, 3))
    U = stack_ft(seq, u_prev)
    P = Pi @ U - E @ np.r_[u_prev, 0, 0, 0]
    prev = np.vstack([u_prev, seq[:-1]])
    np.testing.assert_array_equal(P.reshape(N, 6)[:, :3], seq - prev)
    np.testing.assert_array_equal(P.reshape(N, 6)[:, 3:], np.abs(seq - prev))
    steady = stack_ft(np.tile(u_prev, (N, 1)), u_prev)
    np.testing.assert_array_equal(Pi @ steady - E @ np.r_[u_prev, 0, 0, 0], 0)


def test_pi_e_l_fl():
    Pi, E, L = build_pi_e_l_fl(2)
    U = np.array([1, 0, -1, 7.0, 0, 0, 1, 9.0])
    np.testing.assert_array_equal(L @ U, [7, 9])
    du = Pi @ U - E @ np.r_[1, 1, 1, 0]
    np.testing.assert_array_equal(du, [0, -1, -2, 0, -1, 0, 2, 0])
    H = 13e-3 * Pi.T @ Pi + 60 * L.T @ L
    assert np.linalg.eigvalsh(H).min() > 0


@pytest.mark.parametrize("lam_sw", [60.0, 0.0])
def test_assemble_ft_pd(lam_sw):
    p = assemble_ft(SP, FP, lambda_sw=lam_sw)
    assert p.dim == 30
    assert np.linalg.eigvalsh(p.H).min() > 0
    assert np.linalg.norm(p.V.T @ p.V - p.H) < 1e-10 * np.linalg.norm(p.H)
    np.testing.assert_array_equal(p.V, np.tril(p.V))
    assert (np.diag(p.V) > 0).all()


def test_assemble_fl_slack_rows():
    p = assemble_fl(SP, FP)
    assert p.dim == 20
    assert np.linalg.norm(p.V.T @ p.V - p.H) < 1e-10 * np.linalg.norm(p.H)
    for r in range(3, p.dim, 4):
        row = p.V[r]
        assert np.count_nonzero(row) == 1
        assert abs(row[r] - np.sqrt(60.0)) < 1e-12
    np.testing.assert_array_equal(p.Upsilon[:, 3::4], 0)


def test_assembled_arrays_frozen():
    p = assemble_fl(SP, FP)
    with pytest.raises(ValueError):
        p.H[0, 0] = 1.0


def test_weights_and_base_rejected():
    with pytest.raises(ValueError):
        assemble_ft(SP, FP, lambda_u=0.0)
    with pytest.raises(ValueError):
        assemble_fl(SP, FP, lambda_sw=0.0)
    with pytest.raises(ValueError):
        assemble_fl(SP, FP, f_base=0.0)
    with pytest.raises(ValueError):
        horizon.assemble("xx", SP, FP)


def test_lower_generator_rejects_indefinite():
    with pytest.raises(ValueError):
        lower_generator(np.diag([1.0, -1.0]))


@pytest.mark.parametrize("kind", ["ft", "fl"])
def test_linear_term_zero_instance(kind):
    p = horizon.assemble(kind, SP, FP, N_p=3)
    n_x = 4 if kind == "ft" else 2
    n_y = 3 if kind == "ft" else 2
    pt = linear_term(p, np.zeros(n_x), np.zeros(3), np.zeros((3, n_y)), np.zeros(3))
    np.testing.assert_array_equal(pt.Theta, 0)
    np.testing.assert_array_equal(pt.U_hat, 0)


def test_linear_term_fl_slack_entries_zero():
    rng = np.random.default_rng(3)
    p = assemble_fl(SP, FP, N_p=4)
    inst = random_instance(rng, 4)
    pt = linear_term(p, inst.x_ph, inst.v_g, inst.i_ref, inst.u_prev)
    np.testing.assert_array_equal(pt.U_hat[3::4], 0)
    np.testing.assert_array_equal(pt.Theta[3::4], 0)


def test_linear_term_dimension_errors():
    p = assemble_ft(SP, FP, N_p=2)
    with pytest.raises(ValueError):
        linear_term(p, np.zeros(2), np.zeros(3), np.zeros((2, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        linear_term(p, np.zeros(4), np.zeros(3), np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        linear_term(p, np.zeros(4), np.zeros(3), np.zeros((2, 3)), np.zeros(2))


@pytest.mark.parametrize("kind", ["ft", "fl"])
@pytest.mark.parametrize("f_base", [1.0, 100.0])
def test_cost_form_matches_rollout(kind, f_base):
    """ILS objective minus the rollout cost is the same constant for every feasible U."""
    rng = np.random.default_rng(4)
    for _ in range(20):
        N = int(rng.integers(1, 5))
        p = horizon.assemble(kind, SP, FP, N_p=N, f_base=f_base)
        inst = random_instance(rng, N)
        if kind == "ft":
            pt = linear_term(p, np.r_[inst.x_ph, inst.x_sw], inst.v_g, inst.y_ft(), inst.u_prev)
        else:
            ctx = SlackContext.build(p, inst.x_sw, inst.f_star, inst.u_prev)
            pt = linear_term(p, inst.x_ph, inst.v_g, inst.i_ref, inst.u_prev)
        diffs = []
        for _ in range(30):
            seq = rng.integers(-1, 2, (N, 3))
            U = stack_ft(seq, inst.u_prev) if kind == "ft" else stack_fl(ctx, seq)
            ils = horizon.ils_cost(p, pt.U_hat, U)
            ref = (oracle.rollout_cost(p, seq, inst.x_ph, inst.x_sw, inst.v_g, inst.y_ft(), inst.u_prev)
                   if kind == "ft" else
                   oracle.rollout_cost(p, seq, inst.x_ph, inst.x_sw, inst.v_g, inst.i_ref,
                                       inst.u_prev, inst.f_star))
            diffs.append(ils - ref)
        assert np.ptp(diffs) < 1e-8 * max(1.0, abs(diffs[0]))
