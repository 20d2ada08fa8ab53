import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fcs_sphere.swfreq import FilterParams, dc_gain, filter_matrices, slack, step_filter, transitions


def test_filter_matrices_table_values():
    A, B, C = filter_matrices(FilterParams(0.99, 0.99, 1e-4))
    np.testing.assert_allclose(A, [[0.99, 0], [0.01, 0.99]])
    np.testing.assert_allclose(B[0], [25 / 3] * 3, rtol=1e-12)
    np.testing.assert_array_equal(B[1], [0, 0, 0])
    assert float(C[0] @ [0, 250]) == 250


def test_filter_matrices_zero_poles():
    A, _, _ = filter_matrices(FilterParams(0.0, 0.0))
    np.testing.assert_array_equal(A, [[0, 0], [1, 0]])


@pytest.mark.parametrize("kw", [dict(a1=1.0), dict(a2=-0.1), dict(T_s=0.0)])
def test_filter_params_rejected(kw):
    with pytest.raises(ValueError):
        FilterParams(**kw)


def test_transitions():
    np.testing.assert_array_equal(transitions([1, 0, -1], [0, 0, 0]), [1, 0, 1])
    np.testing.assert_array_equal(transitions([1, 0, -1], [1, 0, -1]), [0, 0, 0])
    assert transitions([1, 0, 0], [-1, 0, 0])[0] == 2


def test_step_filter_examples():
    fp = FilterParams()
    np.testing.assert_array_equal(step_filter(fp, [0, 0], [0, 0, 0]), [0, 0])
    np.testing.assert_allclose(step_filter(fp, [0, 0], [1, 1, 1]), [25, 0], rtol=1e-12)


def test_dc_gain_fixed_point():
    fp = FilterParams()
    x = np.zeros(2)
    for _ in range(5000):
        x = step_filter(fp, x, [1, 1, 1])
    assert dc_gain(fp, [1, 1, 1]) == pytest.approx(2500, rel=1e-12)
    assert abs(x[1] - 2500) < 1e-6


def test_slack():
    assert slack(253, 250) == 3
    assert slack(240, 250) == 0
    assert slack(250, 250) == 0


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 100))
def test_slack_monotone(f, f_star, df):
    assert slack(f, f_star) >= 0
    assert slack(f + df, f_star) >= slack(f, f_star)


@settings(max_examples=50)
@given(st.lists(st.tuples(*[st.integers(0, 2)] * 3), min_size=1, max_size=30),
       st.lists(st.tuples(*[st.integers(0, 2)] * 3), min_size=30, max_size=30))
def test_filter_monotone_and_non_negative(seq, extra):
    fp = FilterParams()
    small = np.array(seq)
    large = small + np.array(extra[:len(seq)])  # element-wise larger
    xs, xl = np.zeros(2), np.zeros(2)
    for ps, pl in zip(small, large):
        xs, xl = step_filter(fp, xs, ps), step_filter(fp, xl, pl)
        assert xs.min() >= 0
        assert xl[1] >= xs[1]
