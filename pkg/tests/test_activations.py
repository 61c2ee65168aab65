import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from ntk_attractors.activations import KINDS, SIGMOID, Activation, activation_eval, linear

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


class TestExamples:
    def test_sigmoid_at_zero(self):
        assert activation_eval(SIGMOID, 0, 0.0) == 0.5
        assert activation_eval(SIGMOID, 1, 0.0) == 0.25

    def test_linear_second_derivative(self):
        act = linear(0.25, 0.5)
        assert activation_eval(act, 2, 3.7) == 0.0
        assert activation_eval(act, 3, 3.7) == 0.0
        assert activation_eval(act, 0, 4.0) == pytest.approx(1.5)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            activation_eval(SIGMOID, 4, 0.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Activation("relu")

    def test_erf_scaled_sigmoid_matches_erf_formula(self):
        from scipy.special import erf
        x = np.linspace(-5, 5, 21)
        np.testing.assert_allclose(Activation("erf_scaled_sigmoid")(x), 0.5 * (1 + erf(x / 2)), atol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("order", [0, 1, 2])
def test_derivatives_match_finite_differences(kind, order):
    act = Activation(kind)
    x = np.linspace(-4, 4, 33)
    h = 1e-5
    fd = (act(x + h, order) - act(x - h, order)) / (2 * h)
    np.testing.assert_allclose(act(x, order + 1), fd, atol=1e-8, rtol=1e-6)


class TestProperties:
    @given(finite)
    @example(2.220446049250313e-16)
    def test_sigmoid_slope_bounds(self, x):
        d = SIGMOID(x, 1)
        assert 0 < d <= 0.25

    @settings(max_examples=50)
    @given(st.sampled_from(KINDS), st.integers(0, 3), st.floats(-1e6, 1e6, allow_nan=False))
    def test_all_orders_finite(self, kind, order, x):
        assert np.isfinite(Activation(kind)(x, order))

    def test_vectorized_shape(self):
        x = np.zeros((3, 4))
        for kind in KINDS:
            assert Activation(kind)(x, 1).shape == (3, 4)
