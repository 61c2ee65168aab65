import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import unit
from ntk_attractors.activations import SIGMOID, Activation, linear
from ntk_attractors.kernels import Dataset, random_dataset
from ntk_attractors.quadrature import expect_1d
from ntk_attractors.theory import (antipodal_dataset, chi1_diagnostic, gradient_component_norms,
                                   ig2_norm_sq, ig2_norm_sq_factored, ig2_spike, jvp_moments,
                                   linear_region_check, parallel_inputs_check, prop2_montecarlo,
                                   rank_one_spectrum, thm1_depth_scan, verify_all)


def pair_with_cosine(rng, n0, r, rho):
    x1 = unit(rng.standard_normal(n0))
    u = unit(rng.standard_normal(n0))
    u = unit(u - (u @ x1) * x1)
    return r * x1, r * (rho * x1 + np.sqrt(1 - rho ** 2) * u)


class TestInitJvp:
    def test_zero_input_variance(self):
        n0 = 12
        moments = jvp_moments(np.zeros(n0), unit(np.ones(n0)), 2)
        assert moments[-1][2] == pytest.approx(1 / (16 * n0), rel=1e-13)

    @pytest.mark.parametrize("L", [2, 3, 4, 5])
    def test_depth_decay_bound(self, L, rng):
        n0 = 8
        for r in (0.0, 1.0, 10.0):
            x = r * unit(rng.standard_normal(n0))
            z = unit(rng.standard_normal(n0))
            assert jvp_moments(x, z, L)[-1][2] <= 1 / (n0 * 16 ** (L - 1)) * (1 + 1e-12)

    @pytest.mark.slow
    def test_monte_carlo_variance(self):
        n0 = 32
        s = prop2_montecarlo(2, n0, np.zeros(n0), unit(np.ones(n0)), widths=[2 ** 14], samples=10_000, seed=0)
        assert s.coordinates.size == 10_000
        assert s.relative_error < 0.05

    def test_monte_carlo_nonzero_input(self, rng):
        n0 = 16
        x = 3.0 * unit(rng.standard_normal(n0))
        s = prop2_montecarlo(2, n0, x, unit(rng.standard_normal(n0)), widths=[4096], samples=3000, seed=4)
        assert s.relative_error < 0.1

    def test_validation(self):
        with pytest.raises(ValueError, match="widths"):
            prop2_montecarlo(2, 4, np.zeros(4), unit(np.ones(4)), widths=[16])
        with pytest.raises(ValueError, match="unit"):
            prop2_montecarlo(2, 4, np.zeros(4), np.ones(4), widths=[64])


class TestDepthScan:
    def test_linear_concentrates_at_two_alpha(self):
        rep = thm1_depth_scan([2], 64, 2048, samples=5, seed=0, act=linear(0.25))
        assert rep.mean(2) == pytest.approx(0.5, rel=0.1)

    def test_report_fields(self):
        rep = thm1_depth_scan([2, 3], 16, 1024, samples=4, seed=1, n_directions=50)
        assert set(rep.norms) == {2, 3} and all(np.all(v >= 0) for v in rep.norms.values())
        assert all(t >= 0 for t in rep.tau.values())
        assert rep.ratios[2] < 0.5
        assert rep.exceedances == 0

    def test_nonzero_input(self):
        rep = thm1_depth_scan([2], 16, 1024, samples=3, seed=2, r=4.0, n_directions=20)
        assert rep.tau[2] <= 1 / (16 * 16) + 1e-12


class TestRankOne:
    def test_identity_example(self):
        rep = rank_one_spectrum(np.eye(2), 1.0)
        np.testing.assert_allclose(rep.eigenvalues, [1, 1 / 3], atol=1e-14)
        assert rep.g == pytest.approx(2) and rep.lam_hat == pytest.approx(1 / 3)

    def test_projection_when_c_zero(self, rng):
        X = rng.standard_normal((6, 3))
        rep = rank_one_spectrum(X, 0.0)
        np.testing.assert_allclose(rep.eigenvalues, [1, 1, 1, 0, 0, 0], atol=1e-12)

    def test_singular_rejected(self):
        X = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ValueError):
            rank_one_spectrum(X, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), m=st.integers(2, 6), extra=st.integers(0, 4),
           c=st.floats(0, 50), r=st.floats(0.1, 100))
    def test_paths_and_trace_bound(self, seed, m, extra, c, r):
        X = np.random.default_rng(seed).standard_normal((m + extra, m))
        X *= r / np.linalg.norm(X, axis=0)
        if np.linalg.cond(X) > 1e6:
            return
        rep = rank_one_spectrum(X, c)
        scale = max(1.0, np.abs(rep.eigenvalues).max())
        assert rep.path_difference < 1e-10 * scale * np.linalg.cond(X) ** 2
        assert rep.g >= 1 / r ** 2 - 1e-12 * rep.g
        assert 0 < rep.lam_hat <= 1
        # the m - 1 remaining nonzero eigenvalues are 1
        ev = rep.eigenvalues
        assert np.sum(np.abs(ev - 1) < 1e-8) >= m - 1


class TestLinearRegion:
    def test_linear_identity(self, rng):
        X = rng.standard_normal((3, 3))
        data = Dataset.from_columns(X / np.linalg.norm(X, axis=0))
        rep = linear_region_check(0.25, 0.0, data, seed=0)
        assert rep.identity_error < 1e-8
        assert rep.observed_multiplicity == 3 == rep.predicted_multiplicity

    @pytest.mark.parametrize("n", [2, 5, 8])
    def test_linear_multiplicity(self, n):
        data = random_dataset(10, n, 1.0, np.random.default_rng(n))
        rep = linear_region_check(0.25, 0.5, data, seed=n)
        assert rep.conditions_hold
        assert rep.observed_multiplicity == n - 1
        assert 0 < rep.lam_hat < 1
        assert rep.lam_hat_residual < 1e-10
        assert rep.c == pytest.approx(10 * 0.25 / (2 * 0.0625))

    def test_large_radius_violates_bias_condition(self):
        n0 = 10
        for s in range(5):
            data = random_dataset(n0, 5, 4 * np.sqrt(n0), np.random.default_rng(s))
            rep = linear_region_check(0.25, 0.5, data, seed=s)
            assert not rep.conditions_hold

    def test_rank_deficient_rejected(self):
        x = unit(np.arange(1.0, 4.0))
        data = Dataset.from_columns(np.column_stack([x, -x]), check_rank=False)
        with pytest.raises(ValueError):
            linear_region_check(0.25, 0.5, data, width=64)


class TestGradientComponents:
    @pytest.mark.parametrize("rho", [-0.7, 0.0, 0.5, 0.95])
    def test_decay(self, rho, rng):
        norms = []
        for r in (1e2, 1e3, 1e4, 1e5):
            a, b = pair_with_cosine(rng, 16, r, rho)
            gc = gradient_component_norms(a, b)
            norms.append(gc.norm1 + gc.norm2)
        assert norms[-1] < 1e-2 * max(norms)
        assert np.all(np.diff(norms[1:]) < 0)

    def test_parallel_limit(self, rng):
        x = 1e6 * unit(rng.standard_normal(32))
        gc = gradient_component_norms(x, x)
        # the two components are parallel to x when x_i = x_1
        assert gc.norm1 + gc.norm2 == pytest.approx(1 / (8 * np.pi * np.sqrt(32)), rel=1e-3)

    def test_formula_matches_vector_form(self, rng):
        for r in (0.5, 5.0, 50.0, 500.0):
            for rho in (-0.99, -0.3, 0.0, 0.6, 0.999):
                gc = gradient_component_norms(*pair_with_cosine(rng, 20, r, rho))
                assert gc.formula_error < 1e-9

    def test_factored_equals_expanded(self):
        r = np.logspace(-2, 4, 50)
        for rho in (-0.9, 0.0, 0.5, 0.99):
            np.testing.assert_allclose(ig2_norm_sq(r, rho, 7), ig2_norm_sq_factored(r, rho, 7), rtol=1e-10)

    def test_spike_near_parallel(self):
        r_at, peak, interior = ig2_spike(0.999, 32)
        assert interior
        assert np.sqrt(ig2_norm_sq(1e5, 0.999, 32)) < 0.1 * peak
        assert np.sqrt(ig2_norm_sq(0.1, 0.999, 32)) < peak

    def test_unequal_norms_rejected(self):
        with pytest.raises(ValueError):
            gradient_component_norms(np.ones(3), 2 * np.ones(3))


class TestParallelInputs:
    def test_large_radius(self):
        rep = parallel_inputs_check(antipodal_dataset(32, 1e3, 3, np.random.default_rng(0)))
        assert rep.off_pair_ratio < 0.05
        assert rep.jacobian_norms.max() <= 0.55
        assert rep.pair_block_error < 0.05

    def test_pair_activation_term_vanishes(self):
        vals = [parallel_inputs_check(antipodal_dataset(8, r, 0, np.random.default_rng(1))).arcsin_pair_entry
                for r in (1e1, 1e2, 1e3, 1e4)]
        assert np.all(np.diff(vals) < 0)
        assert vals[-1] < 1e-4

    def test_requires_one_pair(self, rng):
        with pytest.raises(ValueError, match="antipodal"):
            parallel_inputs_check(random_dataset(4, 3, 2.0, rng))


class TestOrderedRegion:
    @pytest.mark.parametrize("q0", [0.1, 1.0, 10.0])
    def test_sigmoid(self, q0):
        rep = chi1_diagnostic(SIGMOID, q0)
        assert rep.converged
        assert rep.chi1 <= 1 / 16 + 1e-12
        d = np.diff(rep.q_sequence)
        assert np.all(d >= 0) or np.all(d <= 0)

    def test_small_variance_limit(self):
        chi = expect_1d(lambda u: SIGMOID(u, 1) ** 2, 1e-10)
        assert chi == pytest.approx(1 / 16, rel=1e-9)

    def test_erf_closed_form(self):
        rep = chi1_diagnostic(Activation("erf"), 1.0)
        np.testing.assert_allclose(rep.chi1, 4 / (np.pi * np.sqrt(1 + 4 * rep.q_star)), rtol=1e-10)

    def test_negative_start_rejected(self):
        with pytest.raises(ValueError):
            chi1_diagnostic(SIGMOID, -1.0)


class TestVerifyAll:
    def test_hard_checks_pass(self):
        recs = verify_all(seed=0)
        assert len(recs) >= 20
        failed = [r.name for r in recs if r.hard and not r.passed]
        assert failed == []
        assert len({r.name for r in recs}) == len(recs)
