"""Anisotropic diffusion: coefficient, threshold, and smoothing behavior."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from oracles import (
    naive_coefficient,
    naive_mean_abs_deviation,
    naive_psnr,
    naive_threshold,
)
from topovision.denoise import (
    THRESHOLD_FLOOR,
    DiffusionConfig,
    DiffusionDenoiser,
    denoise,
    diffusion_coefficient,
    estimate_threshold,
)
from topovision.fixtures import step_edge
from topovision.gradients import gradients_4dir


class TestDiffusionCoefficient:
    def test_zero_gradient_is_three_quarters_exactly(self):
        for t in (1e-6, 0.5, 1.0, 42.0):
            assert diffusion_coefficient(0.0, t) == 0.75

    def test_unit_point_closed_form(self):
        expected = 1.5 / (1.0 + math.exp(2.0))
        assert diffusion_coefficient(1.0, 1.0) == pytest.approx(expected, rel=1e-12)
        # the loosely rounded published figure
        assert diffusion_coefficient(1.0, 1.0) == pytest.approx(0.17883, abs=1e-4)

    def test_saturation_below_1e8(self):
        assert diffusion_coefficient(10.0, 1.0) < 1e-8

    def test_matches_naive_formula_on_grid(self):
        for s in (0.0, 0.1, 0.7, 1.3, 2.0, 5.0):
            for t in (0.05, 0.3, 1.0, 4.0):
                got = diffusion_coefficient(s, t)
                assert got == pytest.approx(naive_coefficient(s, t), rel=1e-12)

    def test_sign_of_s_is_irrelevant(self):
        assert diffusion_coefficient(-1.3, 0.7) == diffusion_coefficient(1.3, 0.7)

    def test_array_input_matches_scalar_loop(self):
        s = np.array([[0.0, 0.4], [1.1, 3.0]])
        got = diffusion_coefficient(s, 0.8)
        for idx in np.ndindex(s.shape):
            assert got[idx] == diffusion_coefficient(float(s[idx]), 0.8)

    def test_huge_gradient_does_not_overflow(self):
        value = diffusion_coefficient(1e6, 1e-3)
        assert 0.0 < value <= 0.75

    @pytest.mark.parametrize("bad_t", [0.0, -1.0, math.nan, math.inf])
    def test_nonpositive_or_nonfinite_threshold_rejected(self, bad_t):
        with pytest.raises(ValueError):
            diffusion_coefficient(1.0, bad_t)

    @given(
        s1=st.floats(0.0, 8.0),
        s2=st.floats(0.0, 8.0),
        t=st.floats(0.5, 5.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_strictly_decreasing_and_bounded(self, s1, s2, t):
        lo, hi = sorted((s1, s2))
        d_lo, d_hi = diffusion_coefficient(lo, t), diffusion_coefficient(hi, t)
        assert 0.0 < d_lo <= 0.75
        assert 0.0 < d_hi <= 0.75
        if hi - lo > 1e-9:
            assert d_lo > d_hi


class TestEstimateThreshold:
    def test_constant_image_hits_floor(self):
        assert estimate_threshold(np.full((8, 8), 0.4), weight=2.0) == THRESHOLD_FLOOR

    def test_published_multiset_arithmetic(self):
        # magnitude multiset {0, 0, 1, 1}: mean 0.5, mean abs deviation 0.5
        assert naive_mean_abs_deviation([0.0, 0.0, 1.0, 1.0]) == 0.5

    def test_one_row_step_exact(self):
        # magnitudes come out {0, 1/4, 1/4, 0}: every value deviates by 1/8
        img = np.array([[0.0, 0.0, 1.0, 1.0]])
        assert estimate_threshold(img, weight=1.0) == 0.125
        assert estimate_threshold(img, weight=4.0) == 0.5

    def test_matches_naive_two_pass_oracle(self):
        rng = np.random.default_rng(123)
        img = rng.random((16, 16))
        got = estimate_threshold(img, weight=2.0)
        assert got == pytest.approx(naive_threshold(img.tolist(), 2.0), rel=1e-12)

    def test_weight_scales_linearly_above_floor(self):
        rng = np.random.default_rng(5)
        img = rng.random((12, 12))
        t1 = estimate_threshold(img, weight=1.0)
        t3 = estimate_threshold(img, weight=3.0)
        assert t3 == pytest.approx(3.0 * t1, rel=1e-12)

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError):
            estimate_threshold(np.zeros((4, 4)), weight=0.0)


class TestDiffusionConfig:
    def test_defaults(self):
        cfg = DiffusionConfig()
        assert (cfg.iterations, cfg.step, cfg.weight) == (20, 0.2, 2.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"iterations": 0},
            {"iterations": -3},
            {"step": 0.0},
            {"step": 0.26},
            {"step": -0.1},
            {"weight": 0.0},
            {"weight": -2.0},
        ],
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            DiffusionConfig(**kwargs)

    def test_stability_bound_inclusive(self):
        assert DiffusionConfig(step=0.25).step == 0.25

    def test_frozen(self):
        with pytest.raises(AttributeError):
            DiffusionConfig().iterations = 5


class TestDenoise:
    def test_constant_image_is_exact_fixed_point(self):
        img = np.full((16, 16), 0.6)
        out = denoise(img, DiffusionConfig(iterations=10))
        np.testing.assert_array_equal(out, img)

    def test_output_stays_in_unit_interval(self):
        rng = np.random.default_rng(2)
        out = denoise(rng.random((20, 20)), DiffusionConfig(iterations=15, step=0.25))
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        img = rng.random((18, 18))
        cfg = DiffusionConfig(iterations=7)
        np.testing.assert_array_equal(denoise(img, cfg), denoise(img, cfg))

    def test_input_not_mutated(self):
        rng = np.random.default_rng(21)
        img = rng.random((10, 10))
        before = img.copy()
        denoise(img, DiffusionConfig(iterations=3))
        np.testing.assert_array_equal(img, before)

    def test_step_edge_psnr_gain_at_least_3db(self):
        clean, noisy = step_edge(size=64, noise_sigma=0.05, seed=0)
        out = denoise(noisy, DiffusionConfig(iterations=20, step=0.2, weight=2.0))
        before = naive_psnr(clean.tolist(), noisy.tolist())
        after = naive_psnr(clean.tolist(), out.tolist())
        assert after - before >= 3.0

    def test_step_edge_column_preserved_in_95_percent_of_rows(self):
        clean, noisy = step_edge(size=64, noise_sigma=0.05, seed=0)
        out = denoise(noisy, DiffusionConfig(iterations=20, step=0.2, weight=2.0))
        reference = np.abs(gradients_4dir(clean).east).argmax(axis=1)
        recovered = np.abs(gradients_4dir(out).east).argmax(axis=1)
        assert (reference == recovered).mean() >= 0.95

    def test_total_variation_never_increases_on_noise(self):
        rng = np.random.default_rng(31)
        img = np.clip(0.5 + rng.normal(0.0, 0.08, (24, 24)), 0.0, 1.0)

        def total_variation(m):
            g = gradients_4dir(m)
            return np.abs(g.east).sum() + np.abs(g.south).sum()

        current = img
        for _ in range(5):
            next_img = denoise(current, DiffusionConfig(iterations=1))
            assert total_variation(next_img) <= total_variation(current) + 1e-12
            current = next_img

    def test_threshold_changes_across_iterations(self):
        rng = np.random.default_rng(17)
        img = np.clip(0.5 + rng.normal(0.0, 0.1, (16, 16)), 0.0, 1.0)
        once = denoise(img, DiffusionConfig(iterations=1))
        t0 = estimate_threshold(img, 2.0)
        t1 = estimate_threshold(once, 2.0)
        assert t0 != t1

    def test_rejects_invalid_image(self):
        with pytest.raises(ValueError):
            denoise(np.full((4, 4), 2.0), DiffusionConfig())


class TestDiffusionDenoiserEstimator:
    def test_get_set_params_round_trip(self):
        est = DiffusionDenoiser(iterations=5, step=0.1, weight=3.0)
        params = est.get_params()
        assert params == {"iterations": 5, "step": 0.1, "weight": 3.0}
        est.set_params(iterations=9)
        assert est.get_params()["iterations"] == 9

    def test_clone_preserves_params(self):
        est = clone(DiffusionDenoiser(iterations=4, step=0.15))
        assert est.get_params()["iterations"] == 4

    def test_fit_returns_self_and_validates(self):
        est = DiffusionDenoiser(step=0.9)
        with pytest.raises(ValueError):
            est.fit(np.zeros((4, 4)))
        good = DiffusionDenoiser()
        assert good.fit(np.zeros((4, 4))) is good

    def test_transform_matches_function_single_image(self):
        rng = np.random.default_rng(4)
        img = rng.random((12, 12))
        est = DiffusionDenoiser(iterations=6, step=0.2, weight=2.0)
        got = est.fit(img).transform(img)
        want = denoise(img, DiffusionConfig(iterations=6, step=0.2, weight=2.0))
        np.testing.assert_array_equal(got, want)

    def test_transform_stack_per_slice(self):
        rng = np.random.default_rng(9)
        stack = rng.random((3, 10, 10))
        est = DiffusionDenoiser(iterations=4)
        out = est.fit(stack).transform(stack)
        assert out.shape == stack.shape
        cfg = DiffusionConfig(iterations=4)
        for k in range(3):
            np.testing.assert_array_equal(out[k], denoise(stack[k], cfg))

    def test_fit_transform_available(self):
        rng = np.random.default_rng(6)
        img = rng.random((8, 8))
        out = DiffusionDenoiser(iterations=2).fit_transform(img)
        assert out.shape == img.shape
