import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from msrchoice.numerics import (
    MINUS_TO_PLUS,
    PLUS_TO_MINUS,
    EvaluationError,
    IntegrationError,
    InvalidBracketError,
    OptimizerConfig,
    QuadratureConfig,
    ToleranceNotMetError,
    fixed_gauss_expectation,
    gauss_expectation,
    maximize_scalar,
    sign_changes,
)


class TestConfigs:
    def test_defaults(self):
        q = QuadratureConfig()
        assert q.abs_tol == 1e-10 and q.rel_tol == 1e-10
        assert q.truncation_radius == 12.0
        o = OptimizerConfig()
        assert o.grid_points == 2001

    @pytest.mark.parametrize(
        "kwargs",
        [{"abs_tol": -1.0}, {"rel_tol": float("nan")}, {"truncation_radius": 0.0}, {"max_subdivisions": 0}],
    )
    def test_quadrature_rejects(self, kwargs):
        with pytest.raises(ValueError):
            QuadratureConfig(**kwargs)

    @pytest.mark.parametrize("kwargs", [{"x_tol": 0.0}, {"grid_points": 1}, {"max_iter": 0}])
    def test_optimizer_rejects(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)

    def test_frozen(self):
        with pytest.raises(AttributeError):
            QuadratureConfig().abs_tol = 1.0


class TestGaussExpectation:
    @pytest.mark.parametrize("mean", [-3.0, 0.0, 0.7, 5.0])
    def test_moments(self, mean):
        assert gauss_expectation(lambda y: y, mean) == pytest.approx(mean, abs=1e-12)
        assert gauss_expectation(lambda y: y * y, mean) == pytest.approx(1 + mean * mean, rel=1e-12)
        assert gauss_expectation(lambda y: y**4, mean) == pytest.approx(mean**4 + 6 * mean**2 + 3, rel=1e-10)

    def test_scalar_return_is_broadcast(self):
        assert gauss_expectation(lambda y: 2.0, 0.3) == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("mean", [-1.5, 0.0, 0.4, 2.0])
    def test_step_with_breakpoint(self, mean):
        value = gauss_expectation(lambda y: (y >= 0).astype(float), mean, breakpoints=(0.0,))
        assert value == pytest.approx(ndtr(mean), abs=1e-12)

    def test_nonfinite_integrand_raises(self):
        with pytest.raises(IntegrationError) as err:
            gauss_expectation(lambda y: np.where(y > 1, np.nan, 0.0), 0.0)
        assert math.isfinite(err.value.abscissa)

    def test_nonfinite_mean_raises(self):
        with pytest.raises(ValueError):
            gauss_expectation(lambda y: y, float("inf"))

    def test_budget_exhaustion(self):
        cfg = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-16, max_subdivisions=1)
        with pytest.raises(ToleranceNotMetError) as err:
            gauss_expectation(lambda y: np.sin(40 * y) ** 2, 0.0, cfg)
        assert err.value.error > 0

    def test_radius_doubling_is_stable(self):
        f = lambda y: 1.0 / (1.0 + np.exp(2.0 * y)) ** 2
        base = gauss_expectation(f, 0.5)
        wide = gauss_expectation(f, 0.5, QuadratureConfig(truncation_radius=24.0))
        assert abs(base - wide) < 1e-12


class TestFixedExpectation:
    def test_matches_adaptive(self):
        f = lambda y: 1.0 / (1.0 + np.exp(2.0 * 0.8 * y)) ** 2
        means = np.linspace(-4, 4, 33)
        fixed = fixed_gauss_expectation(f, means)
        adaptive = [gauss_expectation(f, m) for m in means]
        np.testing.assert_allclose(fixed, adaptive, atol=1e-12)

    def test_shape(self):
        out = fixed_gauss_expectation(lambda y: y * y, np.zeros((2, 3)))
        assert out.shape == (2, 3)
        np.testing.assert_allclose(out, 1.0, rtol=1e-12)


class TestMaximizeScalar:
    def test_quadratic(self):
        res = maximize_scalar(lambda x: -((x - 0.3) ** 2), -1.0, 2.0)
        assert res.argmax == pytest.approx(0.3, abs=1e-8)
        assert res.max_value == pytest.approx(0.0, abs=1e-15)

    def test_endpoint_maximum(self):
        res = maximize_scalar(lambda x: x, 0.0, 1.0)
        assert res.argmax == 1.0

    def test_ties_break_left(self):
        res = maximize_scalar(lambda x: math.cos(2 * math.pi * x), 0.0, 1.0)
        assert res.argmax == 0.0
        assert res.ties

    def test_degenerate_interval(self):
        with pytest.raises(InvalidBracketError):
            maximize_scalar(lambda x: x * x, 2.0, 2.0)

    def test_bad_bracket(self):
        with pytest.raises(InvalidBracketError):
            maximize_scalar(lambda x: x, 1.0, 0.0)
        with pytest.raises(InvalidBracketError):
            maximize_scalar(lambda x: x, 0.0, float("inf"))

    def test_nan_objective(self):
        with pytest.raises(EvaluationError):
            maximize_scalar(lambda x: float("nan"), 0.0, 1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=-5, max_value=5), st.floats(min_value=0.1, max_value=4))
    def test_never_worse_than_grid(self, center, width):
        g = lambda x: -abs(x - center) ** 1.5
        lo, hi = center - width, center + 0.5 * width
        res = maximize_scalar(g, lo, hi, OptimizerConfig(grid_points=11))
        grid = np.linspace(lo, hi, 11)
        assert res.max_value >= max(g(x) for x in grid)
        assert lo <= res.argmax <= hi


class TestSignChanges:
    def test_directions(self):
        found = sign_changes([1.0, 0.5, -0.2, -1.0, 3.0])
        assert [(c.left, c.right, c.direction) for c in found] == [
            (1, 2, PLUS_TO_MINUS),
            (3, 4, MINUS_TO_PLUS),
        ]

    def test_zeros_are_skipped(self):
        found = sign_changes([1.0, 0.0, 0.0, -1.0])
        assert len(found) == 1
        assert found[0].left == 0 and found[0].right == 3

    def test_zero_tolerance(self):
        assert sign_changes([1.0, -1e-14, 1.0], zero_tol=1e-12) == []

    def test_too_short(self):
        with pytest.raises(ValueError):
            sign_changes([1.0])
