import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seasonvol.errors import ConfigError
from seasonvol.seasonality import (
    Pattern,
    SeasonalitySpec,
    eval_theta,
    jump_times,
    split_points,
    theta_max,
    theta_min,
    theta_on_segment,
    transform_theta,
)

from conftest import ALL_PATTERNS, SEASONAL_PATTERNS, make_spec, quad_transform_oracle


def spec_strategy(patterns=ALL_PATTERNS):
    def build(draw):
        pattern = draw(st.sampled_from(patterns))
        a = draw(st.floats(0.01, 2.0))
        if pattern is Pattern.CONSTANT:
            return SeasonalitySpec(pattern, a=a)
        t0 = draw(st.floats(0.0, 0.999))
        if pattern is Pattern.SINUSOIDAL:
            b = a * draw(st.floats(0.01, 1.0))
        else:
            b = draw(st.floats(0.01, 2.0))
        return SeasonalitySpec(pattern, a=a, b=b, t0=t0)

    return st.composite(lambda draw: build(draw))()


class TestEvalTheta:
    def test_sinusoidal_peak_value(self):
        spec = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.25, b=0.15, t0=7 / 12)
        assert eval_theta(spec, 7 / 12) == pytest.approx(0.40, abs=1e-12)

    def test_spiked_antipode_returns_base_level(self):
        spec = SeasonalitySpec(Pattern.SPIKED, a=0.10, b=0.30, t0=7 / 12)
        assert eval_theta(spec, 7 / 12 + 0.5) == pytest.approx(0.10, abs=1e-12)

    @pytest.mark.parametrize("pattern", ALL_PATTERNS)
    def test_period_one(self, pattern):
        spec = make_spec(pattern)
        t = np.linspace(0.0, 1.0, 257)
        np.testing.assert_allclose(
            eval_theta(spec, t + 1.0), eval_theta(spec, t), rtol=0, atol=1e-12
        )

    @given(spec=spec_strategy(), t=st.floats(0.0, 5.0))
    def test_positive(self, spec, t):
        val = eval_theta(spec, t)
        assert val >= 0.0
        if not (spec.pattern is Pattern.SINUSOIDAL and spec.b == spec.a):
            assert val > 0.0

    @given(spec=spec_strategy())
    def test_bounded_by_min_max(self, spec):
        t = np.linspace(0.0, 2.0, 401)
        vals = eval_theta(spec, t)
        assert np.all(vals >= theta_min(spec) - 1e-12)
        assert np.all(vals <= theta_max(spec) + 1e-12)

    def test_negative_time_rejected(self):
        spec = make_spec(Pattern.TRIANGLE)
        with pytest.raises(ConfigError):
            eval_theta(spec, -0.1)

    def test_scalar_and_array_shapes(self):
        spec = make_spec(Pattern.SAWTOOTH)
        assert isinstance(eval_theta(spec, 0.3), float)
        assert eval_theta(spec, np.array([0.1, 0.2])).shape == (2,)


class TestSpecValidation:
    def test_sinusoidal_requires_b_at_most_a(self):
        with pytest.raises(ConfigError):
            SeasonalitySpec(Pattern.SINUSOIDAL, a=0.1, b=0.2, t0=0.5)

    @pytest.mark.parametrize("pattern", SEASONAL_PATTERNS)
    def test_seasonal_requires_positive_b(self, pattern):
        with pytest.raises(ConfigError):
            SeasonalitySpec(pattern, a=0.1, b=0.0, t0=0.5)

    def test_constant_requires_positive_a(self):
        with pytest.raises(ConfigError):
            SeasonalitySpec(Pattern.CONSTANT, a=0.0)
        SeasonalitySpec(Pattern.CONSTANT, a=0.1)  # b unused

    def test_t0_range(self):
        with pytest.raises(ConfigError):
            SeasonalitySpec(Pattern.TRIANGLE, a=0.1, b=0.1, t0=1.0)

    def test_pattern_from_string(self):
        spec = SeasonalitySpec("sawtooth", a=0.1, b=0.2, t0=0.3)
        assert spec.pattern is Pattern.SAWTOOTH


class TestSegmentsAndKinks:
    def test_sawtooth_jumps(self):
        spec = SeasonalitySpec(Pattern.SAWTOOTH, a=0.1, b=0.3, t0=0.25)
        np.testing.assert_allclose(jump_times(spec, 2.5), [0.25, 1.25, 2.25])

    def test_continuous_patterns_do_not_jump(self):
        for pattern in (Pattern.TRIANGLE, Pattern.SPIKED, Pattern.SINUSOIDAL, Pattern.CONSTANT):
            assert jump_times(make_spec(pattern), 3.0).size == 0

    def test_triangle_splits_each_half_period(self):
        spec = SeasonalitySpec(Pattern.TRIANGLE, a=0.1, b=0.6, t0=0.5)
        pts = split_points(spec, 1.6)
        np.testing.assert_allclose(pts, [0.5, 1.0, 1.5])

    @given(spec=spec_strategy(SEASONAL_PATTERNS))
    def test_segment_evaluator_matches_theta_inside(self, spec):
        cuts = split_points(spec, 2.0)
        bounds = np.concatenate(([0.0], cuts, [2.0]))
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if hi - lo < 1e-9:
                continue
            t = np.linspace(lo + 1e-9, hi - 1e-9, 7)
            np.testing.assert_allclose(
                theta_on_segment(spec, lo, hi)(t), eval_theta(spec, t), rtol=1e-10, atol=1e-12
            )


class TestTransform:
    def test_constant_at_lam_zero(self):
        spec = SeasonalitySpec(Pattern.CONSTANT, a=0.2)
        assert transform_theta(spec, 1.0, 0.0) == pytest.approx(0.2, abs=1e-14)

    def test_sinusoidal_against_oracle(self):
        spec = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.25, b=0.15, t0=7 / 12)
        value = transform_theta(spec, 2.0, -0.3)
        assert value == pytest.approx(quad_transform_oracle(spec, 2.0, -0.3), abs=1e-10)

    def test_sawtooth_against_oracle_past_one_period(self):
        spec = SeasonalitySpec(Pattern.SAWTOOTH, a=0.10, b=0.30, t0=7 / 12)
        value = transform_theta(spec, 1.7, 0.5)  # T > t0: wrapping branch is active
        assert value == pytest.approx(quad_transform_oracle(spec, 1.7, 0.5), abs=1e-10)

    def test_invalid_horizon(self):
        with pytest.raises(ConfigError):
            transform_theta(make_spec(Pattern.CONSTANT), 0.0, 1.0)

    @given(
        spec=spec_strategy(),
        T=st.floats(0.05, 3.0),
        lam=st.one_of(st.floats(-5.0, 5.0), st.just(0.0), st.floats(-1e-6, 1e-6)),
    )
    def test_matches_quadrature_oracle(self, spec, T, lam):
        value = transform_theta(spec, T, lam)
        oracle = quad_transform_oracle(spec, T, lam)
        assert value == pytest.approx(oracle, rel=1e-9, abs=1e-13)

    @given(spec=spec_strategy(), T=st.floats(0.1, 2.5), lam=st.floats(0.0, 5.0))
    def test_monotone_in_horizon_for_nonnegative_rate(self, spec, T, lam):
        assert transform_theta(spec, T + 0.25, lam) > transform_theta(spec, T, lam)

    @given(spec=spec_strategy(), T=st.floats(0.05, 3.0), lam=st.floats(-5.0, 5.0))
    def test_bounded_by_level_range(self, spec, T, lam):
        if abs(lam) < 1e-12:
            weight = T
        else:
            weight = math.expm1(lam * T) / lam
        value = transform_theta(spec, T, lam)
        assert theta_min(spec) * weight - 1e-10 <= value
        assert value <= theta_max(spec) * weight + 1e-10

    def test_triangle_branches_agree_where_both_are_stable(self):
        from seasonvol.seasonality import _triangle_closed, _triangle_segments

        for lam in (0.02, 0.5, -0.75):
            closed = _triangle_closed(0.1, 0.6, 7 / 12, 2.3, lam)
            segments = _triangle_segments(0.1, 0.6, 7 / 12, 2.3, lam)
            assert closed == pytest.approx(segments, rel=1e-11)

    def test_cache_returns_identical_values(self):
        spec = make_spec(Pattern.SPIKED)
        assert transform_theta(spec, 1.3, 0.7) == transform_theta(spec, 1.3, 0.7)
