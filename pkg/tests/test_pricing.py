import math

import numpy as np
import pytest

from seasonvol import cir
from seasonvol.errors import ConfigError
from seasonvol.params import FactorParams
from seasonvol.pricing import (
    SpreadSpec,
    VanillaSpec,
    price_calendar_spread,
    price_european,
    price_european_grid,
)
from seasonvol.seasonality import Pattern, SeasonalitySpec

F0 = 100.0
RATE = 0.02
T, TM = 0.5, 0.75


@pytest.fixture(scope="module")
def factor():
    season = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.06, b=0.03, t0=7 / 12)
    return FactorParams(lam=0.25, kappa=1.5, sigma=0.25, rho=-0.3, v0=0.06, season=season)


class TestVanilla:
    def test_deep_in_the_money_degenerates_to_forward(self, factor):
        strike = 1e-3 * F0
        value = price_european(VanillaSpec(strike, T, TM, RATE), [factor], F0, n_steps=512)
        assert value == pytest.approx(math.exp(-RATE * T) * (F0 - strike), abs=1e-6 * F0)
        assert value == pytest.approx(math.exp(-RATE * T) * F0, rel=2e-3)

    def test_put_from_parity_is_exact(self, factor):
        strikes = np.array([85.0, 100.0, 115.0])
        call_spec = VanillaSpec(100.0, T, TM, RATE, is_call=True)
        put_spec = VanillaSpec(100.0, T, TM, RATE, is_call=False)
        calls = price_european_grid(strikes, call_spec, [factor], F0, n_steps=512)
        puts = price_european_grid(strikes, put_spec, [factor], F0, n_steps=512)
        parity = math.exp(-RATE * T) * (F0 - strikes)
        np.testing.assert_allclose(calls - puts, parity, rtol=0, atol=1e-12)

    def test_monotone_and_convex_in_strike(self, factor):
        strikes = np.linspace(60.0, 140.0, 33)
        calls = price_european_grid(
            strikes, VanillaSpec(100.0, T, TM, RATE), [factor], F0, n_steps=512
        )
        assert np.all(np.diff(calls) < 0.0)
        assert np.all(np.diff(calls, 2) > -1e-9)

    def test_no_arbitrage_band(self, factor):
        strikes = np.array([70.0, 95.0, 105.0, 130.0])
        calls = price_european_grid(
            strikes, VanillaSpec(100.0, T, TM, RATE), [factor], F0, n_steps=512
        )
        disc = math.exp(-RATE * T)
        assert np.all(calls >= disc * np.maximum(F0 - strikes, 0.0) - 1e-9)
        assert np.all(calls <= disc * F0 + 1e-9)

    def test_invalid_specs(self, factor):
        with pytest.raises(ConfigError):
            VanillaSpec(-1.0, T, TM)
        with pytest.raises(ConfigError):
            VanillaSpec(100.0, 0.5, 0.25)
        with pytest.raises(ConfigError):
            price_european(VanillaSpec(100.0, T, TM), [factor], -5.0)

    @pytest.mark.slow
    def test_matches_monte_carlo(self, factor):
        sample = cir.terminal_sample([factor], [TM], T, steps=256, n_paths=100_000, seed=7)
        terminal = F0 * np.exp(sample.log_ret[:, 0])
        disc = math.exp(-RATE * T)
        for strike in (90.0, 100.0, 110.0):
            payoff = disc * np.maximum(terminal - strike, 0.0)
            se = payoff.std(ddof=1) / math.sqrt(len(payoff))
            model = price_european(VanillaSpec(strike, T, TM, RATE), [factor], F0, n_steps=512)
            assert abs(model - payoff.mean()) < 3.0 * se


class TestSpread:
    def test_identical_legs_zero_strike_is_worthless(self, factor):
        spec = SpreadSpec(0.0, T, TM, TM, RATE)
        assert price_calendar_spread(spec, [factor], 100.0, 100.0) == pytest.approx(0.0, abs=1e-12)

    def test_strongly_negative_strike_prices_the_forward(self, factor):
        spec = SpreadSpec(-50.0, T, 0.75, 1.0, RATE)
        value = price_calendar_spread(spec, [factor], 100.0, 98.0, n_steps=512)
        forward = math.exp(-RATE * T) * (100.0 - 98.0 + 50.0)
        assert value == pytest.approx(forward, rel=1e-6)

    def test_monotone_decreasing_in_strike(self, factor):
        values = [
            price_calendar_spread(SpreadSpec(k, T, 0.75, 1.0, RATE), [factor], 100.0, 98.0,
                                  n_steps=512)
            for k in (-1.0, 0.0, 1.0, 2.5)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_maturity_order_validation(self, factor):
        with pytest.raises(ConfigError):
            SpreadSpec(0.0, 0.5, 0.25, 1.0)

    @pytest.mark.slow
    def test_matches_monte_carlo(self, factor):
        sample = cir.terminal_sample([factor], [0.75, 1.0], T, steps=256, n_paths=100_000, seed=9)
        f1 = 100.0 * np.exp(sample.log_ret[:, 0])
        f2 = 98.0 * np.exp(sample.log_ret[:, 1])
        disc = math.exp(-RATE * T)
        for strike in (0.0, 2.0):
            payoff = disc * np.maximum(f1 - f2 - strike, 0.0)
            se = payoff.std(ddof=1) / math.sqrt(len(payoff))
            spec = SpreadSpec(strike, T, 0.75, 1.0, RATE)
            model = price_calendar_spread(spec, [factor], 100.0, 98.0, n_steps=512)
            assert abs(model - payoff.mean()) < 3.0 * se
