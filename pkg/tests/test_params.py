import pytest

from seasonvol.errors import ConfigError
from seasonvol.params import FactorParams, ModelParams
from seasonvol.seasonality import Pattern, SeasonalitySpec


def factor(**kwargs):
    defaults = dict(
        lam=0.2,
        kappa=1.5,
        sigma=0.3,
        rho=-0.1,
        v0=0.08,
        season=SeasonalitySpec(Pattern.SINUSOIDAL, a=0.07, b=0.05, t0=0.3),
    )
    defaults.update(kwargs)
    return FactorParams(**defaults)


class TestFactorParams:
    @pytest.mark.parametrize(
        "field,value",
        [("kappa", 0.0), ("sigma", -0.1), ("v0", 0.0), ("rho", 1.0), ("rho", -1.0), ("lam", -0.01)],
    )
    def test_invalid_values_rejected(self, field, value):
        with pytest.raises(ConfigError):
            factor(**{field: value})

    def test_feller_flag(self):
        season = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.20, b=0.05, t0=0.3)
        assert factor(sigma=0.3, kappa=1.0, season=season).feller_ok  # 0.09 < 0.30
        assert not factor(sigma=0.6, kappa=1.0, season=season).feller_ok  # 0.36 > 0.30

    def test_feller_uses_seasonal_minimum(self):
        season = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.2, b=0.2, t0=0.3)  # min level 0
        assert not factor(sigma=0.01, kappa=5.0, season=season).feller_ok


class TestModelParams:
    def test_pi_v_always_frozen(self):
        p = ModelParams(factor=factor(), h=(0.01, 0.02), frozen=frozenset())
        assert "pi_v" in p.frozen

    def test_free_names_order_and_content(self):
        p = ModelParams(factor=factor(), h=(0.01, 0.02))
        assert p.free_names == (
            "lam", "pi_f", "v0", "kappa", "sigma", "rho", "a", "b", "t0", "h1", "h2"
        )
        assert p.n_free == 11

    def test_constant_family_drops_shape_fields(self):
        season = SeasonalitySpec(Pattern.CONSTANT, a=0.07)
        p = ModelParams(factor=factor(season=season), h=(0.01,))
        assert "b" not in p.free_names and "t0" not in p.free_names
        assert p.n_free == 8

    def test_frozen_lambda_must_be_zero(self):
        with pytest.raises(ConfigError):
            ModelParams(factor=factor(lam=0.2), h=(0.01,), frozen=frozenset({"lam"}))
        p = ModelParams(factor=factor(lam=0.0), h=(0.01,), frozen=frozenset({"lam"}))
        assert "lam" not in p.free_names

    def test_h_must_be_positive(self):
        with pytest.raises(ConfigError):
            ModelParams(factor=factor(), h=(0.01, 0.0))
        with pytest.raises(ConfigError):
            ModelParams(factor=factor(), h=())

    def test_with_factor_updates_nested_season(self):
        p = ModelParams(factor=factor(), h=(0.01,))
        q = p.with_factor(a=0.09, lam=0.4)
        assert q.factor.season.a == 0.09
        assert q.factor.lam == 0.4
        assert q.factor.season.b == p.factor.season.b
