import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.integrate import quad

from seasonvol.seasonality import Pattern, SeasonalitySpec, eval_theta, split_points

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def quad_transform_oracle(spec: SeasonalitySpec, T: float, lam: float) -> float:
    """Adaptive quadrature of theta(t) * exp(lam t) over [0, T], split at kinks."""
    cuts = split_points(spec, T)
    bounds = np.concatenate(([0.0], cuts, [T]))
    total = 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo < 1e-15:
            continue
        val, _ = quad(
            lambda t: eval_theta(spec, t) * np.exp(lam * t),
            lo,
            hi,
            limit=300,
            epsabs=1e-14,
            epsrel=1e-13,
        )
        total += val
    return total


@pytest.fixture
def base_factor():
    from seasonvol.params import FactorParams

    season = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.06, b=0.03, t0=7 / 12)
    return FactorParams(
        lam=0.25, kappa=1.5, sigma=0.25, rho=-0.3, v0=0.06, season=season, pi_f=0.5
    )


ALL_PATTERNS = list(Pattern)
SEASONAL_PATTERNS = [p for p in Pattern if p is not Pattern.CONSTANT]


def make_spec(pattern: Pattern, a=0.2, b=0.1, t0=7 / 12) -> SeasonalitySpec:
    if pattern is Pattern.CONSTANT:
        return SeasonalitySpec(pattern, a=a)
    if pattern is Pattern.SINUSOIDAL:
        return SeasonalitySpec(pattern, a=a, b=min(b, a), t0=t0)
    return SeasonalitySpec(pattern, a=a, b=b, t0=t0)
