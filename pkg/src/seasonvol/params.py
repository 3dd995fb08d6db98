"""Model parameter containers.

A factor is parameterised by the damping rate of futures shocks with time
to maturity (``lam``), the variance mean-reversion speed/vol-of-vol pair
(``kappa``, ``sigma``), the price/variance correlation ``rho``, the initial
variance ``v0``, a seasonal mean level, and the two market prices of risk
``pi_f`` (futures price risk) and ``pi_v`` (variance risk) linking the
risk-neutral and physical dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .seasonality import Pattern, SeasonalitySpec, theta_min

__all__ = ["FactorParams", "ModelParams"]


@dataclass(frozen=True)
class FactorParams:
    lam: float              # shock damping rate, 1/year, >= 0
    kappa: float            # variance mean-reversion speed, 1/year, > 0
    sigma: float            # vol of variance, > 0
    rho: float              # price/variance correlation, in (-1, 1)
    v0: float               # initial variance, > 0
    season: SeasonalitySpec
    pi_f: float = 0.0       # market price of futures-price risk
    pi_v: float = 0.0       # market price of variance risk

    def __post_init__(self) -> None:
        for name in ("lam", "kappa", "sigma", "rho", "v0", "pi_f", "pi_v"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"factor parameter {name} must be finite")
        if self.lam < 0.0:
            raise ConfigError(f"damping rate must be >= 0, got {self.lam}")
        if self.kappa <= 0.0 or self.sigma <= 0.0 or self.v0 <= 0.0:
            raise ConfigError("kappa, sigma and v0 must be positive")
        if not (-1.0 < self.rho < 1.0):
            raise ConfigError(f"correlation must lie in (-1, 1), got {self.rho}")

    @property
    def feller_ok(self) -> bool:
        """Whether sigma^2 < 2*kappa*theta_min, guaranteeing strict positivity."""
        return self.sigma ** 2 < 2.0 * self.kappa * theta_min(self.season)


@dataclass(frozen=True)
class ModelParams:
    """One-factor model plus per-contract-slot measurement-error st.devs.

    ``frozen`` names the fields excluded from any parameter search; ``pi_v``
    is frozen by default (it is not identified from futures data alone) and
    ``lam`` is frozen at zero for the no-damping nested model.
    """

    factor: FactorParams
    h: tuple[float, ...]
    frozen: frozenset[str] = field(default_factory=lambda: frozenset({"pi_v"}))

    def __post_init__(self) -> None:
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))
        object.__setattr__(self, "frozen", frozenset(self.frozen) | {"pi_v"})
        if len(self.h) == 0:
            raise ConfigError("at least one measurement-error st.dev is required")
        if any((not math.isfinite(x)) or x <= 0.0 for x in self.h):
            raise ConfigError("measurement-error st.devs must be positive")
        if "lam" in self.frozen and self.factor.lam != 0.0:
            raise ConfigError("a frozen damping rate must be zero")

    @property
    def k(self) -> int:
        return len(self.h)

    @property
    def n_free(self) -> int:
        return len(self.free_names)

    @property
    def free_names(self) -> tuple[str, ...]:
        """Ordered names of the optimised fields."""
        names = ["lam", "pi_f", "v0", "kappa", "sigma", "rho", "a"]
        if self.factor.season.pattern is not Pattern.CONSTANT:
            names += ["b", "t0"]
        names += [f"h{i + 1}" for i in range(self.k)]
        return tuple(n for n in names if n not in self.frozen)

    def with_factor(self, **kwargs) -> "ModelParams":
        season_keys = {k: v for k, v in kwargs.items() if k in ("a", "b", "t0")}
        factor_keys = {k: v for k, v in kwargs.items() if k not in ("a", "b", "t0")}
        season = replace(self.factor.season, **season_keys) if season_keys else self.factor.season
        return replace(self, factor=replace(self.factor, season=season, **factor_keys))
