"""Synthetic rolling futures panels for experiments and round-trip studies.

The factor state (damped shock integral, damped variance integral,
instantaneous variance) is simulated under the physical measure with the
same Euler/full-truncation stepping used everywhere else, and every
contract on a maturity ladder is priced from the exact log-price identity

    ln F(t, T_m) = ln F(0, T_m) + e^{-lam (T_m - t)} s1(t)
                   - e^{-2 lam (T_m - t)} s2(t) / 2.

Simulating the shared state rather than each contract's own equation lets
the panel outlive any individual contract, which a rolling panel must.
Gaussian measurement noise with the model's per-slot standard deviations
is added to observed log prices.
"""

from __future__ import annotations

import math

import numpy as np

from .data import DAYS_PER_YEAR, FuturesPanel
from .errors import ConfigError
from .params import ModelParams
from .seasonality import eval_theta

__all__ = ["synthetic_panel"]


def synthetic_panel(
    model: ModelParams,
    n_dates: int,
    spacing: float = 1.0 / 6.0,
    min_ttm: float = 0.02,
    start: str = "2015-01-05",
    seed: int = 0,
    base_price: float = 100.0,
) -> FuturesPanel:
    """Simulate a rolling panel with as many slots as the model has noise terms."""
    n_slots = model.k
    if n_dates < 2:
        raise ConfigError("a panel needs at least two dates")

    start64 = np.datetime64(start, "D")
    dates = np.busday_offset(start64, np.arange(n_dates), roll="forward")
    times = (dates - dates[0]).astype("timedelta64[D]").astype(float) / DAYS_PER_YEAR
    horizon = float(times[-1])

    f = model.factor
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))

    s1 = np.zeros(n_dates)
    s2 = np.zeros(n_dates)
    v = np.zeros(n_dates)
    v_raw = f.v0
    v[0] = f.v0
    rho_c = math.sqrt(1.0 - f.rho ** 2)
    for i in range(1, n_dates):
        dt = times[i] - times[i - 1]
        sq = math.sqrt(dt)
        vp = max(v_raw, 0.0)
        dw_v = rng.standard_normal() * sq
        dw_f = f.rho * dw_v + rho_c * rng.standard_normal() * sq
        s1[i] = s1[i - 1] + (-f.lam * s1[i - 1] + f.pi_f * vp) * dt + math.sqrt(vp) * dw_f
        s2[i] = s2[i - 1] + (-2.0 * f.lam * s2[i - 1] + vp) * dt
        theta_t = eval_theta(f.season, times[i - 1])
        v_raw = v_raw + (f.kappa * (theta_t - vp) + f.sigma * f.pi_v * vp) * dt \
            + f.sigma * math.sqrt(vp) * dw_v
        v[i] = max(v_raw, 0.0)

    first_mat = min_ttm + spacing
    n_contracts = int(np.ceil((horizon + (n_slots + 1) * spacing + min_ttm) / spacing)) + 1
    ladder = first_mat + spacing * np.arange(n_contracts)
    mat_days = dates[0] + np.round(ladder * DAYS_PER_YEAR).astype(int)

    noise = rng.standard_normal((n_dates, n_slots)) * np.asarray(model.h)[None, :]
    prices = np.full((n_dates, n_slots), np.nan)
    maturities = np.full((n_dates, n_slots), np.datetime64("NaT"), dtype="datetime64[D]")
    log_base = math.log(base_price)
    for i in range(n_dates):
        live = np.nonzero(ladder - times[i] >= min_ttm)[0]
        take = live[:n_slots]
        ttm = ladder[take] - times[i]
        damp = np.exp(-f.lam * ttm)
        log_f = log_base + damp * s1[i] - 0.5 * damp * damp * s2[i]
        prices[i, : len(take)] = np.exp(log_f + noise[i, : len(take)])
        maturities[i, : len(take)] = mat_days[take]

    slots = tuple(f"c{j + 1}" for j in range(n_slots))
    return FuturesPanel(dates=dates, slots=slots, prices=prices, maturities=maturities)
