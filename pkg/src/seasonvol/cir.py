"""Path simulation for the futures/variance SDE system.

The variance of each factor follows a square-root mean-reverting diffusion
whose mean level theta(t) is seasonal; futures log prices load on the factor
shocks with a maturity damping exp(-lam * (T_m - t)).  Discretisation is
Euler with full truncation: the raw state may dip below zero but only its
positive part enters drift and diffusion, and only the positive part is
reported.

A single 64-bit seed is expanded into independent per-chunk streams with
SeedSequence spawning on top of the counter-based Philox generator, so
results are reproducible for any worker count; paths are merged by index.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .params import FactorParams
from .seasonality import eval_theta, jump_times, theta_min as season_min

__all__ = [
    "SimPaths",
    "TerminalSample",
    "ComparisonReport",
    "simulate",
    "terminal_sample",
    "comparison_check",
    "dump_paths",
]

_CHUNK = 1 << 14


@dataclass
class SimPaths:
    """Full simulated grid: variance per factor and log futures price per contract."""

    times: np.ndarray        # (S+1,)
    v: np.ndarray            # (n_paths, n_factors, S+1), truncated >= 0
    log_f: np.ndarray        # (n_paths, n_contracts, S+1)
    maturities: np.ndarray   # (n_contracts,)
    measure: str
    seed: int


@dataclass
class TerminalSample:
    """Terminal-only simulation output for Monte Carlo estimators."""

    log_ret: np.ndarray      # (n_paths, n_contracts) log F(T,.)/F(0,.)
    v_end: np.ndarray        # (n_paths, n_factors)
    int_v: np.ndarray        # (n_paths, n_factors) integral of v dt over [0, T]
    horizon: float
    maturities: np.ndarray
    measure: str
    seed: int


@dataclass
class ComparisonReport:
    """Path-wise ordering check between a seasonal and a constant-level variance."""

    ok: bool
    n_paths: int
    n_steps: int
    n_violations: int
    worst_gap: float         # most negative (v - v_floor) observed
    tolerance: float


def _time_grid(horizon: float, steps: int, factors: Sequence[FactorParams]) -> np.ndarray:
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    grid = np.linspace(0.0, horizon, steps + 1)
    jumps = [jump_times(f.season, horizon) for f in factors]
    jumps = [j for j in jumps if j.size]
    if jumps:
        grid = np.union1d(grid, np.concatenate(jumps))
    return grid


def _spawn(seed: int, n_chunks: int):
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    return [np.random.Generator(np.random.Philox(s)) for s in children]


def _chunk_sizes(n_paths: int) -> list[int]:
    sizes = [_CHUNK] * (n_paths // _CHUNK)
    if n_paths % _CHUNK:
        sizes.append(n_paths % _CHUNK)
    return sizes


def _simulate_chunk(gen, n, factors, maturities, times, measure, record):
    n_f = len(factors)
    n_m = len(maturities)
    steps = len(times) - 1
    physical = measure == "P"

    v_raw = np.empty((n, n_f))
    for j, f in enumerate(factors):
        v_raw[:, j] = f.v0
    x = np.zeros((n, n_m))
    int_v = np.zeros((n, n_f))

    if record:
        v_out = np.empty((n, n_f, steps + 1))
        x_out = np.empty((n, n_m, steps + 1))
        v_out[:, :, 0] = np.maximum(v_raw, 0.0)
        x_out[:, :, 0] = 0.0
    else:
        v_out = x_out = None

    for k in range(steps):
        t = times[k]
        dt = times[k + 1] - times[k]
        sq_dt = math.sqrt(dt)
        for j, f in enumerate(factors):
            vp = np.maximum(v_raw[:, j], 0.0)
            sqv = np.sqrt(vp)
            dw_v = gen.standard_normal(n) * sq_dt
            dw_perp = gen.standard_normal(n) * sq_dt
            dw_f = f.rho * dw_v + math.sqrt(1.0 - f.rho ** 2) * dw_perp

            damp = np.exp(-f.lam * (maturities - t))      # (n_m,)
            drift = -0.5 * dt * np.outer(vp, damp ** 2)
            if physical:
                drift += f.pi_f * dt * np.outer(vp, damp)
            x += drift + (sqv * dw_f)[:, None] * damp[None, :]

            theta_t = eval_theta(f.season, t)
            dv = f.kappa * (theta_t - vp) * dt
            if physical:
                dv = dv + f.sigma * f.pi_v * vp * dt
            v_raw[:, j] += dv + f.sigma * sqv * dw_v
            int_v[:, j] += vp * dt
        if record:
            v_out[:, :, k + 1] = np.maximum(v_raw, 0.0)
            x_out[:, :, k + 1] = x
    return x, np.maximum(v_raw, 0.0), int_v, v_out, x_out


def _run_chunks(factors, maturities, horizon, steps, n_paths, measure, seed, threads, record):
    factors = tuple(factors)
    maturities = np.asarray(maturities, dtype=float)
    if measure not in ("Q", "P"):
        raise ConfigError(f"measure must be 'Q' or 'P', got {measure!r}")
    if horizon <= 0.0:
        raise ConfigError("horizon must be positive")
    if np.any(maturities < horizon):
        raise ConfigError("horizon exceeds a contract maturity")
    times = _time_grid(horizon, steps, factors)
    sizes = _chunk_sizes(n_paths)
    gens = _spawn(seed, len(sizes))

    def work(i):
        return _simulate_chunk(gens[i], sizes[i], factors, maturities, times, measure, record)

    if threads and threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(sizes))))
    else:
        results = [work(i) for i in range(len(sizes))]
    return times, results


def simulate(
    factors: Sequence[FactorParams],
    maturities,
    horizon: float,
    steps: int,
    n_paths: int,
    measure: str = "Q",
    seed: int = 0,
    threads: int | None = None,
) -> SimPaths:
    """Simulate full paths on a uniform grid aligned to seasonal jump times."""
    times, results = _run_chunks(
        factors, maturities, horizon, steps, n_paths, measure, seed, threads, record=True
    )
    v = np.concatenate([r[3] for r in results], axis=0)
    x = np.concatenate([r[4] for r in results], axis=0)
    return SimPaths(
        times=times,
        v=v,
        log_f=x,
        maturities=np.asarray(maturities, dtype=float),
        measure=measure,
        seed=seed,
    )


def terminal_sample(
    factors: Sequence[FactorParams],
    maturities,
    horizon: float,
    steps: int,
    n_paths: int,
    measure: str = "Q",
    seed: int = 0,
    threads: int | None = None,
) -> TerminalSample:
    """Simulate keeping only terminal log-returns, terminal variance and int v dt."""
    _, results = _run_chunks(
        factors, maturities, horizon, steps, n_paths, measure, seed, threads, record=False
    )
    return TerminalSample(
        log_ret=np.concatenate([r[0] for r in results], axis=0),
        v_end=np.concatenate([r[1] for r in results], axis=0),
        int_v=np.concatenate([r[2] for r in results], axis=0),
        horizon=horizon,
        maturities=np.asarray(maturities, dtype=float),
        measure=measure,
        seed=seed,
    )


def comparison_check(
    factor: FactorParams,
    theta_floor: float,
    n_paths: int,
    steps: int,
    seed: int = 0,
    horizon: float = 1.0,
    tilde_v0: float | None = None,
    tolerance: float = 1e-12,
) -> ComparisonReport:
    """Check path-wise that the seasonal variance dominates the constant-level one.

    Both processes share kappa, sigma and the driving increments; the floor
    process uses the constant level ``theta_floor`` and starts at ``tilde_v0``
    (default: same start).  Gaps more negative than ``-tolerance`` count as
    genuine violations; anything smaller is attributed to floating point.
    """
    if theta_floor <= 0.0:
        raise ConfigError("theta_floor must be positive")
    if theta_floor > season_min(factor.season) + 1e-12:
        raise ConfigError("theta_floor must lie below the seasonal level everywhere")
    v0_tilde = factor.v0 if tilde_v0 is None else tilde_v0
    if v0_tilde > factor.v0:
        raise ConfigError("the floor process must not start above the seasonal one")

    times = _time_grid(horizon, steps, [factor])
    kappa, sigma = factor.kappa, factor.sigma
    n_viol = 0
    worst = 0.0
    total_steps = 0
    for gen, n in zip(_spawn(seed, len(_chunk_sizes(n_paths))), _chunk_sizes(n_paths)):
        v = np.full(n, factor.v0)
        w = np.full(n, v0_tilde)
        for k in range(len(times) - 1):
            t = times[k]
            dt = times[k + 1] - times[k]
            dw = gen.standard_normal(n) * math.sqrt(dt)
            vp = np.maximum(v, 0.0)
            wp = np.maximum(w, 0.0)
            theta_t = eval_theta(factor.season, t)
            v = v + kappa * (theta_t - vp) * dt + sigma * np.sqrt(vp) * dw
            w = w + kappa * (theta_floor - wp) * dt + sigma * np.sqrt(wp) * dw
            gap = np.maximum(v, 0.0) - np.maximum(w, 0.0)
            worst = min(worst, float(gap.min()))
            n_viol += int(np.count_nonzero(gap < -tolerance))
            total_steps += 1
    return ComparisonReport(
        ok=n_viol == 0,
        n_paths=n_paths,
        n_steps=total_steps,
        n_violations=n_viol,
        worst_gap=worst,
        tolerance=tolerance,
    )


def dump_paths(paths: SimPaths, fileobj, header_comment: str | None = None) -> None:
    """Write paths as long-format CSV: time, path_id, factor, v, contract, logF."""
    writer = csv.writer(fileobj)
    if header_comment:
        fileobj.write(f"# {header_comment}\n")
    writer.writerow(["time", "path_id", "factor", "v", "contract", "logF"])
    n_paths, n_f, _ = paths.v.shape
    n_m = paths.log_f.shape[1]
    for s, t in enumerate(paths.times):
        for p in range(n_paths):
            for j in range(n_f):
                for m in range(n_m):
                    writer.writerow(
                        [f"{t:.10g}", p, j, f"{paths.v[p, j, s]:.12g}", m,
                         f"{paths.log_f[p, m, s]:.12g}"]
                    )
