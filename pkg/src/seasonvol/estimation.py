"""Maximum-likelihood estimation and model selection.

Parameters are optimised in an unconstrained space: strictly positive
fields map through log, the correlation maps through tan(pi rho / 2), the
peak phase through tan(pi (t0 - 1/2)); where the sinusoidal pattern
requires b <= a, the ratio b/a maps through the same tangent map.  The
market price of futures risk is unconstrained already.

The likelihood is maximised by simulated annealing (geometric cooling,
coordinate-cycling proposals with step sizes adapted toward a target
acceptance rate, random restarts, optional derivative-free polish), and
standard errors come from the inverse negative Hessian of the
log-likelihood in the unconstrained space via central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import chi2

from .data import ObservationSeries
from .errors import ConfigError, ConvergenceError, NumericalError
from .kalman import run_filter
from .params import FactorParams, ModelParams
from .seasonality import Pattern, SeasonalitySpec
from .statespace import ObservationMode

__all__ = [
    "FitOptions",
    "FitReport",
    "LrTestResult",
    "ModelRanking",
    "transform_params",
    "inverse_transform",
    "aic",
    "bic",
    "fit",
    "lr_tests",
    "rank_models",
    "default_init",
]

_PENALTY = 1e12


# ---------------------------------------------------------------------------
# unconstrained reparameterisation


def _to_real(name: str, p: ModelParams) -> float:
    f = p.factor
    s = f.season
    if name == "lam":
        if f.lam <= 0.0:
            raise ConfigError("free damping rate must be positive to transform")
        return math.log(f.lam)
    if name == "pi_f":
        return f.pi_f
    if name == "v0":
        return math.log(f.v0)
    if name == "kappa":
        return math.log(f.kappa)
    if name == "sigma":
        return math.log(f.sigma)
    if name == "rho":
        return math.tan(0.5 * math.pi * f.rho)
    if name == "a":
        return math.log(s.a)
    if name == "b":
        if s.pattern is Pattern.SINUSOIDAL:
            ratio = s.b / s.a
            if not (0.0 < ratio < 1.0):
                raise ConfigError("sinusoidal magnitude must satisfy 0 < b < a to transform")
            return math.tan(math.pi * (ratio - 0.5))
        return math.log(s.b)
    if name == "t0":
        if not (0.0 < s.t0 < 1.0):
            raise ConfigError("peak phase must lie strictly inside (0, 1) to transform")
        return math.tan(math.pi * (s.t0 - 0.5))
    if name.startswith("h"):
        return math.log(p.h[int(name[1:]) - 1])
    raise ConfigError(f"unknown parameter {name!r}")


def transform_params(p: ModelParams) -> np.ndarray:
    """Map the free parameters to the unconstrained space, in free_names order."""
    return np.array([_to_real(name, p) for name in p.free_names])


def inverse_transform(z, template: ModelParams) -> ModelParams:
    """Rebuild a full parameter set from an unconstrained vector.

    Frozen fields keep their template values.  Inverse of transform_params:
    round-trips to machine precision.
    """
    z = np.asarray(z, dtype=float)
    names = template.free_names
    if z.shape != (len(names),):
        raise ConfigError(f"expected a vector of length {len(names)}, got shape {z.shape}")
    values = dict(zip(names, z))
    f = template.factor
    s = f.season

    a = math.exp(values["a"]) if "a" in values else s.a
    if "b" in values:
        if s.pattern is Pattern.SINUSOIDAL:
            b = a * (0.5 + math.atan(values["b"]) / math.pi)
        else:
            b = math.exp(values["b"])
    else:
        b = s.b
    t0 = (0.5 + math.atan(values["t0"]) / math.pi) if "t0" in values else s.t0
    season = SeasonalitySpec(s.pattern, a=a, b=b, t0=t0)

    factor = FactorParams(
        lam=math.exp(values["lam"]) if "lam" in values else f.lam,
        kappa=math.exp(values["kappa"]) if "kappa" in values else f.kappa,
        sigma=math.exp(values["sigma"]) if "sigma" in values else f.sigma,
        rho=(2.0 / math.pi) * math.atan(values["rho"]) if "rho" in values else f.rho,
        v0=math.exp(values["v0"]) if "v0" in values else f.v0,
        season=season,
        pi_f=values.get("pi_f", f.pi_f),
        pi_v=f.pi_v,
    )
    h = tuple(
        math.exp(values[f"h{i + 1}"]) if f"h{i + 1}" in values else template.h[i]
        for i in range(template.k)
    )
    return replace(template, factor=factor, h=h)


def aic(loglik: float, n_free: int) -> float:
    return 2.0 * n_free - 2.0 * loglik


def bic(loglik: float, n_free: int, n_obs: int) -> float:
    return n_free * math.log(n_obs) - 2.0 * loglik


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class FitOptions:
    seed: int
    restarts: int = 3
    stages: int = 24
    trials_per_dim: int = 20
    cooling: float = 0.85
    initial_temperature: float | None = None
    step_init: float = 0.4
    acceptance_band: tuple[float, float] = (0.3, 0.5)
    idle_stages: int = 5
    improvement_tol: float = 1e-6
    polish: bool = True
    polish_maxiter: int = 6000
    hessian_step: float = 1e-4
    freeze_lambda: bool = False
    init: ModelParams | None = None
    mode: ObservationMode | None = None


@dataclass
class FitReport:
    family: str
    mode: str
    loglik: float
    n_free: int
    n_obs: int
    k: int
    aic: float
    bic: float
    params: ModelParams
    free_names: tuple[str, ...]
    z: np.ndarray
    se: np.ndarray
    seed: int
    diagnostics: dict = field(default_factory=dict)

    def natural_values(self) -> dict[str, float]:
        p = self.params
        f = p.factor
        s = f.season
        out = {
            "lam": f.lam, "pi_f": f.pi_f, "v0": f.v0, "kappa": f.kappa,
            "sigma": f.sigma, "rho": f.rho, "a": s.a, "b": s.b, "t0": s.t0,
            "pi_v": f.pi_v,
        }
        for i, h in enumerate(p.h):
            out[f"h{i + 1}"] = h
        return out

    def to_text(self) -> str:
        lines = [
            f"family={self.family}",
            f"mode={self.mode}",
            f"seed={self.seed}",
            f"loglik={float(self.loglik)!r}",
            f"n_free={self.n_free}",
            f"n_obs={self.n_obs}",
            f"k={self.k}",
            f"aic={float(self.aic)!r}",
            f"bic={float(self.bic)!r}",
            f"frozen={','.join(sorted(self.params.frozen))}",
        ]
        nat = self.natural_values()
        se_map = dict(zip(self.free_names, self.se))
        z_map = dict(zip(self.free_names, self.z))
        for name, value in nat.items():
            lines.append(f"param.{name}={float(value)!r}")
            if name in z_map:
                lines.append(f"real.{name}={float(z_map[name])!r}")
                lines.append(f"se.{name}={float(se_map[name])!r}")
        for key in sorted(self.diagnostics):
            lines.append(f"diag.{key}={self.diagnostics[key]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FitReport":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, value = line.split("=", 1)
            kv[key] = value
        family = kv["family"]
        nat = {k[6:]: float(v) for k, v in kv.items() if k.startswith("param.")}
        h = tuple(nat[f"h{i}"] for i in range(1, 1 + sum(1 for k in nat if k.startswith("h"))))
        frozen = frozenset(x for x in kv.get("frozen", "").split(",") if x)
        season = SeasonalitySpec(
            Pattern(family),
            a=nat["a"],
            b=nat.get("b", 0.0),
            t0=nat.get("t0", 0.0),
        )
        factor = FactorParams(
            lam=nat["lam"], kappa=nat["kappa"], sigma=nat["sigma"], rho=nat["rho"],
            v0=nat["v0"], season=season, pi_f=nat["pi_f"], pi_v=nat.get("pi_v", 0.0),
        )
        params = ModelParams(factor=factor, h=h, frozen=frozen)
        free_names = params.free_names
        z = np.array([float(kv.get(f"real.{n}", "nan")) for n in free_names])
        se = np.array([float(kv.get(f"se.{n}", "nan")) for n in free_names])
        return cls(
            family=family,
            mode=kv.get("mode", ""),
            loglik=float(kv["loglik"]),
            n_free=int(kv["n_free"]),
            n_obs=int(kv["n_obs"]),
            k=int(kv["k"]),
            aic=float(kv["aic"]),
            bic=float(kv["bic"]),
            params=params,
            free_names=free_names,
            z=z,
            se=se,
            seed=int(kv.get("seed", "0")),
        )


def default_init(
    obs: ObservationSeries, pattern: Pattern, freeze_lambda: bool = False
) -> ModelParams:
    """Data-driven starting point: scales from return moments, neutral shape values."""
    usable = obs.valid & ~obs.zero_mask
    values = np.where(usable, obs.values, np.nan)
    if obs.mode is ObservationMode.LOG_PRICES:
        values = np.diff(values, axis=0)
    dt_med = float(np.median(np.diff(obs.times))) if obs.n_dates > 1 else 1.0 / 252.0
    with np.errstate(all="ignore"):
        slot_var = np.nanvar(values, axis=0) / dt_med
        slot_sd = np.nanstd(values, axis=0)
    ttm = np.nanmean(np.where(usable, obs.maturities - obs.times[:, None], np.nan), axis=0)
    front = int(np.nanargmin(ttm)) if np.any(np.isfinite(ttm)) else 0
    vbar = float(slot_var[front]) if np.isfinite(slot_var[front]) else 0.04
    vbar = min(max(vbar, 1e-4), 4.0)

    pattern = Pattern(pattern)
    if pattern is Pattern.CONSTANT:
        season = SeasonalitySpec(pattern, a=vbar)
    elif pattern is Pattern.EXP_SINUSOIDAL:
        season = SeasonalitySpec(pattern, a=vbar / math.exp(0.25), b=0.5, t0=0.5)
    else:
        season = SeasonalitySpec(pattern, a=vbar, b=0.4 * vbar, t0=0.5)
    kappa0 = 1.5
    sigma0 = 0.5 * math.sqrt(2.0 * kappa0 * 0.5 * vbar)
    factor = FactorParams(
        lam=0.0 if freeze_lambda else 0.25,
        kappa=kappa0,
        sigma=max(sigma0, 1e-3),
        rho=0.0,
        v0=vbar,
        season=season,
        pi_f=0.0,
        pi_v=0.0,
    )
    h = tuple(float(max(0.25 * s, 1e-5)) if np.isfinite(s) else 1e-3 for s in slot_sd)
    frozen = frozenset({"pi_v", "lam"}) if freeze_lambda else frozenset({"pi_v"})
    return ModelParams(factor=factor, h=h, frozen=frozen)


def _make_objective(obs: ObservationSeries, template: ModelParams, mode):
    def objective(z: np.ndarray) -> float:
        try:
            p = inverse_transform(z, template)
            out = run_filter(obs, p, mode=mode)
        except (ConfigError, NumericalError, OverflowError, FloatingPointError):
            return _PENALTY
        return -out.loglik

    return objective


def _anneal(objective, z0, rng, opts: FitOptions):
    dim = len(z0)
    w = np.full(dim, opts.step_init)
    z = z0.copy()
    fz = objective(z)
    best_z, best_f = z.copy(), fz
    n_evals = 1
    accepted_any = False

    if opts.initial_temperature is not None:
        temp = opts.initial_temperature
    else:
        deltas = []
        for _ in range(2 * dim):
            zc = z + w * (2.0 * rng.random(dim) - 1.0)
            fc = objective(zc)
            n_evals += 1
            if fc < _PENALTY and fz < _PENALTY:
                deltas.append(abs(fc - fz))
        temp = 5.0 * float(np.median(deltas)) + 1.0 if deltas else 1.0

    lo_acc, hi_acc = opts.acceptance_band
    idle = 0
    stages_run = 0
    for _stage in range(opts.stages):
        stages_run += 1
        prev_best = best_f
        acc = np.zeros(dim)
        tries = np.zeros(dim)
        for trial in range(opts.trials_per_dim * dim):
            j = trial % dim
            zc = z.copy()
            zc[j] += w[j] * (2.0 * rng.random() - 1.0)
            fc = objective(zc)
            n_evals += 1
            tries[j] += 1
            if fc <= fz or rng.random() < math.exp(min(0.0, -(fc - fz) / temp)):
                z, fz = zc, fc
                acc[j] += 1
                accepted_any = True
                if fc < best_f:
                    best_f, best_z = fc, zc.copy()
        rate = acc / np.maximum(tries, 1.0)
        for j in range(dim):
            if rate[j] > hi_acc:
                w[j] *= 1.0 + 2.0 * (rate[j] - hi_acc) / (1.0 - hi_acc)
            elif rate[j] < lo_acc:
                w[j] /= 1.0 + 2.0 * (lo_acc - rate[j]) / lo_acc
        np.clip(w, 1e-7, 20.0, out=w)
        z, fz = best_z.copy(), best_f
        temp *= opts.cooling
        idle = idle + 1 if prev_best - best_f < opts.improvement_tol else 0
        if idle >= opts.idle_stages:
            break
    return {
        "z": best_z,
        "f": best_f,
        "n_evals": n_evals,
        "stages": stages_run,
        "moved": accepted_any,
    }


def _hessian(objective, z, rel_step):
    dim = len(z)
    h = rel_step * np.maximum(np.abs(z), 1.0)
    f0 = objective(z)
    hess = np.empty((dim, dim))
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = h[i]
        fp = objective(z + ei)
        fm = objective(z - ei)
        hess[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
    for i in range(dim):
        for j in range(i + 1, dim):
            ei = np.zeros(dim)
            ej = np.zeros(dim)
            ei[i] = h[i]
            ej[j] = h[j]
            fpp = objective(z + ei + ej)
            fpm = objective(z + ei - ej)
            fmp = objective(z - ei + ej)
            fmm = objective(z - ei - ej)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return hess


def fit(
    obs: ObservationSeries,
    pattern: Pattern | str,
    options: FitOptions,
) -> FitReport:
    """Maximise the filter log-likelihood over the chosen seasonality family.

    Deterministic for a fixed seed and options.  Raises ConvergenceError if
    no annealing restart accepts a single move.
    """
    pattern = Pattern(pattern)
    mode = options.mode or obs.mode
    template = options.init or default_init(obs, pattern, options.freeze_lambda)
    if template.factor.season.pattern is not pattern:
        raise ConfigError("initial parameters disagree with the requested family")
    objective = _make_objective(obs, template, mode)
    z0 = transform_params(template)
    dim = len(z0)

    results = []
    total_evals = 0
    for r in range(options.restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([options.seed, r])))
        z_start = z0 if r == 0 else z0 + 0.5 * rng.standard_normal(dim)
        res = _anneal(objective, np.asarray(z_start, dtype=float), rng, options)
        total_evals += res["n_evals"]
        results.append(res)

    if not any(res["moved"] for res in results):
        raise ConvergenceError(
            "simulated annealing accepted no moves in any restart; "
            f"{total_evals} evaluations, best objective {min(r['f'] for r in results):.6g}"
        )
    best = min(range(len(results)), key=lambda i: (results[i]["f"], i))
    z_best = results[best]["z"]
    f_best = results[best]["f"]

    polish_delta = 0.0
    if options.polish:
        res = minimize(
            objective,
            z_best,
            method="Nelder-Mead",
            options={
                "maxiter": options.polish_maxiter,
                "maxfev": options.polish_maxiter,
                "xatol": 1e-7,
                "fatol": 1e-9,
            },
        )
        total_evals += res.nfev
        if np.isfinite(res.fun) and res.fun < f_best:
            polish_delta = f_best - res.fun
            z_best, f_best = res.x, res.fun

    if f_best >= _PENALTY:
        raise ConvergenceError("every parameter vector visited was infeasible")

    hess = _hessian(objective, z_best, options.hessian_step)
    total_evals += 1 + 2 * dim + 2 * dim * (dim - 1)
    se = np.full(dim, np.nan)
    try:
        cov = np.linalg.inv(hess)
        diag = np.diag(cov)
        se = np.where(diag > 0.0, np.sqrt(np.abs(diag)), np.nan)
    except np.linalg.LinAlgError:
        pass

    params_hat = inverse_transform(z_best, template)
    loglik = -f_best
    n_obs = obs.n_dates
    return FitReport(
        family=pattern.value,
        mode=ObservationMode(mode).value,
        loglik=loglik,
        n_free=dim,
        n_obs=n_obs,
        k=template.k,
        aic=aic(loglik, dim),
        bic=bic(loglik, dim, n_obs),
        params=params_hat,
        free_names=template.free_names,
        z=np.asarray(z_best, dtype=float),
        se=se,
        seed=options.seed,
        diagnostics={
            "n_evals": total_evals,
            "restart_values": ",".join(f"{r['f']:.6f}" for r in results),
            "best_restart": best,
            "polish_delta": f"{polish_delta:.6f}",
            "stages": ",".join(str(r["stages"]) for r in results),
        },
    )


# ---------------------------------------------------------------------------
# model comparison


@dataclass
class LrTestResult:
    d1: float
    p1: float
    d2: float
    p2: float

    def to_csv(self) -> str:
        return (
            "statistic,value,p_value\n"
            f"D1,{self.d1:.6f},{self.p1:.4f}\n"
            f"D2,{self.d2:.6f},{self.p2:.4f}\n"
        )


def lr_tests(
    seasonal: FitReport, nonseasonal: FitReport, nolambda: FitReport
) -> LrTestResult:
    """Likelihood-ratio statistics for seasonality (2 df) and shock damping (1 df).

    The inputs must be nested fits of the same series: the non-seasonal fit
    uses the constant family, and the no-damping fit is the seasonal family
    with the damping rate frozen at zero.
    """
    if Pattern(seasonal.family) is Pattern.CONSTANT:
        raise ConfigError("the first report must be a seasonal-family fit")
    if Pattern(nonseasonal.family) is not Pattern.CONSTANT:
        raise ConfigError("the second report must be a constant-family fit")
    if nolambda.family != seasonal.family:
        raise ConfigError("the no-damping report must use the same seasonal family")
    if "lam" not in nolambda.params.frozen:
        raise ConfigError("the no-damping report must have the damping rate frozen")
    if "lam" in seasonal.params.frozen:
        raise ConfigError("the seasonal report must estimate the damping rate")
    for other in (nonseasonal, nolambda):
        if other.n_obs != seasonal.n_obs or other.k != seasonal.k:
            raise ConfigError("reports compare fits of different panels")
    d1 = 2.0 * (seasonal.loglik - nonseasonal.loglik)
    d2 = 2.0 * (seasonal.loglik - nolambda.loglik)
    return LrTestResult(
        d1=d1,
        p1=float(chi2.sf(d1, 2)),
        d2=d2,
        p2=float(chi2.sf(d2, 1)),
    )


@dataclass
class RankRow:
    rank: int
    family: str
    loglik: float
    n_free: int
    aic: float
    bic: float
    delta_aic: float
    weight: float


@dataclass
class ModelRanking:
    rows: list[RankRow]

    def to_csv(self) -> str:
        lines = ["rank,family,loglik,n_free,aic,bic,delta_aic,akaike_weight"]
        for r in self.rows:
            lines.append(
                f"{r.rank},{r.family},{r.loglik:.4f},{r.n_free},{r.aic:.4f},"
                f"{r.bic:.4f},{r.delta_aic:.4f},{r.weight:.4f}"
            )
        return "\n".join(lines) + "\n"


def rank_models(reports: list[FitReport]) -> ModelRanking:
    """Rank fits of one panel by AIC with gaps and normalised evidence weights."""
    if not reports:
        raise ConfigError("at least one report is required")
    n_obs = {r.n_obs for r in reports}
    ks = {r.k for r in reports}
    if len(n_obs) > 1 or len(ks) > 1:
        raise ConfigError("reports must come from the same panel")
    order = sorted(range(len(reports)), key=lambda i: (reports[i].aic, i))
    best_aic = reports[order[0]].aic
    deltas = [reports[i].aic - best_aic for i in order]
    raw = np.exp(-0.5 * np.asarray(deltas))
    weights = raw / raw.sum()
    rows = [
        RankRow(
            rank=pos + 1,
            family=reports[i].family,
            loglik=reports[i].loglik,
            n_free=reports[i].n_free,
            aic=reports[i].aic,
            bic=reports[i].bic,
            delta_aic=deltas[pos],
            weight=float(weights[pos]),
        )
        for pos, i in enumerate(order)
    ]
    return ModelRanking(rows=rows)
