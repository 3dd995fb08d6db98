"""Command-line interface.

Subcommands: simulate, cf, price, estimate, test, rank, summarize,
export-states.  Model parameters are read from a flat INI file with a
[model] section (plus optional [model2], [model3], ... for extra factors in
pricing and simulation) and a [measurement] section holding the
per-contract-slot error standard deviations.

All outputs are CSV; without --out they go to stdout.  Artifacts produced
by stochastic subcommands carry a header line with the seed and a hash of
the parameter file.  Exit codes: 1 configuration error, 2 numerical
failure, 3 non-convergence; failures print one machine-readable line on
stderr: ``error code=<kind> message=<text>``.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import cir, data, estimation, kalman, pricing
from .charfn import DEFAULT_STEPS, joint_cf_grid, single_cf_grid
from .errors import ConfigError, ConvergenceError, NumericalError
from .params import FactorParams, ModelParams
from .seasonality import Pattern, SeasonalitySpec
from .statespace import ObservationMode

__all__ = ["main"]


def _config_hash(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _read_factor(section) -> FactorParams:
    def need(key):
        if key not in section:
            raise ConfigError(f"parameter file is missing '{key}'")
        return float(section[key])

    pattern = Pattern(section.get("pattern", "constant"))
    season = SeasonalitySpec(
        pattern,
        a=need("a"),
        b=float(section.get("b", "0")),
        t0=float(section.get("t0", "0")),
    )
    return FactorParams(
        lam=need("lambda"),
        kappa=need("kappa"),
        sigma=need("sigma"),
        rho=need("rho"),
        v0=need("v0"),
        season=season,
        pi_f=float(section.get("pi_f", "0")),
        pi_v=float(section.get("pi_v", "0")),
    )


def read_factors(path: str) -> list[FactorParams]:
    cfg = configparser.ConfigParser()
    if not cfg.read(path):
        raise ConfigError(f"cannot read parameter file {path}")
    if "model" not in cfg:
        raise ConfigError(f"{path}: missing [model] section")
    factors = [_read_factor(cfg["model"])]
    i = 2
    while f"model{i}" in cfg:
        factors.append(_read_factor(cfg[f"model{i}"]))
        i += 1
    return factors


def read_model(path: str) -> ModelParams:
    cfg = configparser.ConfigParser()
    if not cfg.read(path):
        raise ConfigError(f"cannot read parameter file {path}")
    factor = _read_factor(cfg["model"])
    if "measurement" not in cfg or "h" not in cfg["measurement"]:
        raise ConfigError(f"{path}: missing [measurement] h = ... entry")
    h = tuple(float(x) for x in cfg["measurement"]["h"].replace(",", " ").split())
    frozen = {"pi_v"}
    if factor.lam == 0.0 and cfg["model"].getboolean("freeze_lambda", fallback=False):
        frozen.add("lam")
    return ModelParams(factor=factor, h=h, frozen=frozenset(frozen))


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _emit(text: str, out_dir: str | None, filename: str) -> None:
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        Path(out_dir, filename).write_text(text)
    else:
        sys.stdout.write(text)


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SEASONVOL_THREADS")
    return int(env) if env else None


_MODES = {
    "returns": ObservationMode.LOG_RETURNS,
    "prices": ObservationMode.LOG_PRICES,
    "cm": ObservationMode.CM_RETURNS,
}


def _load_series(args):
    panel = data.ingest(args.data)
    mode = _MODES[args.mode]
    if mode is ObservationMode.LOG_PRICES:
        return data.to_log_prices(panel)
    if mode is ObservationMode.CM_RETURNS:
        if not args.cm_tenors:
            raise ConfigError("constant-maturity mode requires --cm-tenors")
        return data.to_constant_maturity(panel, _floats(args.cm_tenors))
    return data.to_returns(panel)


def _cmd_simulate(args) -> int:
    factors = read_factors(args.params)
    paths = cir.simulate(
        factors,
        _floats(args.maturities),
        horizon=args.horizon,
        steps=args.steps,
        n_paths=args.paths,
        measure=args.measure.upper(),
        seed=args.seed,
        threads=_threads(args),
    )
    buf = io.StringIO()
    cir.dump_paths(paths, buf, header_comment=f"seed={args.seed} config={_config_hash(args.params)}")
    _emit(buf.getvalue(), args.out, "paths.csv")
    return 0


def _cmd_cf(args) -> int:
    factors = read_factors(args.params)
    u = np.linspace(args.umin, args.umax, args.n)
    if args.T2 is not None:
        vals = joint_cf_grid(
            u, np.full_like(u, args.u2), args.T, args.T1, args.T2, factors, n_steps=args.ode_steps
        )
    else:
        vals = single_cf_grid(u, args.T, args.T1, factors, f0=args.f0, n_steps=args.ode_steps)
    lines = ["u,re,im,abs"]
    lines += [f"{x:.10g},{v.real:.12g},{v.imag:.12g},{abs(v):.12g}" for x, v in zip(u, vals)]
    _emit("\n".join(lines) + "\n", args.out, "cf.csv")
    return 0


def _cmd_price(args) -> int:
    factors = read_factors(args.params)
    strikes = _floats(args.strikes)
    lines = ["strike,price"]
    if args.product in ("call", "put"):
        spec = pricing.VanillaSpec(
            strike=strikes[0], T=args.T, T_m=args.T1, rate=args.rate,
            is_call=args.product == "call",
        )
        values = pricing.price_european_grid(
            np.asarray(strikes), spec, factors, args.f0, n_steps=args.ode_steps
        )
        lines += [f"{k:.10g},{v:.10g}" for k, v in zip(strikes, values)]
    else:
        if args.T2 is None or args.f0_2 is None:
            raise ConfigError("spread pricing requires --T2 and --f0-2")
        for k in strikes:
            spec = pricing.SpreadSpec(strike=k, T=args.T, T1=args.T1, T2=args.T2, rate=args.rate)
            v = pricing.price_calendar_spread(spec, factors, args.f0, args.f0_2,
                                              n_steps=args.ode_steps)
            lines.append(f"{k:.10g},{v:.10g}")
    _emit("\n".join(lines) + "\n", args.out, "prices.csv")
    return 0


def _cmd_estimate(args) -> int:
    obs = _load_series(args)
    options = estimation.FitOptions(
        seed=args.seed,
        restarts=args.restarts,
        stages=args.stages,
        trials_per_dim=args.trials_per_dim,
        polish=not args.no_polish,
        freeze_lambda=args.freeze_lambda,
        init=read_model(args.params) if args.params else None,
    )
    report = estimation.fit(obs, Pattern(args.family), options)
    header = f"# seed={args.seed} config={_config_hash(args.data)}\n"
    _emit(header + report.to_text(), args.out, "report.txt")
    if args.out:
        rows = ["name,value,real,se"]
        z = dict(zip(report.free_names, report.z))
        se = dict(zip(report.free_names, report.se))
        for name, value in report.natural_values().items():
            rows.append(
                f"{name},{value!r},{z.get(name, float('nan'))!r},{se.get(name, float('nan'))!r}"
            )
        _emit(header + "\n".join(rows) + "\n", args.out, "params.csv")
    return 0


def _load_report(path: str) -> estimation.FitReport:
    return estimation.FitReport.from_text(Path(path).read_text())


def _cmd_test(args) -> int:
    by_numbers = args.ll_seasonal is not None
    if by_numbers:
        if args.ll_nonseasonal is None or args.ll_nolambda is None:
            raise ConfigError("provide all three --ll-* log-likelihoods")
        from scipy.stats import chi2

        d1 = 2.0 * (args.ll_seasonal - args.ll_nonseasonal)
        d2 = 2.0 * (args.ll_seasonal - args.ll_nolambda)
        result = estimation.LrTestResult(
            d1=d1, p1=float(chi2.sf(d1, 2)), d2=d2, p2=float(chi2.sf(d2, 1))
        )
    else:
        if not (args.seasonal and args.nonseasonal and args.nolambda):
            raise ConfigError("provide report files or the three --ll-* values")
        result = estimation.lr_tests(
            _load_report(args.seasonal),
            _load_report(args.nonseasonal),
            _load_report(args.nolambda),
        )
    _emit(result.to_csv(), args.out, "lr_tests.csv")
    return 0


def _cmd_rank(args) -> int:
    reports = [_load_report(p) for p in args.reports]
    ranking = estimation.rank_models(reports)
    _emit(ranking.to_csv(), args.out, "ranking.csv")
    return 0


def _cmd_summarize(args) -> int:
    panel = data.ingest(args.data)
    summary = data.summarize(panel)
    text = (
        summary.overview_csv() + "\n" + summary.slot_vol_csv() + "\n" + summary.month_vol_csv()
    )
    _emit(text, args.out, "summary.csv")
    return 0


def _cmd_export_states(args) -> int:
    obs = _load_series(args)
    model = _load_report(args.report).params if args.report.endswith(".txt") else read_model(args.report)
    out = kalman.run_filter(obs, model)
    states = kalman.smooth(out) if args.smooth else out
    buf = io.StringIO()
    kalman.export_states(states, model, buf)
    _emit(buf.getvalue(), args.out, "states.csv")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); route through ConfigError
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="seasonvol", description=__doc__)
    parser.add_argument("--threads", type=int, default=None, help="worker cap for simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate futures/variance paths")
    p.add_argument("--params", required=True)
    p.add_argument("--maturities", required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--measure", choices=["q", "p"], default="q")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("cf", help="characteristic function on an argument grid")
    p.add_argument("--params", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--T1", type=float, required=True)
    p.add_argument("--T2", type=float)
    p.add_argument("--u2", type=float, default=0.0)
    p.add_argument("--umin", type=float, default=-20.0)
    p.add_argument("--umax", type=float, default=20.0)
    p.add_argument("--n", type=int, default=81)
    p.add_argument("--f0", type=float)
    p.add_argument("--ode-steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_cf)

    p = sub.add_parser("price", help="price European or calendar-spread options")
    p.add_argument("--params", required=True)
    p.add_argument("--product", choices=["call", "put", "spread"], required=True)
    p.add_argument("--strikes", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--T1", type=float, required=True)
    p.add_argument("--T2", type=float)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--f0", type=float, required=True)
    p.add_argument("--f0-2", dest="f0_2", type=float)
    p.add_argument("--ode-steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_price)

    p = sub.add_parser("estimate", help="maximum-likelihood fit of one family")
    p.add_argument("--data", required=True)
    p.add_argument("--family", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=list(_MODES), default="returns")
    p.add_argument("--cm-tenors")
    p.add_argument("--params", help="optional INI file with the starting point")
    p.add_argument("--freeze-lambda", action="store_true")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--stages", type=int, default=24)
    p.add_argument("--trials-per-dim", type=int, default=20)
    p.add_argument("--no-polish", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("test", help="likelihood-ratio tests (seasonality and damping)")
    p.add_argument("--seasonal")
    p.add_argument("--nonseasonal")
    p.add_argument("--nolambda")
    p.add_argument("--ll-seasonal", type=float)
    p.add_argument("--ll-nonseasonal", type=float)
    p.add_argument("--ll-nolambda", type=float)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("rank", help="rank fit reports by AIC")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("summarize", help="panel descriptive statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("export-states", help="filtered/smoothed state path with theta overlay")
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="fit report .txt or parameter .ini")
    p.add_argument("--mode", choices=list(_MODES), default="returns")
    p.add_argument("--cm-tenors")
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_export_states)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error code=config message={exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"error code=numerical message={exc}\n")
        return 2
    except ConvergenceError as exc:
        sys.stderr.write(f"error code=convergence message={exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
