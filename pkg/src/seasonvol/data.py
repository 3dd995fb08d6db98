"""Futures panel ingestion and observation-series construction.

A panel is a dated grid of futures prices, one column per maturity slot
(c1 is the nearest contract), with the actual expiry date attached to every
observation.  Rolls are detected from maturity-date changes.  Log returns
are always computed within a single contract ("diagonally" across slots on
a roll date); the first return of a contract newly entering the longest
slot cannot be computed and is pinned to zero and flagged.

Constant-maturity return series interpolate linearly, in time to maturity,
between the same-contract returns of the two bracketing contracts.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .statespace import ObservationMode

__all__ = [
    "FuturesPanel",
    "ObservationSeries",
    "PanelSummary",
    "ingest",
    "to_returns",
    "to_constant_maturity",
    "summarize",
]

DAYS_PER_YEAR = 365.0
TRADING_DAYS = 252.0


@dataclass
class FuturesPanel:
    dates: np.ndarray        # (N,) datetime64[D], strictly increasing
    slots: tuple[str, ...]
    prices: np.ndarray       # (N, k), NaN where missing
    maturities: np.ndarray   # (N, k) datetime64[D], NaT where missing

    def __post_init__(self) -> None:
        n, k = self.prices.shape
        if len(self.dates) != n or len(self.slots) != k or self.maturities.shape != (n, k):
            raise ConfigError("panel arrays have inconsistent shapes")
        if n > 1 and not np.all(np.diff(self.dates.astype("datetime64[D]").astype(int)) > 0):
            raise ConfigError("panel dates must be strictly increasing")
        with np.errstate(invalid="ignore"):
            if np.any(self.prices <= 0.0):
                raise ConfigError("panel prices must be positive")
        m = self.maturities.astype("datetime64[D]").astype(float)
        m[np.isnat(self.maturities)] = np.nan
        dm = np.diff(m, axis=1)
        if np.any(dm[~np.isnan(dm)] <= 0):
            raise ConfigError("maturities must increase strictly across slots on every date")

    @property
    def times(self) -> np.ndarray:
        """ACT/365 year fractions from the first panel date."""
        days = (self.dates - self.dates[0]).astype("timedelta64[D]").astype(float)
        return days / DAYS_PER_YEAR

    @property
    def maturity_times(self) -> np.ndarray:
        """Maturity dates as ACT/365 year fractions from the first panel date."""
        out = (self.maturities - self.dates[0]).astype("timedelta64[D]").astype(float)
        out[np.isnat(self.maturities)] = np.nan
        return out / DAYS_PER_YEAR

    @property
    def n_dates(self) -> int:
        return len(self.dates)


@dataclass
class ObservationSeries:
    """Per-date observation vectors consumed by the filter."""

    mode: ObservationMode
    times: np.ndarray        # (N,) year fractions from the panel origin
    values: np.ndarray       # (N, k); NaN where invalid
    maturities: np.ndarray   # (N, k) absolute maturity year fractions; NaN invalid
    valid: np.ndarray        # (N, k) bool
    zero_mask: np.ndarray    # (N, k) bool: returns pinned to zero on roll-in
    slots: tuple[str, ...]
    anchors: np.ndarray | None = None   # (k,) log prices at origin (log-price mode)
    dates: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def n_dates(self) -> int:
        return self.values.shape[0]


def _slot_key(name: str):
    m = re.fullmatch(r"([^\d]*)(\d+)", name.strip())
    return (m.group(1), int(m.group(2))) if m else (name, 0)


def ingest(csv_path, maturity_map: dict[str, str] | None = None) -> FuturesPanel:
    """Read a panel from CSV with columns date, slot, price[, maturity].

    Dates are ISO-8601.  Maturity dates normally come from the ``maturity``
    column; ``maturity_map`` (slot name -> ISO date) is a fallback for
    non-rolling panels whose files lack the column.  Rows with non-positive
    prices, duplicate (date, slot) pairs, or out-of-order dates are rejected
    with their line numbers.
    """
    rows = []
    bad_price_lines = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, raw in enumerate(reader, start=1):
            if not raw or raw[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = [c.strip().lower() for c in raw]
                required = {"date", "slot", "price"}
                if not required.issubset(header):
                    raise ConfigError(
                        f"{csv_path}: header must contain date, slot, price; got {header}"
                    )
                idx = {name: header.index(name) for name in header}
                continue
            try:
                date = dt.date.fromisoformat(raw[idx["date"]].strip())
            except ValueError as exc:
                raise ConfigError(f"{csv_path}:{lineno}: bad date {raw[idx['date']]!r}") from exc
            slot = raw[idx["slot"]].strip()
            try:
                price = float(raw[idx["price"]])
            except ValueError as exc:
                raise ConfigError(f"{csv_path}:{lineno}: bad price {raw[idx['price']]!r}") from exc
            if not np.isfinite(price) or price <= 0.0:
                bad_price_lines.append(lineno)
                continue
            maturity_raw = raw[idx["maturity"]].strip() if "maturity" in idx else ""
            if not maturity_raw and maturity_map is not None:
                maturity_raw = maturity_map.get(slot, "")
            if not maturity_raw:
                raise ConfigError(
                    f"{csv_path}:{lineno}: no maturity for slot {slot!r}; supply a "
                    "maturity column or a maturity_map entry"
                )
            try:
                maturity = dt.date.fromisoformat(maturity_raw)
            except ValueError as exc:
                raise ConfigError(f"{csv_path}:{lineno}: bad maturity {maturity_raw!r}") from exc
            rows.append((date, slot, price, maturity, lineno))

    if bad_price_lines:
        shown = ", ".join(str(x) for x in bad_price_lines[:20])
        raise ConfigError(f"{csv_path}: non-positive prices on line(s) {shown}")
    if not rows:
        raise ConfigError(f"{csv_path}: no data rows")

    dates = []
    seen = {}
    for date, slot, price, maturity, lineno in rows:
        if dates and date < dates[-1]:
            raise ConfigError(f"{csv_path}:{lineno}: dates out of order at {date}")
        if not dates or date != dates[-1]:
            dates.append(date)
        key = (date, slot)
        if key in seen:
            raise ConfigError(
                f"{csv_path}:{lineno}: duplicate (date, slot) = ({date}, {slot}); "
                f"first seen on line {seen[key]}"
            )
        seen[key] = lineno

    slots = tuple(sorted({r[1] for r in rows}, key=_slot_key))
    slot_pos = {s: j for j, s in enumerate(slots)}
    date_pos = {d: i for i, d in enumerate(dates)}
    n, k = len(dates), len(slots)
    prices = np.full((n, k), np.nan)
    maturities = np.full((n, k), np.datetime64("NaT"), dtype="datetime64[D]")
    for date, slot, price, maturity, _ in rows:
        i, j = date_pos[date], slot_pos[slot]
        prices[i, j] = price
        maturities[i, j] = np.datetime64(maturity, "D")
    return FuturesPanel(
        dates=np.array(dates, dtype="datetime64[D]"),
        slots=slots,
        prices=prices,
        maturities=maturities,
    )


def to_log_prices(panel: FuturesPanel) -> ObservationSeries:
    """Log-price observations (no roll handling; meaningful for non-rolling panels)."""
    values = np.log(panel.prices)
    valid = np.isfinite(values)
    anchors = values[0].copy()
    return ObservationSeries(
        mode=ObservationMode.LOG_PRICES,
        times=panel.times,
        values=values,
        maturities=panel.maturity_times,
        valid=valid,
        zero_mask=np.zeros_like(valid, dtype=bool),
        slots=panel.slots,
        anchors=anchors,
        dates=panel.dates,
    )


def to_returns(panel: FuturesPanel) -> ObservationSeries:
    """Roll-adjusted log returns: each return is computed within one contract.

    On a roll date the price of today's contract is looked up in yesterday's
    row by maturity date; a contract with no price yesterday (the slot newly
    entering the panel) gets a zero return and a flag in ``zero_mask``.
    """
    if panel.n_dates < 2:
        raise ConfigError("at least two dates are needed to build returns")
    n, k = panel.prices.shape
    values = np.full((n - 1, k), np.nan)
    zero_mask = np.zeros((n - 1, k), dtype=bool)
    mat = panel.maturities
    for i in range(1, n):
        prev = {mat[i - 1, j]: panel.prices[i - 1, j] for j in range(k) if not np.isnat(mat[i - 1, j])}
        for j in range(k):
            if np.isnat(mat[i, j]) or not np.isfinite(panel.prices[i, j]):
                continue
            p_prev = prev.get(mat[i, j])
            if p_prev is None or not np.isfinite(p_prev):
                values[i - 1, j] = 0.0
                zero_mask[i - 1, j] = True
            else:
                values[i - 1, j] = np.log(panel.prices[i, j] / p_prev)
    valid = np.isfinite(values)
    return ObservationSeries(
        mode=ObservationMode.LOG_RETURNS,
        times=panel.times[1:],
        values=values,
        maturities=panel.maturity_times[1:],
        valid=valid,
        zero_mask=zero_mask,
        slots=panel.slots,
        dates=panel.dates[1:],
    )


def to_constant_maturity(panel: FuturesPanel, target_maturities) -> ObservationSeries:
    """Constant-maturity returns by convex interpolation in time to maturity.

    For each date and each target tenor the two live contracts bracketing
    the tenor are combined with weights proportional to calendar distance.
    Roll-in zero returns are treated as missing for interpolation purposes.
    Unbracketed tenors are masked out (one aggregate warning is emitted).
    """
    targets = np.asarray(target_maturities, dtype=float)
    if targets.ndim != 1 or targets.size == 0 or np.any(targets <= 0.0):
        raise ConfigError("target maturities must be a non-empty list of positive tenors")
    base = to_returns(panel)
    n = base.n_dates
    m = targets.size
    values = np.full((n, m), np.nan)
    masked_out = 0
    ttm = base.maturities - base.times[:, None]
    usable = base.valid & ~base.zero_mask
    for i in range(n):
        tau = ttm[i]
        ok = usable[i] & np.isfinite(tau)
        tau_ok = tau[ok]
        r_ok = base.values[i][ok]
        if tau_ok.size == 0:
            masked_out += m
            continue
        order = np.argsort(tau_ok)
        tau_ok = tau_ok[order]
        r_ok = r_ok[order]
        for jt, target in enumerate(targets):
            pos = np.searchsorted(tau_ok, target)
            exact = pos < tau_ok.size and abs(tau_ok[pos] - target) < 1e-12
            if exact:
                values[i, jt] = r_ok[pos]
            elif 0 < pos < tau_ok.size:
                t1, t2 = tau_ok[pos - 1], tau_ok[pos]
                w2 = (target - t1) / (t2 - t1)
                values[i, jt] = (1.0 - w2) * r_ok[pos - 1] + w2 * r_ok[pos]
            else:
                masked_out += 1
    if masked_out:
        warnings.warn(
            f"constant-maturity series: {masked_out} date/tenor points had no "
            "bracketing contracts and were masked out",
            stacklevel=2,
        )
    valid = np.isfinite(values)
    return ObservationSeries(
        mode=ObservationMode.CM_RETURNS,
        times=base.times,
        values=values,
        maturities=base.times[:, None] + targets[None, :],
        valid=valid,
        zero_mask=np.zeros_like(valid, dtype=bool),
        slots=tuple(f"cm{j + 1}" for j in range(m)),
        dates=base.dates,
    )


@dataclass
class PanelSummary:
    n_dates: int
    start: str
    end: str
    n_slots: int
    min_price: float
    max_price: float
    avg_price: float
    avg_vol: float                       # mean of per-slot annualised vols
    slot_vols: dict[str, float] = field(default_factory=dict)
    month_vols_front: dict[str, float] = field(default_factory=dict)

    def overview_csv(self) -> str:
        head = "n_dates,start,end,n_slots,min_price,max_price,avg_price,avg_vol"
        row = (
            f"{self.n_dates},{self.start},{self.end},{self.n_slots},"
            f"{self.min_price:.6g},{self.max_price:.6g},{self.avg_price:.6g},"
            f"{self.avg_vol:.6g}"
        )
        return head + "\n" + row + "\n"

    def slot_vol_csv(self) -> str:
        lines = ["slot,annualized_vol"]
        lines += [f"{s},{v:.6g}" for s, v in self.slot_vols.items()]
        return "\n".join(lines) + "\n"

    def month_vol_csv(self) -> str:
        lines = ["month,annualized_vol"]
        lines += [f"{m},{v:.6g}" for m, v in self.month_vols_front.items()]
        return "\n".join(lines) + "\n"


_MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]


def summarize(panel: FuturesPanel) -> PanelSummary:
    """Descriptive statistics: price ranges, per-slot and per-month annualised vols."""
    rets = to_returns(panel)
    usable = rets.valid & ~rets.zero_mask

    def vol(x) -> float:
        x = x[np.isfinite(x)]
        if x.size < 2:
            return 0.0
        return float(np.std(x, ddof=1) * np.sqrt(TRADING_DAYS))

    slot_vols = {}
    for j, slot in enumerate(panel.slots):
        col = np.where(usable[:, j], rets.values[:, j], np.nan)
        slot_vols[slot] = vol(col)

    months = rets.dates.astype("datetime64[M]").astype(int) % 12
    month_vols = {}
    for m in range(12):
        sel = (months == m) & usable[:, 0]
        month_vols[_MONTHS[m]] = vol(np.where(sel, rets.values[:, 0], np.nan))

    finite_prices = panel.prices[np.isfinite(panel.prices)]
    return PanelSummary(
        n_dates=panel.n_dates,
        start=str(panel.dates[0]),
        end=str(panel.dates[-1]),
        n_slots=len(panel.slots),
        min_price=float(finite_prices.min()),
        max_price=float(finite_prices.max()),
        avg_price=float(finite_prices.mean()),
        avg_vol=float(np.mean(list(slot_vols.values()))),
        slot_vols=slot_vols,
        month_vols_front=month_vols,
    )
