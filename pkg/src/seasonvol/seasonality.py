"""Seasonal mean-reversion-level functions theta(t) and their integral transforms.

Six parametric patterns are supported: sinusoidal, exponential-sinusoidal,
sawtooth, triangle, spiked, and constant (the non-seasonal nested case).
All are periodic with period one year; ``t`` is a year fraction.  The
transform

    transform_theta(spec, T, lam) = integral_0^T theta(t) exp(lam*t) dt

is evaluated in closed form for the sinusoidal, sawtooth, triangle and
constant patterns, and by kink-aligned Gauss-Legendre quadrature for the
exponential-sinusoidal and spiked patterns, which admit no elementary
antiderivative.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError

__all__ = [
    "Pattern",
    "SeasonalitySpec",
    "eval_theta",
    "transform_theta",
    "theta_min",
    "theta_max",
    "split_points",
    "jump_times",
    "theta_on_segment",
]


class Pattern(str, enum.Enum):
    SINUSOIDAL = "sinusoidal"
    EXP_SINUSOIDAL = "exp-sinusoidal"
    SAWTOOTH = "sawtooth"
    TRIANGLE = "triangle"
    SPIKED = "spiked"
    CONSTANT = "constant"


_SEASONAL = (
    Pattern.SINUSOIDAL,
    Pattern.EXP_SINUSOIDAL,
    Pattern.SAWTOOTH,
    Pattern.TRIANGLE,
    Pattern.SPIKED,
)


@dataclass(frozen=True)
class SeasonalitySpec:
    """Parametric seasonal level: base level ``a``, magnitude ``b``, peak phase ``t0``.

    ``a`` and ``b`` are in variance units per year; ``t0`` is the year
    fraction at which the level peaks, in [0, 1).  ``b`` and ``t0`` are
    ignored for the constant pattern.
    """

    pattern: Pattern
    a: float
    b: float = 0.0
    t0: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.pattern, Pattern):
            object.__setattr__(self, "pattern", Pattern(self.pattern))
        if not math.isfinite(self.a) or self.a <= 0.0:
            raise ConfigError(f"seasonality level a must be positive, got {self.a}")
        if self.pattern is Pattern.CONSTANT:
            return
        if not math.isfinite(self.b) or self.b <= 0.0:
            raise ConfigError(f"seasonal magnitude b must be positive, got {self.b}")
        if self.pattern is Pattern.SINUSOIDAL and self.b > self.a:
            raise ConfigError(
                f"sinusoidal pattern requires a >= b > 0, got a={self.a}, b={self.b}"
            )
        if not (0.0 <= self.t0 < 1.0):
            raise ConfigError(f"peak phase t0 must lie in [0, 1), got {self.t0}")


def eval_theta(spec: SeasonalitySpec, t):
    """Evaluate theta(t); ``t`` is a scalar or array of nonnegative year fractions."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ConfigError("theta is defined for t >= 0")
    a, b, t0 = spec.a, spec.b, spec.t0
    p = spec.pattern
    if p is Pattern.CONSTANT:
        out = np.full_like(t, a)
    elif p is Pattern.SINUSOIDAL:
        out = a + b * np.cos(2.0 * np.pi * (t - t0))
    elif p is Pattern.EXP_SINUSOIDAL:
        out = a * np.exp(b * np.cos(2.0 * np.pi * (t - t0)))
    elif p is Pattern.SAWTOOTH:
        out = a + b * (t - t0 - np.floor(t - t0))
    elif p is Pattern.TRIANGLE:
        out = a + b * np.abs(0.5 - (t - t0 - np.floor(t - t0)))
    elif p is Pattern.SPIKED:
        out = a + b * (2.0 / (1.0 + np.abs(np.sin(np.pi * (t - t0)))) - 1.0) ** 2
    else:  # pragma: no cover
        raise ConfigError(f"unknown pattern {p}")
    return out if out.ndim else float(out)


def theta_min(spec: SeasonalitySpec) -> float:
    """Infimum of theta over one period (attained except for the sawtooth sup side)."""
    a, b = spec.a, spec.b
    return {
        Pattern.CONSTANT: a,
        Pattern.SINUSOIDAL: a - b,
        Pattern.EXP_SINUSOIDAL: a * math.exp(-b),
        Pattern.SAWTOOTH: a,
        Pattern.TRIANGLE: a,
        Pattern.SPIKED: a,
    }[spec.pattern]


def theta_max(spec: SeasonalitySpec) -> float:
    """Supremum of theta over one period."""
    a, b = spec.a, spec.b
    return {
        Pattern.CONSTANT: a,
        Pattern.SINUSOIDAL: a + b,
        Pattern.EXP_SINUSOIDAL: a * math.exp(b),
        Pattern.SAWTOOTH: a + b,
        Pattern.TRIANGLE: a + b / 2.0,
        Pattern.SPIKED: a + b,
    }[spec.pattern]


def jump_times(spec: SeasonalitySpec, t_end: float) -> np.ndarray:
    """Discontinuity times of theta strictly inside (0, t_end).

    Only the sawtooth pattern jumps (at t0 + k); the others are continuous.
    """
    if spec.pattern is not Pattern.SAWTOOTH:
        return np.empty(0)
    return _phase_grid(spec.t0, t_end, half=False)


def split_points(spec: SeasonalitySpec, t_end: float) -> np.ndarray:
    """Points in (0, t_end) where theta or its derivative may be non-smooth.

    Used to align quadrature panels and ODE grids: period boundaries
    t0 + k for all seasonal patterns, plus half-period points t0 + k + 1/2
    for the patterns that kink or turn there.
    """
    p = spec.pattern
    if p in (Pattern.CONSTANT, Pattern.SINUSOIDAL):
        return np.empty(0)
    half = p in (Pattern.TRIANGLE, Pattern.SPIKED, Pattern.EXP_SINUSOIDAL)
    return _phase_grid(spec.t0, t_end, half=half)


def _phase_grid(t0: float, t_end: float, half: bool) -> np.ndarray:
    step = 0.5 if half else 1.0
    k0 = math.ceil((0.0 - t0) / step)
    pts = []
    k = k0
    while True:
        t = t0 + k * step
        if t >= t_end:
            break
        if t > 0.0:
            pts.append(t)
        k += 1
    return np.array(pts)


def theta_on_segment(spec: SeasonalitySpec, lo: float, hi: float):
    """Return a callable equal to theta on [lo, hi] and smooth on the closed segment.

    [lo, hi] must not straddle a split point; the active branch is chosen
    from the segment midpoint so that endpoint evaluations use the one-sided
    limit from inside the segment (relevant at sawtooth jumps).
    """
    a, b, t0 = spec.a, spec.b, spec.t0
    p = spec.pattern
    mid = 0.5 * (lo + hi)
    if p is Pattern.SAWTOOTH:
        m = math.floor(mid - t0)
        return lambda t: a + b * (np.asarray(t, dtype=float) - t0 - m)
    if p is Pattern.TRIANGLE:
        m = math.floor(mid - t0)
        if (mid - t0 - m) < 0.5:
            return lambda t: a + b * (0.5 - (np.asarray(t, dtype=float) - t0 - m))
        return lambda t: a + b * ((np.asarray(t, dtype=float) - t0 - m) - 0.5)
    if p is Pattern.SPIKED:
        s = 1.0 if math.sin(math.pi * (mid - t0)) >= 0.0 else -1.0
        return lambda t: a + b * (
            2.0 / (1.0 + s * np.sin(np.pi * (np.asarray(t, dtype=float) - t0))) - 1.0
        ) ** 2
    return lambda t: eval_theta(spec, t)


# ---------------------------------------------------------------------------
# transforms


def _e0(h: float, lam: float) -> float:
    # integral_0^h exp(lam*s) ds, stable as lam*h -> 0
    z = lam * h
    if abs(z) < 1e-5:
        return h * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))
    return math.expm1(z) / lam

def _e1(h: float, lam: float) -> float:
    # integral_0^h s*exp(lam*s) ds, stable as lam*h -> 0
    z = lam * h
    if abs(z) < 1e-3:
        return h * h * (0.5 + z * (1.0 / 3.0 + z * (0.125 + z * (1.0 / 30.0 + z / 144.0))))
    return (h * math.exp(z) - math.expm1(z) / lam) / lam


def _linear_segment(lo: float, hi: float, p0: float, slope: float, lam: float) -> float:
    # integral over [lo, hi] of (p0 + slope*(t-lo)) exp(lam*t) dt
    h = hi - lo
    return math.exp(lam * lo) * (p0 * _e0(h, lam) + slope * _e1(h, lam))


def _segments(spec: SeasonalitySpec, T: float) -> list[tuple[float, float]]:
    cuts = split_points(spec, T)
    bounds = np.concatenate(([0.0], cuts, [T]))
    return [(float(bounds[i]), float(bounds[i + 1])) for i in range(len(bounds) - 1)]


def _sawtooth_transform(a: float, b: float, t0: float, T: float, lam: float) -> float:
    total = 0.0
    for lo, hi in _segments(SeasonalitySpec(Pattern.SAWTOOTH, a, b, t0), T):
        m = math.floor(0.5 * (lo + hi) - t0)
        total += _linear_segment(lo, hi, a + b * (lo - t0 - m), b, lam)
    return total


def _triangle_segments(a: float, b: float, t0: float, T: float, lam: float) -> float:
    total = 0.0
    for lo, hi in _segments(SeasonalitySpec(Pattern.TRIANGLE, a, b, t0), T):
        mid = 0.5 * (lo + hi)
        m = math.floor(mid - t0)
        if (mid - t0 - m) < 0.5:
            total += _linear_segment(lo, hi, a + b * (0.5 - (lo - t0 - m)), -b, lam)
        else:
            total += _linear_segment(lo, hi, a + b * ((lo - t0 - m) - 0.5), b, lam)
    return total


def _triangle_closed(a: float, b: float, t0: float, T: float, lam: float) -> float:
    # Elementary antiderivative of the triangle pattern; ill-conditioned for
    # small |lam| (1/lam cancellations), see transform_theta for the switch.
    nf = math.floor(T - t0)
    n = int(nf)
    alpha = T - t0 - nf
    z1 = 0.5 + 1.0 / lam
    z2 = 0.5 - 1.0 / lam
    z3 = z1 - alpha
    geo = math.expm1(lam * n) / math.expm1(lam) if n >= 1 else 0.0
    big = z2
    if t0 > 0.5:
        big += (2.0 / lam) * math.exp(-lam / 2.0) + math.exp(-lam * t0) * (z2 - t0)
    else:
        big -= math.exp(-lam * t0) * (z2 - t0)
    if T >= t0:
        inner = -z1
        if alpha > 0.5:
            inner += (2.0 / lam) * math.exp(lam / 2.0) - z3 * math.exp(lam * alpha)
        else:
            inner += z3 * math.exp(lam * alpha)
        big += ((2.0 / lam) * math.exp(lam / 2.0) + z2 * math.exp(lam) - z1) * geo
        big += math.exp(lam * n) * inner
    dt = T - t0
    if -0.5 <= dt < 0.0:
        big += math.exp(lam * dt) * (z2 + dt) - z2
    elif -1.0 <= dt < -0.5:
        big -= (2.0 / lam) * math.exp(-lam / 2.0) + math.exp(lam * dt) * (z2 + dt) + z2
    return (a / lam) * math.expm1(lam * T) + (b * math.exp(lam * t0) / lam) * big


def _sinusoidal_closed(a: float, b: float, t0: float, T: float, lam: float) -> float:
    d = lam * lam + 4.0 * math.pi ** 2
    w = 2.0 * math.pi
    out = (b * math.exp(lam * T) / d) * (
        w * math.sin(w * (T - t0)) + lam * math.cos(w * (T - t0))
    )
    out += (b / d) * (w * math.sin(w * t0) - lam * math.cos(w * t0))
    return out + a * _e0(T, lam)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _quadrature_transform(spec: SeasonalitySpec, T: float, lam: float) -> float:
    total = 0.0
    for lo, hi in _segments(spec, T):
        c = 0.5 * (hi - lo)
        t = 0.5 * (lo + hi) + c * _GL_NODES
        f = theta_on_segment(spec, lo, hi)
        total += c * float(np.dot(_GL_WEIGHTS, f(t) * np.exp(lam * t)))
    return total


# Below this |lam| the collapsed triangle antiderivative loses more than
# ~6 digits to cancellation; the segment form is exact at any lam.
_SMALL_LAM = 1e-2


@lru_cache(maxsize=16384)
def _transform_cached(spec: SeasonalitySpec, T: float, lam: float) -> float:
    a, b, t0 = spec.a, spec.b, spec.t0
    p = spec.pattern
    if p is Pattern.CONSTANT:
        return a * _e0(T, lam)
    if p is Pattern.SINUSOIDAL:
        return _sinusoidal_closed(a, b, t0, T, lam)
    if p is Pattern.SAWTOOTH:
        return _sawtooth_transform(a, b, t0, T, lam)
    if p is Pattern.TRIANGLE:
        if abs(lam) < _SMALL_LAM:
            return _triangle_segments(a, b, t0, T, lam)
        return _triangle_closed(a, b, t0, T, lam)
    return _quadrature_transform(spec, T, lam)


def transform_theta(spec: SeasonalitySpec, T: float, lam: float) -> float:
    """Integral of theta(t) * exp(lam * t) over [0, T]."""
    if not (T > 0.0):
        raise ConfigError(f"transform horizon T must be positive, got {T}")
    if not math.isfinite(lam):
        raise ConfigError(f"transform rate must be finite, got {lam}")
    return _transform_cached(spec, float(T), float(lam))
