"""Kalman filtering, smoothing and the exact Gaussian log-likelihood.

The filter is conditionally Gaussian: the state-dependent shock loading is
evaluated at the filtered posterior mean of the variance state from the
previous step (floored at a small positive value).  The log-likelihood is

    -(sum_t k_t / 2) ln 2 pi - (1/2) sum_t ln |V_t| - (1/2) sum_t v_t' V_t^{-1} v_t

with v_t the one-step-ahead innovation and V_t its covariance.  Covariances
are symmetrised every step, V_t receives a tiny diagonal jitter before the
factorisation-based solve, and the covariance update uses the Joseph form.

The hot loop is compiled with numba when available and runs as plain Python
otherwise; both paths share the same source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ObservationSeries
from .errors import NumericalError, ConfigError
from .params import ModelParams
from .seasonality import eval_theta
from .statespace import ObservationMode, S3_FLOOR

__all__ = ["FilterOutput", "SmoothedOutput", "run_filter", "smooth", "export_states"]

_LN_2PI = math.log(2.0 * math.pi)
_JITTER = 1e-12

DEFAULT_INIT_COV = np.diag([1e-4, 1e-4, 1e-4])


def _filter_impl(
    times, y, valid, e1, kth_dt, anchors, h2,
    lam, sigma, rho, pi_f, kappa_eff_dt_coef, pi_f_isret,
    init_mean, init_cov, s3_floor, jitter,
):
    """Sequential filter pass over precomputed arrays.

    e1[i, j] = exp(-lam * ttm_ij); kth_dt[i] = kappa * theta(t_{i-1}) * dt_i
    for i >= 1; ``pi_f_isret`` is 1.0 in returns mode (unit diagonal removed)
    and 0.0 in price mode (anchors used as measurement offsets).
    """
    n, k = y.shape
    base = 0.0 if pi_f_isret == 1.0 else 1.0

    m = init_mean.copy()
    P = init_cov.copy()

    filt_mean = np.zeros((n, 3))
    filt_cov = np.zeros((n, 3, 3))
    pred_mean = np.zeros((n, 3))
    pred_cov = np.zeros((n, 3, 3))
    trans_t = np.zeros((n, 3, 3))
    trans_d = np.zeros((n, 3))
    trans_rqr = np.zeros((n, 3, 3))
    innov = np.full((n, k), np.nan)
    innov_cov = np.full((n, k, k), np.nan)
    floored = np.zeros(n, dtype=np.bool_)
    k_per_date = np.zeros(n, dtype=np.int64)

    loglik = 0.0
    error_step = -1

    for i in range(n):
        if i > 0:
            dt = times[i] - times[i - 1]
            s3 = m[2]
            if s3 < s3_floor:
                s3 = s3_floor
            t11 = base - lam * dt
            t22 = base - 2.0 * lam * dt
            t33 = 1.0 - kappa_eff_dt_coef * dt
            Tm = np.zeros((3, 3))
            Tm[0, 0] = t11
            Tm[0, 2] = pi_f * dt
            Tm[1, 1] = t22
            Tm[1, 2] = dt
            Tm[2, 2] = t33
            d = np.zeros(3)
            d[2] = kth_dt[i]
            rqr = np.zeros((3, 3))
            rqr[0, 0] = s3 * dt
            rqr[0, 2] = s3 * rho * sigma * dt
            rqr[2, 0] = rqr[0, 2]
            rqr[2, 2] = s3 * sigma * sigma * dt
            m = d + Tm @ m
            P = Tm @ P @ Tm.T + rqr
            P = 0.5 * (P + P.T)
            trans_t[i] = Tm
            trans_d[i] = d
            trans_rqr[i] = rqr
        pred_mean[i] = m
        pred_cov[i] = P

        kt = 0
        for j in range(k):
            if valid[i, j]:
                kt += 1
        k_per_date[i] = kt
        if kt > 0:
            Zi = np.zeros((kt, 3))
            vi = np.zeros(kt)
            hi = np.zeros(kt)
            r = 0
            for j in range(k):
                if valid[i, j]:
                    Zi[r, 0] = e1[i, j]
                    Zi[r, 1] = -0.5 * e1[i, j] * e1[i, j]
                    vi[r] = y[i, j] - (1.0 - pi_f_isret) * anchors[j]
                    hi[r] = h2[j]
                    r += 1
            vi = vi - Zi @ m
            PZt = P @ Zi.T
            V = Zi @ PZt
            for r in range(kt):
                V[r, r] += hi[r] + jitter
            V = 0.5 * (V + V.T)

            # Cholesky with a failure flag
            L = np.zeros((kt, kt))
            ok = True
            for a in range(kt):
                s = V[a, a]
                for b in range(a):
                    s -= L[a, b] * L[a, b]
                if s <= 0.0:
                    ok = False
                    break
                L[a, a] = math.sqrt(s)
                for c in range(a + 1, kt):
                    s2 = V[c, a]
                    for b in range(a):
                        s2 -= L[c, b] * L[a, b]
                    L[c, a] = s2 / L[a, a]
            if not ok:
                error_step = i
                break

            # solve V x = vi and V X = PZt' via the factor
            x = vi.copy()
            for a in range(kt):
                for b in range(a):
                    x[a] -= L[a, b] * x[b]
                x[a] /= L[a, a]
            logdet = 0.0
            for a in range(kt):
                logdet += 2.0 * math.log(L[a, a])
            quad = 0.0
            for a in range(kt):
                quad += x[a] * x[a]
            loglik += -0.5 * kt * _LN_2PI - 0.5 * logdet - 0.5 * quad

            # finish the solve for the gain: V^{-1} vi and V^{-1} (Zi P)
            for a in range(kt - 1, -1, -1):
                for b in range(a + 1, kt):
                    x[a] -= L[b, a] * x[b]
                x[a] /= L[a, a]
            B = PZt.T.copy()  # (kt, 3)
            for col in range(3):
                for a in range(kt):
                    for b in range(a):
                        B[a, col] -= L[a, b] * B[b, col]
                    B[a, col] /= L[a, a]
                for a in range(kt - 1, -1, -1):
                    for b in range(a + 1, kt):
                        B[a, col] -= L[b, a] * B[b, col]
                    B[a, col] /= L[a, a]
            K = B.T  # (3, kt) = P Z' V^{-1}

            m = m + K @ vi
            ikz = np.eye(3) - K @ Zi
            P = ikz @ P @ ikz.T
            for a in range(3):
                for b in range(3):
                    s3acc = 0.0
                    for c in range(kt):
                        s3acc += K[a, c] * hi[c] * K[b, c]
                    P[a, b] += s3acc
            P = 0.5 * (P + P.T)

            r = 0
            for j in range(k):
                if valid[i, j]:
                    innov[i, j] = vi[r]
                    r += 1
            rr = 0
            for a in range(k):
                if not valid[i, a]:
                    continue
                cc = 0
                for b in range(k):
                    if valid[i, b]:
                        innov_cov[i, a, b] = V[rr, cc]
                        cc += 1
                rr += 1

        if m[2] < s3_floor:
            m[2] = s3_floor
            floored[i] = True
        filt_mean[i] = m
        filt_cov[i] = P

    return (
        loglik, error_step, filt_mean, filt_cov, pred_mean, pred_cov,
        trans_t, trans_d, trans_rqr, innov, innov_cov, floored, k_per_date,
    )


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _filter_core = njit(cache=True)(_filter_impl)
except Exception:  # pragma: no cover
    _filter_core = _filter_impl


@dataclass
class FilterOutput:
    loglik: float
    mode: ObservationMode
    times: np.ndarray
    filtered_mean: np.ndarray    # (N, 3)
    filtered_cov: np.ndarray     # (N, 3, 3)
    predicted_mean: np.ndarray
    predicted_cov: np.ndarray
    innovations: np.ndarray      # (N, k), NaN where no observation
    innovation_covs: np.ndarray  # (N, k, k), NaN-padded
    floored: np.ndarray          # (N,) bool, variance state floored after update
    k_per_date: np.ndarray
    trans_t: np.ndarray          # transition matrices used to reach step i
    trans_d: np.ndarray
    trans_rqr: np.ndarray
    dates: np.ndarray | None = None


@dataclass
class SmoothedOutput:
    times: np.ndarray
    mean: np.ndarray             # (N, 3)
    cov: np.ndarray              # (N, 3, 3)
    dates: np.ndarray | None = None


def run_filter(
    obs: ObservationSeries,
    params: ModelParams,
    mode: ObservationMode | None = None,
    init_mean=None,
    init_cov=None,
) -> FilterOutput:
    """Filter an observation series and return states plus the log-likelihood.

    The initial state is (0, 0, v0) with a tight diagonal covariance unless
    overridden.  Missing observations simply drop the corresponding
    measurement rows for that date.
    """
    mode = ObservationMode(mode) if mode is not None else obs.mode
    if obs.values.shape[1] != params.k:
        raise ConfigError(
            f"series has {obs.values.shape[1]} slots but the model carries {params.k} "
            "measurement-error parameters"
        )
    n, k = obs.values.shape
    f = params.factor
    if n == 0:
        z3 = np.zeros((0, 3))
        z33 = np.zeros((0, 3, 3))
        return FilterOutput(
            0.0, mode, obs.times, z3, z33, z3, z33,
            np.zeros((0, k)), np.zeros((0, k, k)), np.zeros(0, dtype=bool),
            np.zeros(0, dtype=int), z33, z3, z33, obs.dates,
        )

    if mode is ObservationMode.LOG_PRICES:
        if obs.anchors is None:
            raise ConfigError("log-price filtering requires anchor log prices")
        anchors = np.asarray(obs.anchors, dtype=float)
        isret = 0.0
    else:
        anchors = np.zeros(k)
        isret = 1.0

    times = np.asarray(obs.times, dtype=float)
    valid = np.asarray(obs.valid, dtype=bool) & np.isfinite(obs.values)
    y = np.where(valid, obs.values, 0.0)
    ttm = np.where(valid, obs.maturities - times[:, None], 0.0)
    if np.any(ttm[valid] < -1e-9):
        raise ConfigError("an observed contract has negative time to maturity")
    e1 = np.exp(-f.lam * np.maximum(ttm, 0.0))

    kth_dt = np.zeros(n)
    if n > 1:
        theta_prev = eval_theta(f.season, times[:-1])
        kth_dt[1:] = f.kappa * np.atleast_1d(theta_prev) * np.diff(times)

    init_mean = (
        np.array([0.0, 0.0, f.v0]) if init_mean is None else np.asarray(init_mean, dtype=float)
    )
    init_cov = (
        DEFAULT_INIT_COV.copy() if init_cov is None else np.asarray(init_cov, dtype=float)
    )

    out = _filter_core(
        times, y, valid, e1, kth_dt, anchors, np.asarray(params.h) ** 2,
        f.lam, f.sigma, f.rho, f.pi_f, (f.kappa - f.sigma * f.pi_v), isret,
        init_mean, init_cov, S3_FLOOR, _JITTER,
    )
    (loglik, error_step, filt_mean, filt_cov, pred_mean, pred_cov,
     trans_t, trans_d, trans_rqr, innov, innov_cov, floored, k_per_date) = out
    if error_step >= 0:
        raise NumericalError(
            f"innovation covariance not positive definite at step {int(error_step)}"
        )
    if not math.isfinite(loglik):
        raise NumericalError("log-likelihood is not finite")
    return FilterOutput(
        float(loglik), mode, times, filt_mean, filt_cov, pred_mean, pred_cov,
        innov, innov_cov, floored, k_per_date, trans_t, trans_d, trans_rqr, obs.dates,
    )


def smooth(output: FilterOutput) -> SmoothedOutput:
    """Fixed-interval smoother over a completed filter pass.

    Predicted covariances may be singular (deterministic state directions),
    so the smoother gain uses a pseudo-inverse.
    """
    n = output.filtered_mean.shape[0]
    mean = output.filtered_mean.copy()
    cov = output.filtered_cov.copy()
    for i in range(n - 2, -1, -1):
        Tm = output.trans_t[i + 1]
        p_pred = output.predicted_cov[i + 1]
        gain = output.filtered_cov[i] @ Tm.T @ np.linalg.pinv(p_pred, rcond=1e-12, hermitian=True)
        mean[i] = output.filtered_mean[i] + gain @ (mean[i + 1] - output.predicted_mean[i + 1])
        cov[i] = (
            output.filtered_cov[i]
            + gain @ (cov[i + 1] - p_pred) @ gain.T
        )
        cov[i] = 0.5 * (cov[i] + cov[i].T)
    return SmoothedOutput(times=output.times, mean=mean, cov=cov, dates=output.dates)


def export_states(
    states, params: ModelParams, fileobj, header_comment: str | None = None
) -> None:
    """Write a state path as CSV: date/time, s1, s2, s3 and the seasonal level."""
    mean = states.mean if isinstance(states, SmoothedOutput) else states.filtered_mean
    theta = np.atleast_1d(eval_theta(params.factor.season, states.times))
    if header_comment:
        fileobj.write(f"# {header_comment}\n")
    fileobj.write("date,s1,s2,s3,theta_t\n")
    for i in range(mean.shape[0]):
        label = str(states.dates[i]) if states.dates is not None else f"{states.times[i]:.8f}"
        fileobj.write(
            f"{label},{mean[i, 0]:.10g},{mean[i, 1]:.10g},{mean[i, 2]:.10g},{theta[i]:.10g}\n"
        )
