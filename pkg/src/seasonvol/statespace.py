"""Discrete-time transition and measurement systems for the one-factor model.

State vector s = (s1, s2, s3): accumulated damped shock integral, accumulated
damped variance integral, and the instantaneous variance.  Euler-discretised
transition

    s_{t+dt} = d_t + T_t s_t + R_t eta_t,   eta_t ~ N(0, Q_t),

with d_t = (0, 0, kappa theta(t) dt), a transition matrix damping s1 and s2
at rates lam and 2 lam, an s3 feed into both, and state-dependent loading
R_t = sqrt(s3) [[1, 0], [0, 0], [0, sigma]] with Q_t carrying the
price/variance correlation.  Measurements are log prices

    y_t = c_t + Z_t s_t + e_t,   e_t ~ N(0, H),

with Z rows (e^{-lam ttm}, -e^{-2 lam ttm}/2, 0) per contract, or log
returns, in which case the unit diagonal entries of the s1/s2 blocks are
removed and c_t is zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .params import ModelParams
from .seasonality import eval_theta

__all__ = ["ObservationMode", "StateVector", "SystemMatrices", "build_system", "S3_FLOOR"]

S3_FLOOR = 1e-10


class ObservationMode(str, enum.Enum):
    LOG_PRICES = "log-prices"
    LOG_RETURNS = "log-returns"
    CM_RETURNS = "cm-returns"   # constant-maturity returns; filtered like returns

    @property
    def is_returns(self) -> bool:
        return self is not ObservationMode.LOG_PRICES


@dataclass
class StateVector:
    s1: float
    s2: float
    s3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])


@dataclass
class SystemMatrices:
    d: np.ndarray   # (3,)
    T: np.ndarray   # (3, 3)
    R: np.ndarray   # (3, 2)
    Q: np.ndarray   # (2, 2)
    Z: np.ndarray   # (k, 3)
    c: np.ndarray   # (k,)
    H: np.ndarray   # (k, k) diagonal

    @property
    def rqr(self) -> np.ndarray:
        return self.R @ self.Q @ self.R.T


def build_system(
    params: ModelParams,
    t: float,
    dt: float,
    maturities,
    mode: ObservationMode,
    s3_current: float,
    c_offsets=None,
    slot_indices=None,
) -> SystemMatrices:
    """Assemble the system matrices for one filter step.

    ``maturities`` are absolute year fractions of the contracts in force at
    time ``t``; ``s3_current`` is the plug-in variance used in the
    state-dependent loading (floored at S3_FLOOR); ``slot_indices`` selects
    the measurement-error entries when some contract slots are missing.
    """
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    maturities = np.asarray(maturities, dtype=float)
    if np.any(maturities < t - 1e-9):
        raise ConfigError("a contract maturity precedes the observation time")
    f = params.factor
    lam, kappa, sigma, rho = f.lam, f.kappa, f.sigma, f.rho

    theta_t = eval_theta(f.season, t)
    d = np.array([0.0, 0.0, kappa * theta_t * dt])

    base = 0.0 if mode.is_returns else 1.0
    T = np.array(
        [
            [base - lam * dt, 0.0, f.pi_f * dt],
            [0.0, base - 2.0 * lam * dt, dt],
            [0.0, 0.0, 1.0 - (kappa - sigma * f.pi_v) * dt],
        ]
    )

    s3 = max(float(s3_current), S3_FLOOR)
    R = np.sqrt(s3) * np.array([[1.0, 0.0], [0.0, 0.0], [0.0, sigma]])
    Q = np.array([[dt, rho * dt], [rho * dt, dt]])

    ttm = maturities - t
    e1 = np.exp(-lam * ttm)
    Z = np.column_stack([e1, -0.5 * e1 * e1, np.zeros_like(e1)])

    k = len(maturities)
    if mode.is_returns:
        c = np.zeros(k)
    else:
        if c_offsets is None:
            raise ConfigError("log-price mode requires initial-curve offsets")
        c = np.asarray(c_offsets, dtype=float)
        if c.shape != (k,):
            raise ConfigError("offset vector length must match the contract count")

    h = np.asarray(params.h, dtype=float)
    if slot_indices is not None:
        h = h[np.asarray(slot_indices, dtype=int)]
    if len(h) != k:
        raise ConfigError("measurement-error count must match the contract count")
    H = np.diag(h * h)
    return SystemMatrices(d=d, T=T, R=R, Q=Q, Z=Z, c=c, H=H)
