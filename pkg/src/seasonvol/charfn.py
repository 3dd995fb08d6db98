"""Joint characteristic function of two futures log-returns.

For arguments (u1, u2), horizon T and contract maturities T1, T2 >= T the
characteristic function factors over independent factors j:

    cf = prod_j exp(-i (rho_j/sigma_j) f1_j(u,0) (v0_j + kappa_j that_j))
                * exp(A_j(0,T) v0_j + B_j(0,T))

where f1_j(u,t) = u1 e^{-lam_j (T1-t)} + u2 e^{-lam_j (T2-t)} (f2 with
doubled rates), that_j is the exponential transform of the seasonal level
at rate lam_j over [0,T], A_j solves the scalar Riccati equation

    dA/dt = kappa A - sigma^2 A^2 / 2 - q(u,t),   A(T) = i (rho/sigma) f1(u,T)

with q = i rho (kappa-lam)/sigma f1 - (1-rho^2) f1^2 / 2 - i f2 / 2, and
B_j(0,T) is the integral of kappa theta(t) A(t) over [0,T].  The Riccati
equation does not involve the seasonal level at all; the level enters only
through B and the transform.

A is integrated backward with classical fixed-step fourth-order Runge-Kutta
on a grid aligned to the seasonal kink times; B is computed two ways, by
composite Gauss-Legendre quadrature over kink-aligned panels (the value
used in the characteristic function) and by co-integration alongside A
(kept for cross-checking).  The solver accepts complex arguments, as needed
for damped Fourier pricing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .params import FactorParams
from .seasonality import split_points, theta_on_segment, transform_theta

__all__ = [
    "CfRequest",
    "OdeSolution",
    "solve_factor_odes",
    "joint_cf",
    "single_cf",
    "joint_cf_grid",
    "single_cf_grid",
]

DEFAULT_STEPS = 2048
_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)
_MODULUS_SLACK = 1e-8


@dataclass(frozen=True)
class CfRequest:
    """Arguments of the joint characteristic function of two log-returns."""

    u1: complex
    u2: complex
    T: float
    T1: float
    T2: float
    factors: tuple[FactorParams, ...]
    f0_1: float | None = None   # initial futures prices, only needed for the
    f0_2: float | None = None   # log-price characteristic function

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.T < 0.0:
            raise ConfigError("evaluation time T must be >= 0")
        if self.T > min(self.T1, self.T2) + 1e-12:
            raise ConfigError("T must not exceed the contract maturities")
        for f0 in (self.f0_1, self.f0_2):
            if f0 is not None and f0 <= 0.0:
                raise ConfigError("initial futures prices must be positive")
        if not self.factors:
            raise ConfigError("at least one factor is required")


@dataclass
class OdeSolution:
    """Per-factor ODE output on the backward grid, with diagnostic helpers."""

    factor: FactorParams
    u1: complex
    u2: complex
    T: float
    T1: float
    T2: float
    grid: np.ndarray          # ascending, grid[-1] == T
    a_grid: np.ndarray        # A(t_k, T) on the grid
    b_quadrature: complex     # B(0, T) from Gauss-Legendre panels (used in the cf)
    b_cointegrated: complex   # B(0, T) carried along the Runge-Kutta sweep
    theta_hat: float

    @property
    def a0(self) -> complex:
        return complex(self.a_grid[0])

    def f1(self, t):
        f = self.factor
        t = np.asarray(t, dtype=float)
        return self.u1 * np.exp(-f.lam * (self.T1 - t)) + self.u2 * np.exp(-f.lam * (self.T2 - t))

    def f2(self, t):
        f = self.factor
        t = np.asarray(t, dtype=float)
        return self.u1 * np.exp(-2.0 * f.lam * (self.T1 - t)) + self.u2 * np.exp(
            -2.0 * f.lam * (self.T2 - t)
        )

    def q(self, t):
        f = self.factor
        f1 = self.f1(t)
        return (
            1j * f.rho * (f.kappa - f.lam) / f.sigma * f1
            - 0.5 * (1.0 - f.rho ** 2) * f1 * f1
            - 0.5j * self.f2(t)
        )

    def a_terminal(self) -> complex:
        # mirrors the solver's scalar arithmetic so the equality is exact
        f = self.factor
        f1 = self.u1 * math.exp(-f.lam * (self.T1 - self.T)) + self.u2 * math.exp(
            -f.lam * (self.T2 - self.T)
        )
        return 1j * f.rho / f.sigma * f1

    def rhs(self, t, a):
        f = self.factor
        return f.kappa * a - 0.5 * f.sigma ** 2 * a * a - self.q(t)

    def riccati_defect(self) -> float:
        """Max equation defect at grid-interval midpoints.

        The cubic Hermite interpolant through (A, A') at the grid nodes is
        differentiated at midpoints and compared against the right-hand
        side.  Nodal derivatives match the equation by construction, so any
        inconsistency of the computed solution shows up between nodes.
        """
        t = self.grid
        a = self.a_grid
        d = self.rhs(t, a)
        h = np.diff(t)
        mid = 0.5 * (t[:-1] + t[1:])
        a0, a1 = a[:-1], a[1:]
        d0, d1 = d[:-1], d[1:]
        a_mid = 0.5 * (a0 + a1) + 0.125 * h * (d0 - d1)
        da_mid = 1.5 * (a1 - a0) / h - 0.25 * (d0 + d1)
        defect = da_mid - self.rhs(mid, a_mid)
        return float(np.max(np.abs(defect)))


def _merged_grid(season, T: float, n_steps: int) -> np.ndarray:
    base = np.linspace(0.0, T, n_steps + 1)
    cuts = split_points(season, T)
    return np.union1d(base, cuts) if cuts.size else base


def _solve_core(u1, u2, T, T1, T2, factor: FactorParams, n_steps: int):
    """Backward RK4 for A, vectorised over 1-d argument arrays, plus both B routes."""
    lam, kappa, sigma, rho = factor.lam, factor.kappa, factor.sigma, factor.rho
    u1 = np.atleast_1d(np.asarray(u1, dtype=complex))
    u2 = np.atleast_1d(np.asarray(u2, dtype=complex))
    u1, u2 = np.broadcast_arrays(u1, u2)
    m = u1.shape[0]

    def f1_at(t):
        return u1 * math.exp(-lam * (T1 - t)) + u2 * math.exp(-lam * (T2 - t))

    def q_at(t):
        f1 = f1_at(t)
        f2 = u1 * math.exp(-2.0 * lam * (T1 - t)) + u2 * math.exp(-2.0 * lam * (T2 - t))
        return 1j * rho * (kappa - lam) / sigma * f1 - 0.5 * (1.0 - rho ** 2) * f1 * f1 - 0.5j * f2

    def rhs(t, a):
        return kappa * a - 0.5 * sigma ** 2 * a * a - q_at(t)

    grid = _merged_grid(factor.season, T, n_steps)
    n = len(grid)
    a_grid = np.empty((n, m), dtype=complex)
    a_grid[-1] = 1j * rho / sigma * f1_at(T)
    b_ode = np.zeros(m, dtype=complex)

    for k in range(n - 1, 0, -1):
        t1, t0 = grid[k], grid[k - 1]
        h = t0 - t1  # negative
        tm = t1 + 0.5 * h
        a1 = a_grid[k]
        k1 = rhs(t1, a1)
        s2 = a1 + 0.5 * h * k1
        k2 = rhs(tm, s2)
        s3 = a1 + 0.5 * h * k2
        k3 = rhs(tm, s3)
        s4 = a1 + h * k3
        k4 = rhs(t0, s4)
        a_grid[k - 1] = a1 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        # co-integrate B' = -kappa theta(t) A(t) through the same RK4 stages;
        # theta is evaluated on the branch active inside [t0, t1] so sawtooth
        # jumps at segment ends use the one-sided limit
        th = theta_on_segment(factor.season, t0, t1)
        g1 = -kappa * float(th(t1)) * a1
        g2 = -kappa * float(th(tm)) * s2
        g3 = -kappa * float(th(tm)) * s3
        g4 = -kappa * float(th(t0)) * s4
        b_ode = b_ode + (h / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)

    if not np.all(np.isfinite(a_grid[0])):
        raise NumericalError(
            "Riccati integration diverged; the argument may lie beyond the "
            "moment boundary of the model"
        )

    b_quad = _b_quadrature(grid, a_grid, rhs, factor, T)
    return grid, a_grid, b_quad, b_ode


def _hermite_eval(grid, a_grid, d_grid, t):
    """Cubic Hermite interpolation of A at points t inside the grid."""
    idx = np.clip(np.searchsorted(grid, t, side="right") - 1, 0, len(grid) - 2)
    h = grid[idx + 1] - grid[idx]
    s = ((t - grid[idx]) / h)[:, None]
    a0, a1 = a_grid[idx], a_grid[idx + 1]
    d0, d1 = d_grid[idx] * h[:, None], d_grid[idx + 1] * h[:, None]
    h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
    h10 = s * (1.0 - s) ** 2
    h01 = s * s * (3.0 - 2.0 * s)
    h11 = s * s * (s - 1.0)
    return h00 * a0 + h10 * d0 + h01 * a1 + h11 * d1


def _b_quadrature(grid, a_grid, rhs, factor: FactorParams, T: float):
    """Gauss-Legendre integral of kappa theta(t) A(t,T) over kink-aligned panels."""
    kappa = factor.kappa
    d_grid = np.empty_like(a_grid)
    for i, t in enumerate(grid):
        d_grid[i] = rhs(float(t), a_grid[i])

    cuts = split_points(factor.season, T)
    bounds = np.concatenate(([0.0], cuts, [T]))
    total = np.zeros(a_grid.shape[1], dtype=complex)
    max_panel = max(T / 64.0, 1e-9)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo <= 1e-14:
            continue
        n_sub = max(1, int(math.ceil((hi - lo) / max_panel)))
        edges = np.linspace(lo, hi, n_sub + 1)
        th = theta_on_segment(factor.season, lo, hi)
        for p in range(n_sub):
            c = 0.5 * (edges[p + 1] - edges[p])
            t_nodes = 0.5 * (edges[p] + edges[p + 1]) + c * _GL16_X
            a_nodes = _hermite_eval(grid, a_grid, d_grid, t_nodes)
            w = (_GL16_W * th(t_nodes))[:, None]
            total += kappa * c * np.sum(w * a_nodes, axis=0)
    return total


def solve_factor_odes(
    u1: complex,
    u2: complex,
    T: float,
    T1: float,
    T2: float,
    factor: FactorParams,
    n_steps: int = DEFAULT_STEPS,
) -> OdeSolution:
    """Solve the A/B pair for one factor at a single argument point."""
    grid, a_grid, b_quad, b_ode = _solve_core(u1, u2, T, T1, T2, factor, n_steps)
    return OdeSolution(
        factor=factor,
        u1=complex(u1),
        u2=complex(u2),
        T=T,
        T1=T1,
        T2=T2,
        grid=grid,
        a_grid=a_grid[:, 0],
        b_quadrature=complex(b_quad[0]),
        b_cointegrated=complex(b_ode[0]),
        theta_hat=transform_theta(factor.season, T, factor.lam),
    )


def joint_cf_grid(
    u1,
    u2,
    T: float,
    T1: float,
    T2: float,
    factors: Sequence[FactorParams],
    n_steps: int = DEFAULT_STEPS,
) -> np.ndarray:
    """Joint characteristic function on arrays of argument pairs."""
    u1 = np.atleast_1d(np.asarray(u1, dtype=complex))
    u2 = np.atleast_1d(np.asarray(u2, dtype=complex))
    u1, u2 = np.broadcast_arrays(u1, u2)
    if T > min(T1, T2) + 1e-12:
        raise ConfigError("T must not exceed the contract maturities")
    if T == 0.0:
        return np.ones(u1.shape, dtype=complex)
    out = np.ones(u1.shape, dtype=complex)
    for f in factors:
        theta_hat = transform_theta(f.season, T, f.lam)
        _grid, a_grid, b_quad, _b_ode = _solve_core(u1, u2, T, T1, T2, f, n_steps)
        f1_0 = u1 * math.exp(-f.lam * T1) + u2 * math.exp(-f.lam * T2)
        pref = -1j * (f.rho / f.sigma) * f1_0 * (f.v0 + f.kappa * theta_hat)
        out = out * np.exp(pref + a_grid[0] * f.v0 + b_quad)
    return out


def joint_cf(req: CfRequest, n_steps: int = DEFAULT_STEPS) -> complex:
    """Joint characteristic function at a single argument pair.

    With initial prices attached to the request, returns the log-price
    version exp(i (u1 ln F0_1 + u2 ln F0_2)) * cf.
    """
    val = joint_cf_grid(req.u1, req.u2, req.T, req.T1, req.T2, req.factors, n_steps)[0]
    u_real = abs(complex(req.u1).imag) == 0.0 and abs(complex(req.u2).imag) == 0.0
    if u_real and abs(val) > 1.0 + _MODULUS_SLACK:
        raise NumericalError(
            f"characteristic function modulus {abs(val):.6g} exceeds 1 for real arguments"
        )
    if req.f0_1 is not None and req.f0_2 is not None:
        val *= np.exp(1j * (req.u1 * math.log(req.f0_1) + req.u2 * math.log(req.f0_2)))
    return complex(val)


def single_cf_grid(
    u,
    T: float,
    T1: float,
    factors: Sequence[FactorParams],
    f0: float | None = None,
    n_steps: int = DEFAULT_STEPS,
) -> np.ndarray:
    """Single-contract characteristic function on an array of arguments."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    out = joint_cf_grid(u, np.zeros_like(u), T, T1, T1, factors, n_steps)
    if f0 is not None:
        if f0 <= 0.0:
            raise ConfigError("initial futures price must be positive")
        out = out * np.exp(1j * u * math.log(f0))
    return out


def single_cf(
    u1: complex,
    T: float,
    T1: float,
    factors: Sequence[FactorParams],
    f0: float | None = None,
    n_steps: int = DEFAULT_STEPS,
) -> complex:
    """Single-contract characteristic function (u2 = 0 in the joint one)."""
    val = complex(single_cf_grid(u1, T, T1, factors, f0=None, n_steps=n_steps)[0])
    if abs(complex(u1).imag) == 0.0 and abs(val) > 1.0 + _MODULUS_SLACK:
        raise NumericalError(
            f"characteristic function modulus {abs(val):.6g} exceeds 1 for a real argument"
        )
    if f0 is not None:
        if f0 <= 0.0:
            raise ConfigError("initial futures price must be positive")
        val *= complex(np.exp(1j * complex(u1) * math.log(f0)))
    return val
