import numpy as np
import pytest
from scipy.stats import multivariate_normal

from seasonvol.data import ObservationSeries
from seasonvol.errors import ConfigError
from seasonvol.kalman import _JITTER, _filter_impl, run_filter, smooth
from seasonvol.params import FactorParams, ModelParams
from seasonvol.seasonality import Pattern, SeasonalitySpec
from seasonvol.statespace import ObservationMode, build_system

SIGMA_EPS = 1e-30  # vol-of-vol below noise, makes the state linear-Gaussian


def make_series(times, values, maturities, mode=ObservationMode.LOG_RETURNS, anchors=None):
    values = np.asarray(values, dtype=float)
    return ObservationSeries(
        mode=mode,
        times=np.asarray(times, dtype=float),
        values=values,
        maturities=np.asarray(maturities, dtype=float),
        valid=np.isfinite(values),
        zero_mask=np.zeros_like(values, dtype=bool),
        slots=tuple(f"c{j + 1}" for j in range(values.shape[1])),
        anchors=anchors,
    )


def random_linear_system(rng, mode=ObservationMode.LOG_RETURNS):
    """A small system whose exact likelihood a dense Gaussian can reproduce."""
    n = rng.integers(2, 7)
    k = rng.integers(1, 4)
    season = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.05 + 0.1 * rng.random(),
                             b=0.02 + 0.02 * rng.random(), t0=rng.random() * 0.99)
    factor = FactorParams(
        lam=0.4 * rng.random(),
        kappa=0.5 + 2.0 * rng.random(),
        sigma=SIGMA_EPS,
        rho=-0.8 + 1.6 * rng.random(),
        v0=0.03 + 0.1 * rng.random(),
        season=season,
        pi_f=rng.normal() * 2.0,
    )
    params = ModelParams(factor=factor, h=tuple(0.02 + 0.05 * rng.random(k)))
    times = np.cumsum(rng.uniform(1 / 365, 5 / 365, size=n))
    maturities = times[:, None] + np.sort(0.1 + 2.0 * rng.random(k))[None, :]
    scale = 0.02
    values = rng.normal(0.0, scale, size=(n, k))
    anchors = rng.normal(4.5, 0.1, size=k) if mode is ObservationMode.LOG_PRICES else None
    if mode is ObservationMode.LOG_PRICES:
        values = values + anchors[None, :]
    obs = make_series(times, values, maturities, mode=mode, anchors=anchors)
    init_mean = np.array([0.0, 0.0, factor.v0])
    init_cov = np.diag([1e-4, 1e-4, 0.0])  # deterministic variance state
    return obs, params, init_mean, init_cov


def dense_gaussian_moments(obs, params, init_mean, init_cov):
    """Joint observation mean/covariance from the same matrices the filter uses."""
    n, k = obs.values.shape
    f = params.factor
    systems = []
    s3 = init_mean[2]
    for i in range(n):
        if i == 0:
            sm = build_system(params, obs.times[0], 1.0, obs.maturities[0], obs.mode,
                              s3, c_offsets=obs.anchors)
            systems.append((None, None, None, sm.Z, sm.c, sm.H))
            continue
        dt = obs.times[i] - obs.times[i - 1]
        sm = build_system(params, obs.times[i - 1], dt, obs.maturities[i], obs.mode,
                          s3, c_offsets=obs.anchors)
        # loadings must be taken at the observation date
        sm_z = build_system(params, obs.times[i], 1.0, obs.maturities[i], obs.mode,
                            s3, c_offsets=obs.anchors)
        s3 = sm.d[2] + sm.T[2, 2] * s3  # deterministic variance path
        systems.append((sm.d, sm.T, sm.rqr, sm_z.Z, sm_z.c, sm_z.H))

    mus = [init_mean]
    cov = {(0, 0): init_cov}
    for i in range(1, n):
        d, T, rqr, *_ = systems[i]
        mus.append(d + T @ mus[i - 1])
        cov[(i, i)] = T @ cov[(i - 1, i - 1)] @ T.T + rqr
        for j in range(i):
            cov[(i, j)] = T @ cov[(i - 1, j)] if j < i - 1 else T @ cov[(i - 1, i - 1)]
    mean_y = np.concatenate([systems[i][4] + systems[i][3] @ mus[i] for i in range(n)])
    big = np.zeros((n * k, n * k))
    for i in range(n):
        zi = systems[i][3]
        for j in range(i + 1):
            cij = cov[(i, j)] if i != j else cov[(i, i)]
            block = zi @ cij @ systems[j][3].T
            big[i * k:(i + 1) * k, j * k:(j + 1) * k] = block
            big[j * k:(j + 1) * k, i * k:(i + 1) * k] = block.T
        big[i * k:(i + 1) * k, i * k:(i + 1) * k] += systems[i][5] + _JITTER * np.eye(k)
    return mean_y, big, mus, cov, systems


class TestAgainstDenseGaussian:
    @pytest.mark.parametrize("mode", [ObservationMode.LOG_RETURNS, ObservationMode.LOG_PRICES])
    def test_loglik_matches_joint_density(self, mode):
        rng = np.random.default_rng(101)
        for _ in range(10):
            obs, params, m0, p0 = random_linear_system(rng, mode)
            out = run_filter(obs, params, init_mean=m0, init_cov=p0)
            mean_y, big, *_ = dense_gaussian_moments(obs, params, m0, p0)
            oracle = multivariate_normal.logpdf(obs.values.ravel(), mean_y, big)
            assert out.loglik == pytest.approx(oracle, abs=1e-8)

    def test_smoother_matches_dense_conditional_means(self):
        rng = np.random.default_rng(33)
        obs, params, m0, p0 = random_linear_system(rng)
        out = run_filter(obs, params, init_mean=m0, init_cov=p0)
        sm = smooth(out)
        mean_y, big, mus, cov, systems = dense_gaussian_moments(obs, params, m0, p0)
        n, k = obs.values.shape
        resid = np.linalg.solve(big, obs.values.ravel() - mean_y)
        for i in range(n):
            cross = np.zeros((3, n * k))
            for j in range(n):
                cij = cov[(i, j)] if j <= i else cov[(j, i)].T
                cross[:, j * k:(j + 1) * k] = cij @ systems[j][3].T
            expected = mus[i] + cross @ resid
            np.testing.assert_allclose(sm.mean[i], expected, atol=1e-8)


class TestFilterBehaviour:
    def test_empty_series_has_zero_loglik(self):
        obs = make_series(np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2)))
        params = ModelParams(
            factor=FactorParams(0.2, 1.5, 0.3, -0.1, 0.08,
                                SeasonalitySpec(Pattern.CONSTANT, a=0.07)),
            h=(0.01, 0.01),
        )
        assert run_filter(obs, params).loglik == 0.0

    def _params(self, k=3, **kwargs):
        season = kwargs.pop("season", SeasonalitySpec(Pattern.SINUSOIDAL, a=0.07, b=0.05, t0=0.3))
        h = kwargs.pop("h", tuple([0.01] * k))
        defaults = dict(lam=0.2, kappa=1.5, sigma=0.3, rho=-0.1, v0=0.08, season=season, pi_f=1.0)
        defaults.update(kwargs)
        return ModelParams(factor=FactorParams(**defaults), h=h)

    def _obs(self, rng, n=40, k=3):
        times = np.cumsum(rng.uniform(1 / 365, 4 / 365, size=n))
        maturities = times[:, None] + np.sort(0.2 + 1.5 * rng.random(k))[None, :]
        values = rng.normal(0.0, 0.02, size=(n, k))
        return make_series(times, values, maturities)

    def test_contract_permutation_invariance(self):
        rng = np.random.default_rng(7)
        obs = self._obs(rng)
        params = self._params(h=(0.012, 0.008, 0.005))
        base = run_filter(obs, params).loglik
        perm = [2, 0, 1]
        obs_p = make_series(obs.times, obs.values[:, perm], obs.maturities[:, perm])
        params_p = ModelParams(factor=params.factor, h=tuple(params.h[j] for j in perm))
        assert run_filter(obs_p, params_p).loglik == pytest.approx(base, abs=1e-10)

    def test_zero_return_from_roll_in_is_consumed(self):
        rng = np.random.default_rng(8)
        obs = self._obs(rng, n=20)
        obs.values[5, 2] = 0.0
        obs.zero_mask[5, 2] = True
        out = run_filter(obs, self._params())
        assert np.isfinite(out.loglik)

    def test_missing_rows_vary_dimension(self):
        rng = np.random.default_rng(9)
        obs = self._obs(rng, n=25)
        obs.values[3, :] = np.nan
        obs.valid[3, :] = False
        obs.values[7, 1] = np.nan
        obs.valid[7, 1] = False
        out = run_filter(obs, self._params())
        assert out.k_per_date[3] == 0 and out.k_per_date[7] == 2
        assert np.isfinite(out.loglik)

    def test_inflating_noise_shrinks_innovation_weight(self):
        rng = np.random.default_rng(10)
        obs = self._obs(rng)
        p1 = self._params()
        p2 = ModelParams(factor=p1.factor, h=tuple(2.0 * h for h in p1.h))

        def quad_form(out):
            total = 0.0
            for i in range(out.innovations.shape[0]):
                sel = np.isfinite(out.innovations[i])
                v = out.innovations[i][sel]
                V = out.innovation_covs[i][np.ix_(sel, sel)]
                total += v @ np.linalg.solve(V, v)
            return total

        assert quad_form(run_filter(obs, p2)) < quad_form(run_filter(obs, p1))

    def test_loglik_continuous_in_noise_scale(self):
        rng = np.random.default_rng(11)
        obs = self._obs(rng)
        p1 = self._params()
        eps = 1e-7
        p2 = ModelParams(factor=p1.factor, h=tuple((1 + eps) * h for h in p1.h))
        l1 = run_filter(obs, p1).loglik
        l2 = run_filter(obs, p2).loglik
        assert abs(l2 - l1) < 1e-3

    def test_single_date_smoother_is_identity(self):
        rng = np.random.default_rng(12)
        obs = self._obs(rng, n=1)
        out = run_filter(obs, self._params())
        sm = smooth(out)
        np.testing.assert_array_equal(sm.mean, out.filtered_mean)

    def test_noise_free_variance_tracks_deterministic_path(self):
        season = SeasonalitySpec(Pattern.SINUSOIDAL, a=0.06, b=0.03, t0=0.4)
        params = ModelParams(
            factor=FactorParams(0.1, 2.0, SIGMA_EPS, 0.0, 0.05, season),
            h=(1e-6, 1e-6),
        )
        rng = np.random.default_rng(13)
        n = 30
        times = np.cumsum(np.full(n, 1 / 252))
        maturities = times[:, None] + np.array([0.5, 1.0])[None, :]
        values = rng.normal(0.0, 1e-4, size=(n, 2))
        obs = make_series(times, values, maturities)
        out = run_filter(obs, params, init_cov=np.diag([1e-4, 1e-4, 0.0]))
        sm = smooth(out)
        s3 = params.factor.v0
        path = [s3]
        from seasonvol.seasonality import eval_theta

        for i in range(1, n):
            dt = times[i] - times[i - 1]
            s3 = s3 + 2.0 * (eval_theta(season, times[i - 1]) - s3) * dt
            path.append(s3)
        np.testing.assert_allclose(sm.mean[:, 2], path, atol=1e-6)

    def test_mismatched_slot_count_rejected(self):
        rng = np.random.default_rng(14)
        obs = self._obs(rng, k=3)
        with pytest.raises(ConfigError):
            run_filter(obs, self._params(k=2, h=(0.01, 0.01)))

    def test_python_and_compiled_paths_agree(self):
        rng = np.random.default_rng(15)
        obs = self._obs(rng, n=15)
        params = self._params()
        out = run_filter(obs, params)
        f = params.factor
        valid = obs.valid & np.isfinite(obs.values)
        y = np.where(valid, obs.values, 0.0)
        ttm = np.where(valid, obs.maturities - obs.times[:, None], 0.0)
        e1 = np.exp(-f.lam * np.maximum(ttm, 0.0))
        from seasonvol.seasonality import eval_theta

        kth = np.zeros(len(obs.times))
        kth[1:] = f.kappa * eval_theta(f.season, obs.times[:-1]) * np.diff(obs.times)
        plain = _filter_impl(
            obs.times, y, valid, e1, kth, np.zeros(3), np.asarray(params.h) ** 2,
            f.lam, f.sigma, f.rho, f.pi_f, f.kappa - f.sigma * f.pi_v, 1.0,
            np.array([0.0, 0.0, f.v0]), np.diag([1e-4] * 3), 1e-10, _JITTER,
        )
        assert plain[0] == pytest.approx(out.loglik, abs=1e-12)
