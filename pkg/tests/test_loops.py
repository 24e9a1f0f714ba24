import math
import warnings

import numpy as np
import pytest

from carnotloops import loops
from carnotloops import tensoralg as ta
from carnotloops.paths import PiecewiseLinearPath, from_values
from carnotloops.util import substream


def discrete_area_singular_values(m, T=1.0):
    """Oracle: the polygon Levy area of the discrete bridge is a Gaussian
    bilinear form; its law is determined by the singular values of
    0.5 (T/m) L^T K L with L the covariance square root and K the
    order-comparison sign matrix."""
    P = np.eye(m) - np.ones((m, m)) / m
    w, U = np.linalg.eigh(P)
    L = U @ np.diag(np.sqrt(np.clip(w, 0, None))) @ U.T
    K = np.sign(np.subtract.outer(np.arange(m), np.arange(m))).T
    return np.linalg.svd(0.5 * (T / m) * (L.T @ K @ L), compute_uv=False)


def discrete_area_variance(m, T=1.0):
    return float(np.sum(discrete_area_singular_values(m, T) ** 2))


def discrete_area_cos(lam, m, T=1.0):
    s = discrete_area_singular_values(m, T)
    return float(np.prod((1.0 + lam**2 * s**2) ** -0.5))


class TestBridge:
    def test_endpoints_bit_exact(self):
        vals = loops.bridge_values_batch(3, 2.0, 16, 200, seed=0)
        assert np.all(vals[:, 0, :] == 0.0)
        assert np.all(vals[:, -1, :] == 0.0)

    def test_mean_zero(self):
        M = 40_000
        vals = loops.bridge_values_batch(1, 1.0, 10, M, seed=1)
        for idx in (3, 5, 8):
            t = idx / 10
            se = math.sqrt(t * (1 - t) / M)
            assert abs(vals[:, idx, 0].mean()) <= 3 * se

    def test_variance_profile(self):
        # oracle: conditioning the walk on its endpoint leaves Var = t(1-t)/T at
        # grid times, exactly the continuous bridge covariance
        M = 60_000
        m = 8
        vals = loops.bridge_values_batch(1, 1.0, m, M, seed=2)
        for idx in range(1, m):
            t = idx / m
            expect = t * (1 - t)
            se = expect * math.sqrt(2.0 / (M - 1))
            assert abs(vals[:, idx, 0].var(ddof=1) - expect) <= 3 * se

    def test_covariance_profile(self):
        M = 60_000
        vals = loops.bridge_values_batch(1, 1.0, 10, M, seed=3)
        s_idx, t_idx = 2, 7
        s, t = 0.2, 0.7
        expect = s * (1 - t)
        prod = vals[:, s_idx, 0] * vals[:, t_idx, 0]
        se = prod.std(ddof=1) / math.sqrt(M)
        assert abs(prod.mean() - expect) <= 3 * se

    def test_sample_bridge_api(self):
        s = loops.sample_bridge(2, 1.5, 12, substream(9, 0))
        assert s.N == 1 and s.residual == 0.0
        assert s.path.d == 2 and s.path.num_segments == 12
        assert s.path.is_closed()

    def test_scaling_law(self):
        # loops at length T match sqrt(T) times time-rescaled unit loops in law
        M = 40_000
        m = 8
        v4 = loops.bridge_values_batch(1, 4.0, m, M, seed=4)
        v1 = loops.bridge_values_batch(1, 1.0, m, M, seed=5)
        mid = m // 2
        for moment in (1, 2):
            a = v4[:, mid, 0] ** moment
            b = (2.0 * v1[:, mid, 0]) ** moment
            se = math.sqrt(a.var(ddof=1) / M + b.var(ddof=1) / M)
            assert abs(a.mean() - b.mean()) <= 3 * se


class TestAreasAndResiduals:
    def test_square_loop_area(self):
        vals = np.array([[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]], dtype=float)
        np.testing.assert_allclose(loops.pair_areas(vals), [[1.0]])

    def test_area_is_level2_lyndon_coordinate(self):
        rng = np.random.default_rng(6)
        vals = loops.bridge_values_batch(3, 1.0, 6, 10, seed=7)
        areas = loops.pair_areas(vals)
        for i, v in enumerate(vals):
            series = ta.log_signature(from_values(v, T=1.0), 2)
            np.testing.assert_allclose(
                areas[i],
                [series.coeffs.get(w, 0.0) for w in [(1, 2), (1, 3), (2, 3)]],
                atol=1e-12)

    def test_discrete_area_variance_oracle(self):
        M = 120_000
        m = 8
        vals = loops.bridge_values_batch(2, 1.0, m, M, seed=8)
        areas = loops.pair_areas(vals)[:, 0]
        expect = discrete_area_variance(m)
        se = (areas**2).std(ddof=1) / math.sqrt(M)
        assert abs((areas**2).mean() - expect) <= 3 * se

    def test_discrete_cos_oracle(self):
        M = 120_000
        m = 16
        vals = loops.bridge_values_batch(2, 1.0, m, M, seed=9)
        c = np.cos(1.5 * loops.pair_areas(vals)[:, 0])
        expect = discrete_area_cos(1.5, m)
        se = c.std(ddof=1) / math.sqrt(M)
        assert abs(c.mean() - expect) <= 3 * se

    def test_homogeneous_residual_scaling(self):
        # dilation weighting makes the residual invariant under the
        # Brownian rescaling values -> sqrt(lam) values, T -> lam T
        rng = np.random.default_rng(10)
        vals = loops.bridge_values_batch(2, 1.0, 8, 4, seed=11)
        r1 = loops.residuals_batch(vals, 1.0, 2)
        r4 = loops.residuals_batch(2.0 * vals, 4.0, 2)
        np.testing.assert_allclose(r1, r4, rtol=1e-12)

    def test_residual_general_matches_fast_path(self):
        vals = loops.bridge_values_batch(2, 1.0, 8, 16, seed=12)
        fast = loops.residuals_batch(vals, 1.0, 2)
        slow = np.array([
            loops.homogeneous_residual(ta.log_signature(from_values(v, T=1.0), 2), 1.0, 2)
            for v in vals])
        np.testing.assert_allclose(fast, slow, atol=1e-12)


class TestRejection:
    CFG = loops.SamplerConfig(m=8, eps=0.08)

    def test_single_sample(self):
        s = loops.sample_loop_rejection(2, 2, 1.0, self.CFG, substream(13, 0))
        assert s.residual <= self.CFG.eps
        # endpoints pinned bit-exactly; the tensor fold reproduces the zero
        # level-1 coordinate to machine epsilon
        assert s.path.is_closed()
        series = loops.loop_logsig(s, 2)
        assert abs(series.coeffs.get((1,), 0.0)) <= 1e-15
        assert abs(series.coeffs.get((2,), 0.0)) <= 1e-15

    def test_batch_in_window(self):
        vals, res, stats = loops.rejection_values_batch(2, 2, 1.0, self.CFG, 64, seed=14)
        assert np.all(res <= self.CFG.eps)
        assert stats["proposals"] >= 64
        assert 0.0 < stats["acceptance_rate"] <= 1.0

    def test_iteration_cap(self):
        cfg = loops.SamplerConfig(m=8, eps=1e-6, max_tries=2000)
        with pytest.raises(loops.IterationCapError) as err:
            loops.sample_loop_rejection(2, 2, 1.0, cfg, substream(15, 0))
        assert err.value.acceptance_rate == 0.0

    def test_worker_determinism(self):
        a = loops.rejection_values_batch(2, 2, 1.0, self.CFG, 32, seed=16, workers=1)[0]
        b = loops.rejection_values_batch(2, 2, 1.0, self.CFG, 32, seed=16, workers=4)[0]
        np.testing.assert_array_equal(a, b)

    def test_antithetic_pairs(self):
        vals, res, _ = loops.rejection_values_batch(2, 2, 1.0, self.CFG, 8, seed=17,
                                                    antithetic=True)
        np.testing.assert_array_equal(vals[1::2], -vals[0::2])
        np.testing.assert_array_equal(res[1::2], res[0::2])


class TestMcmc:
    CFG = loops.SamplerConfig(m=8, eps=0.08, burnin=1500, thinning=5)

    def test_emitted_samples(self):
        vals, res, diag = loops.mcmc_values_batch(2, 2, 1.0, self.CFG, 50, seed=18)
        assert np.all(res <= self.CFG.eps)
        assert np.all(vals[:, 0] == 0.0) and np.all(vals[:, -1] == 0.0)
        assert diag["healthy"]

    def test_stream_api(self):
        stream = loops.sample_loop_mcmc(2, 2, 1.0, self.CFG, substream(19, 0))
        s = next(stream)
        assert isinstance(s, loops.LoopSample)
        assert s.residual <= self.CFG.eps
        assert s.N == 2

    def test_determinism(self):
        a = loops.mcmc_values_batch(2, 2, 1.0, self.CFG, 10, seed=20)[0]
        b = loops.mcmc_values_batch(2, 2, 1.0, self.CFG, 10, seed=20)[0]
        np.testing.assert_array_equal(a, b)

    def test_unhealthy_warning(self):
        # frozen tiny proposal scale: near-certain acceptance, no progress
        # toward the window, so the post-burn-in diagnostic must fire
        cfg = loops.SamplerConfig(m=8, eps=0.02, burnin=100, thinning=2,
                                  rho=0.001, adapt=False, indep_prob=0.0,
                                  max_tries=3000)
        with warnings.catch_warnings(record=True) as wlist:
            warnings.simplefilter("always")
            try:
                loops.mcmc_values_batch(2, 2, 1.0, cfg, 5, seed=21)
            except loops.IterationCapError:
                pass
        assert any(issubclass(w.category, loops.SamplerDiagnosticWarning) for w in wlist)


class TestLoopLogsig:
    def test_constrained_levels_small(self):
        cfg = loops.SamplerConfig(m=8, eps=0.05)
        s = loops.sample_loop_rejection(2, 2, 1.0, cfg, substream(22, 0))
        series = loops.loop_logsig(s, 3)
        assert loops.homogeneous_residual(series.truncated(2), 1.0, 2) <= cfg.eps
        # level N+1 carries no constraint and is generically nonzero
        level3 = [abs(c) for w, c in series.coeffs.items() if len(w) == 3]
        assert max(level3, default=0.0) > 1e-6

    def test_square_loop_values(self):
        path = PiecewiseLinearPath([0, 1, 2, 3, 4],
                                   [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]])
        series = loops.loop_logsig(loops.LoopSample(path, N=2, residual=1.0), 2)
        assert series.coeffs == {(1, 2): pytest.approx(1.0, abs=1e-13)}


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        loops.SamplerConfig(m=1)
    with pytest.raises(ValueError):
        loops.SamplerConfig(eps=0.0)
    with pytest.raises(ValueError):
        loops.SamplerConfig(rho=1.0)
    with pytest.raises(ValueError):
        loops.SamplerConfig(indep_prob=1.0)
