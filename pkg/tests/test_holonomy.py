import math

import numpy as np
import pytest

from carnotloops import holonomy as hol
from carnotloops import loops, sde
from test_loops import discrete_area_cos, discrete_area_variance

HEIS = sde.heisenberg_fields()
ORIGIN = [0.0, 0.0, 0.0]


class TestObservable:
    def test_parse_and_eval(self):
        f = hol.Observable("cos(x3) + x1^2", 3)
        X = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, math.pi]])
        np.testing.assert_allclose(f.eval_batch(X), [1.0 + 1.0, -1.0])
        assert f([2.0, 0.0, 0.0]) == pytest.approx(5.0)

    def test_constant(self):
        f = hol.Observable("3/2", 2)
        np.testing.assert_allclose(f.eval_batch(np.zeros((4, 2))), 1.5)

    def test_apply_field_exact(self):
        # V2 f for f = z^2 with V2 = d/dy + x d/dz gives 2 x z
        f = hol.Observable("x3^2", 3)
        g = f.apply_field(HEIS.field(2))
        assert g([2.0, 7.0, 3.0]) == pytest.approx(12.0)

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            hol.as_observable(hol.Observable("x1", 2), 3)


class TestDeltaApply:
    def test_laplacian_closed_form(self):
        vf = sde.VectorFieldSpec.from_strings([["1", "0"], ["0", "1"]], n=2)
        assert hol.delta_apply(vf, "x1^2 + x2^2", [0.0, 0.0], 0) == pytest.approx(2.0)

    def test_heisenberg_quadratic(self):
        assert hol.delta_apply(HEIS, "x3^2", ORIGIN, 1) == pytest.approx(1.0 / 12.0)

    def test_linear_observable_killed(self):
        assert hol.delta_apply(HEIS, "x3", ORIGIN, 1) == 0.0
        assert hol.delta_apply(HEIS, "x1 + 2*x2", ORIGIN, 1) == 0.0

    def test_cosine(self):
        assert hol.delta_apply(HEIS, "cos(x3)", ORIGIN, 1) == pytest.approx(-1.0 / 24.0)

    def test_no_closed_form_beyond_one(self):
        with pytest.raises(ValueError):
            hol.exact_moment_coefficients(2, 2)

    def test_monte_carlo_coefficients_match_exact(self):
        cfg = loops.SamplerConfig(m=256, eps=0.05)
        mm = hol.loop_moment_matrix(2, 1, 20_000, cfg, seed=31)
        exact = hol.delta_apply(HEIS, "x3^2", ORIGIN, 1)
        mc = hol.delta_apply(HEIS, "x3^2", ORIGIN, 1, moments=mm)
        # (1/2) c * d2/dz2(z^2) = c, so the propagated error is the entry stderr
        assert abs(mc - exact) <= 3 * mm.stderr[0, 0] + 0.25 / 256

    def test_matrix_shape_guard(self):
        cfg = loops.SamplerConfig(m=64, eps=0.05)
        mm = hol.loop_moment_matrix(2, 1, 500, cfg, seed=32)
        with pytest.raises(ValueError):
            hol.delta_apply(HEIS, "x3^2", ORIGIN, 0, moments=mm)


class TestSinhDeterminant:
    def test_zero(self):
        assert hol.sinh_determinant([0.0], 1.0) == 1.0
        assert hol.sinh_determinant([], 1.0) == 1.0

    def test_reference_value(self):
        assert hol.sinh_determinant([1.0], 1.0) == pytest.approx(0.5 / math.sinh(0.5),
                                                                 abs=1e-15)
        assert hol.sinh_determinant([1.0], 1.0) == pytest.approx(0.95952, abs=5e-6)

    def test_multiple_pairs(self):
        v = hol.sinh_determinant([1.0, 2.0], 1.0)
        assert v == pytest.approx((0.5 / math.sinh(0.5)) * (1.0 / math.sinh(1.0)),
                                  abs=1e-14)

    def test_series_branch_continuity(self):
        lo = hol.sinh_determinant([9.999e-5], 1.0)
        hi = hol.sinh_determinant([1.001e-4], 1.0)
        assert abs(lo - hi) < 1e-12
        x = 5e-5 * 0.5
        assert hol.sinh_determinant([5e-5], 1.0) == pytest.approx(1 - x * x / 6, abs=1e-18)


class TestEstimateHolonomy:
    def test_constant_observable(self):
        cfg = loops.SamplerConfig(m=8, eps=0.05)
        est = hol.estimate_holonomy(HEIS, "5", ORIGIN, 1, 1.0, 100, cfg, seed=1)
        assert est.value == pytest.approx(5.0)
        assert est.stderr == pytest.approx(0.0, abs=1e-15)

    def test_commuting_fields_fix_observables(self):
        vf = sde.commuting_linear_fields()
        cfg = loops.SamplerConfig(m=16, eps=0.05)
        est = hol.estimate_holonomy(vf, "x1^2 + x2", [0.4, -0.2], 1, 1.0, 64, cfg,
                                    seed=2, substeps=32)
        assert abs(est.value - (0.4**2 - 0.2)) <= 1e-8
        assert est.stderr <= 1e-8

    def test_matches_discrete_oracle(self):
        # sharp check against the exact law of the discrete polygon area
        m, M, lam = 64, 40_000, 1.0
        cfg = loops.SamplerConfig(m=m, eps=0.05)
        est = hol.estimate_holonomy(HEIS, f"cos({lam}*x3)", ORIGIN, 1, 1.0, M, cfg,
                                    seed=3, antithetic=False, substeps=1)
        target = discrete_area_cos(lam, m)
        assert abs(est.value - target) <= 3.5 * est.stderr

    def test_antithetic_pairing(self):
        cfg = loops.SamplerConfig(m=32, eps=0.05)
        est_a = hol.estimate_holonomy(HEIS, "x3^2", ORIGIN, 1, 1.0, 2000, cfg, seed=4,
                                      antithetic=True, substeps=1)
        est_p = hol.estimate_holonomy(HEIS, "x3^2", ORIGIN, 1, 1.0, 2000, cfg, seed=4,
                                      antithetic=False, substeps=1)
        target = discrete_area_variance(32)
        assert abs(est_a.value - target) <= 4 * est_a.stderr
        assert abs(est_p.value - target) <= 4 * est_p.stderr

    def test_relabeling_invariance(self):
        # swapping driver coordinates together with field labels preserves the
        # law; matched seeds give independent draws of the same estimand
        swapped = sde.VectorFieldSpec.from_polynomials([HEIS.field(2), HEIS.field(1)])
        cfg = loops.SamplerConfig(m=64, eps=0.05)
        e1 = hol.estimate_holonomy(HEIS, "cos(x3)", ORIGIN, 1, 1.0, 20_000, cfg,
                                   seed=5, antithetic=False, substeps=1)
        e2 = hol.estimate_holonomy(swapped, "cos(x3)", ORIGIN, 1, 1.0, 20_000, cfg,
                                   seed=5, antithetic=False, substeps=1)
        z = (e1.value - e2.value) / math.sqrt(e1.stderr**2 + e2.stderr**2)
        assert abs(z) <= 3.0

    def test_requires_two_samples(self):
        cfg = loops.SamplerConfig(m=8, eps=0.05)
        with pytest.raises(ValueError):
            hol.estimate_holonomy(HEIS, "x3", ORIGIN, 1, 1.0, 1, cfg, seed=6)


class TestMomentMatrix:
    def test_level2_entry_against_discrete_oracle(self):
        m, M = 128, 30_000
        cfg = loops.SamplerConfig(m=m, eps=0.05)
        mm = hol.loop_moment_matrix(2, 1, M, cfg, seed=7, antithetic=False)
        assert mm.words == [(1, 2)]
        assert abs(mm.matrix[0, 0] - discrete_area_variance(m)) <= 3 * mm.stderr[0, 0]
        assert abs(mm.first_moments[0]) <= 3 * mm.first_stderr[0]

    def test_d3_matrix_structure(self):
        cfg = loops.SamplerConfig(m=32, eps=0.05)
        mm = hol.loop_moment_matrix(3, 1, 20_000, cfg, seed=8)
        assert mm.words == [(1, 2), (1, 3), (2, 3)]
        # off-diagonal moments vanish by coordinate-flip symmetry
        for a in range(3):
            for b in range(3):
                if a != b:
                    assert abs(mm.matrix[a, b]) <= 4 * mm.stderr[a, b]
        eig = np.linalg.eigvalsh(mm.matrix)
        assert eig.min() >= -3 * mm.stderr.max()

    def test_minimum_sample_size(self):
        with pytest.raises(ValueError):
            hol.loop_moment_matrix(2, 1, 50, loops.SamplerConfig(m=8, eps=0.05), seed=9)


class TestSlopeFit:
    def test_commuting_fields_inconclusive(self):
        vf = sde.commuting_linear_fields()
        cfg = loops.SamplerConfig(m=16, eps=0.05)
        fit = hol.slope_fit(vf, "x1^2", [0.3, 0.2], 1, [0.4, 0.2, 0.1], 600, cfg,
                            seed=10, substeps=16)
        assert fit.inconclusive
        assert math.isnan(fit.exponent)

    def test_quadratic_rate_small_budget(self):
        cfg = loops.SamplerConfig(m=64, eps=0.05)
        fit = hol.slope_fit(HEIS, "cos(x3)", ORIGIN, 1, [0.4, 0.2, 0.1], 90_000, cfg,
                            seed=11, substeps=1)
        assert not fit.inconclusive
        assert fit.exponent == pytest.approx(2.0, abs=0.2)
        assert fit.constant == pytest.approx(-1.0 / 24.0, rel=0.25)

    def test_grid_validation(self):
        cfg = loops.SamplerConfig(m=8, eps=0.05)
        with pytest.raises(ValueError):
            hol.slope_fit(HEIS, "cos(x3)", ORIGIN, 1, [0.4, 0.2], 1000, cfg, seed=12)


def test_batch_means_sanity():
    rng = np.random.default_rng(0)
    x = rng.normal(size=4000)
    mean, se = hol._batch_means(x)
    assert mean == pytest.approx(x.mean(), abs=1e-12)
    assert se == pytest.approx(x.std() / math.sqrt(len(x)), rel=0.6)
