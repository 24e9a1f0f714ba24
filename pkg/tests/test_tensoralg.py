import numpy as np
import pytest

from carnotloops import tensoralg as ta
from carnotloops.freelie import get_basis
from carnotloops.paths import PiecewiseLinearPath


SQUARE = PiecewiseLinearPath([0, 1, 2, 3, 4],
                             [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]])
L_SHAPE = PiecewiseLinearPath([0, 1, 2], [[0, 0], [1, 0], [1, 1]])


def random_path(rng, d, max_segments=6):
    m = int(rng.integers(2, max_segments + 1))
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.7, m))])
    return PiecewiseLinearPath(times, rng.normal(size=(m + 1, d)))


class TestSegmentSignature:
    def test_zero_increment(self):
        s = ta.segment_signature([0.0, 0.0], 3)
        assert s.max_abs_diff(ta.identity_series(2, 3)) == 0.0

    def test_scalar_exponential(self):
        s = ta.segment_signature([2.0], 3)
        assert s.levels[0] == 1.0
        np.testing.assert_allclose([s.levels[1][0], s.levels[2][0], s.levels[3][0]],
                                   [2.0, 2.0, 4.0 / 3.0])

    def test_level2_tensor_square(self):
        # level 2 of a (1,1) segment is the full outer product halved
        s = ta.segment_signature([1.0, 1.0], 2)
        np.testing.assert_allclose(s.levels[2], 0.5 * np.ones(4))


class TestChen:
    def test_identity_neutral(self):
        rng = np.random.default_rng(0)
        s = ta.path_signature(random_path(rng, 2), 3)
        assert ta.chen_concat(s, ta.identity_series(2, 3)).max_abs_diff(s) == 0.0

    def test_segment_reversal(self):
        dx = np.array([0.3, -1.2])
        prod = ta.chen_concat(ta.segment_signature(dx, 4), ta.segment_signature(-dx, 4))
        assert prod.max_abs_diff(ta.identity_series(2, 4)) <= 1e-15

    def test_l_shaped_level2(self):
        sig = ta.path_signature(L_SHAPE, 2)
        assert sig.get((1, 2)) == pytest.approx(1.0, abs=1e-15)
        assert sig.get((2, 1)) == pytest.approx(0.0, abs=1e-15)
        assert sig.get((1, 1)) == pytest.approx(0.5, abs=1e-15)
        assert sig.get((2, 2)) == pytest.approx(0.5, abs=1e-15)

    def test_chen_identity_under_rebracketing(self):
        rng = np.random.default_rng(5)
        p1, p2, p3 = (random_path(rng, 2) for _ in range(3))
        whole = p1.concat(p2).concat(p3)
        lhs = ta.path_signature(whole, 4)
        rhs = ta.chen_concat(ta.path_signature(p1, 4),
                             ta.chen_concat(ta.path_signature(p2, 4),
                                            ta.path_signature(p3, 4)))
        assert lhs.max_abs_diff(rhs) <= 1e-12


class TestPathSignature:
    def test_constant_path(self):
        p = PiecewiseLinearPath([0, 1, 2], [[1, 1], [1, 1], [1, 1]])
        assert ta.path_signature(p, 3).max_abs_diff(ta.identity_series(2, 3)) == 0.0

    def test_single_segment(self):
        p = PiecewiseLinearPath([0, 2], [[0, 0], [0.7, -0.4]])
        sig = ta.path_signature(p, 3)
        assert sig.max_abs_diff(ta.segment_signature([0.7, -0.4], 3)) == 0.0

    def test_collinear_knot_invariance(self):
        p1 = PiecewiseLinearPath([0, 1], [[0, 0], [1, 2]])
        p2 = PiecewiseLinearPath([0, 0.25, 1], [[0, 0], [0.25, 0.5], [1, 2]])
        assert ta.path_signature(p1, 4).max_abs_diff(ta.path_signature(p2, 4)) <= 1e-14

    def test_square_loop_area(self):
        sig = ta.path_signature(SQUARE, 2)
        np.testing.assert_allclose(sig.levels[1], 0.0, atol=1e-15)
        assert sig.get((1, 2)) - sig.get((2, 1)) == pytest.approx(2.0, abs=1e-14)

    def test_reparameterization_invariance(self):
        rng = np.random.default_rng(11)
        p = random_path(rng, 3)
        warped = p.reparameterized(np.exp(p.times))
        assert ta.path_signature(p, 3).max_abs_diff(ta.path_signature(warped, 3)) == 0.0

    def test_value_scaling(self):
        rng = np.random.default_rng(12)
        p = random_path(rng, 2)
        lam = 1.7
        s1 = ta.path_signature(p.scaled(lam), 4)
        s2 = ta.path_signature(p, 4)
        for k in range(1, 5):
            np.testing.assert_allclose(s1.levels[k], lam**k * s2.levels[k],
                                       rtol=1e-12, atol=1e-12)


class TestLogExp:
    def test_log_identity_is_zero(self):
        z = ta.log_series(ta.identity_series(2, 3))
        assert z.max_abs_diff(0.0 * ta.identity_series(2, 3)) == 0.0

    def test_exp_of_level1(self):
        x = ta.identity_series(2, 3)
        x.levels[0] = 0.0
        x.levels[1] = np.array([0.4, -0.2])
        assert ta.log_series(ta.exp_series(x)).max_abs_diff(x) <= 1e-15

    def test_roundtrip_random_group_like(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            s = ta.path_signature(random_path(rng, 2), 5)
            assert ta.exp_series(ta.log_series(s)).max_abs_diff(s) <= 1e-12

    def test_log_requires_unit_scalar(self):
        s = ta.identity_series(2, 2)
        s.levels[0] = 0.5
        with pytest.raises(ValueError):
            ta.log_series(s)


class TestProjectToLie:
    def test_level1_passthrough(self):
        x = ta.identity_series(2, 2)
        x.levels[0] = 0.0
        x.levels[1] = np.array([1.5, -2.0])
        series = ta.project_to_lie(x)
        assert series.coeffs == {(1,): 1.5, (2,): -2.0}

    def test_square_loop_coefficient(self):
        series = ta.log_signature(SQUARE, 2)
        assert series.coeffs == {(1, 2): pytest.approx(1.0, abs=1e-14)}

    def test_roundtrip_expansion(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            logsig = ta.log_series(ta.path_signature(random_path(rng, 3), 3))
            series = ta.project_to_lie(logsig)
            assert ta.lie_to_tensor(series).max_abs_diff(logsig) <= 1e-10

    def test_rejects_non_primitive(self):
        bad = ta.identity_series(2, 2)
        bad.levels[0] = 0.0
        bad.levels[2] = np.array([1.0, 0.0, 0.0, 1.0])  # symmetric part
        with pytest.raises(ta.PrimitivityError):
            ta.project_to_lie(bad)


class TestIteratedIntegral:
    def test_single_segment_formula(self):
        p = PiecewiseLinearPath([0, 1], [[0, 0], [3.0, 5.0]])
        assert ta.iterated_integral(p, (1, 2)) == pytest.approx(3.0 * 5.0 / 2.0, abs=1e-14)

    def test_closed_path_level1(self):
        assert ta.iterated_integral(SQUARE, (1,)) == 0.0
        assert ta.iterated_integral(SQUARE, (2,)) == 0.0

    def test_matches_signature_entries(self):
        rng = np.random.default_rng(8)
        import itertools
        for _ in range(5):
            p = random_path(rng, 2)
            sig = ta.path_signature(p, 3)
            for k in (1, 2, 3):
                for word in itertools.product((1, 2), repeat=k):
                    assert ta.iterated_integral(p, word) == pytest.approx(
                        sig.get(word), abs=1e-12)

    def test_word_validation(self):
        with pytest.raises(ValueError):
            ta.iterated_integral(SQUARE, (1, 3))


class TestStrichartz:
    def test_level1_net_displacement(self):
        rng = np.random.default_rng(9)
        p = random_path(rng, 2)
        net = p.knots[-1] - p.knots[0]
        assert ta.strichartz_lambda(p, (1,)) == pytest.approx(net[0], abs=1e-13)
        assert ta.strichartz_lambda_raw(p, (2,)) == pytest.approx(net[1], abs=1e-13)

    def test_square_loop_values(self):
        assert ta.strichartz_lambda(SQUARE, (1, 2)) == pytest.approx(1.0, abs=1e-13)
        assert ta.strichartz_lambda_raw(SQUARE, (1, 2)) == pytest.approx(0.5, abs=1e-13)

    def test_repeated_letter_raw_vanishes(self):
        rng = np.random.default_rng(10)
        for path in (SQUARE, random_path(rng, 2)):
            assert ta.strichartz_lambda_raw(path, (1, 1)) == pytest.approx(0.0, abs=1e-14)

    def test_level_cap(self):
        with pytest.raises(ValueError):
            ta.strichartz_lambda_raw(SQUARE, (1, 2, 1, 2, 1))

    def test_requires_lyndon_word(self):
        with pytest.raises(ValueError):
            ta.strichartz_lambda(SQUARE, (2, 1))

    def test_matches_lyndon_log_signature(self):
        rng = np.random.default_rng(13)
        for d in (2, 3):
            words = [w for w in get_basis(d, 3).words]
            for _ in range(10):
                p = random_path(rng, d)
                series = ta.log_signature(p, 3)
                for w in words:
                    assert ta.strichartz_lambda(p, w) == pytest.approx(
                        series.coeffs.get(w, 0.0), abs=1e-9)
