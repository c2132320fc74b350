import numpy as np
import pytest

from gmt_rect import heisenberg as hb
from gmt_rect.errors import ContractViolationError
from gmt_rect.measure import fit_loglog
from gmt_rect.metric_core import SampledMap, box_indices
from gmt_rect.synthetic import heisenberg_lift_surface, horizontal_lift


def random_points(rng, count, n=1, scale=3.0):
    return rng.normal(size=(count, 2 * n + 1)) * scale


class TestGroupLaw:
    def test_identity_element(self):
        rng = np.random.default_rng(0)
        p = random_points(rng, 100)
        e = np.zeros(3)
        assert np.allclose(hb.h_group(e, p), p)
        assert np.allclose(hb.h_group(p, e), p)

    def test_adopted_sign_convention(self):
        out = hb.h_group(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        assert np.allclose(out, [1.0, 1.0, -2.0])

    def test_inverse_axiom(self):
        rng = np.random.default_rng(1)
        p = random_points(rng, 1000)
        e = hb.h_group(p, hb.h_inverse(p))
        assert np.max(np.abs(e)) <= 1e-12 * np.max(np.abs(p)) * 10

    def test_associativity(self):
        rng = np.random.default_rng(2)
        p, q, r = (random_points(rng, 10_000) for _ in range(3))
        left = hb.h_group(hb.h_group(p, q), r)
        right = hb.h_group(p, hb.h_group(q, r))
        assert np.max(np.abs(left - right)) <= 1e-12 * max(1.0, np.max(np.abs(left)))

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolationError):
            hb.h_group(np.zeros(3), np.zeros(5))


class TestDilations:
    def test_unit_factor(self):
        p = np.array([0.3, -0.4, 0.7])
        assert np.allclose(hb.h_dilate(p, 1.0), p)

    def test_componentwise_formula(self):
        assert np.allclose(hb.h_dilate(np.array([1.0, 0.0, 3.0]), 2.0),
                           [2.0, 0.0, 12.0])

    def test_inverse_dilation(self):
        rng = np.random.default_rng(3)
        p = random_points(rng, 200)
        assert np.allclose(hb.h_dilate(hb.h_dilate(p, 2.0), 0.5), p)

    def test_nonpositive_factor_rejected(self):
        with pytest.raises(ContractViolationError):
            hb.h_dilate(np.zeros(3), 0.0)


class TestKoranyiMetric:
    def test_zero_distance(self):
        p = np.array([0.2, 0.1, -0.3])
        assert hb.koranyi_distance(p, p) == 0.0

    def test_unit_horizontal_vector(self):
        assert hb.koranyi_distance(np.zeros(3), np.array([1.0, 0.0, 0.0])) == 1.0

    def test_unit_vertical_vector(self):
        # gauge (0 + 1)^(1/4) = 1
        assert hb.koranyi_distance(np.zeros(3), np.array([0.0, 0.0, 1.0])) == 1.0

    def test_left_invariance(self):
        rng = np.random.default_rng(4)
        p, q, g = (random_points(rng, 5000) for _ in range(3))
        d1 = hb.koranyi_gauge(hb.h_group(hb.h_inverse(p), q))
        d2 = hb.koranyi_gauge(hb.h_group(hb.h_inverse(hb.h_group(g, p)),
                                         hb.h_group(g, q)))
        assert np.max(np.abs(d1 - d2)) <= 1e-12 * max(1.0, d1.max())

    def test_homogeneity(self):
        rng = np.random.default_rng(5)
        p, q = (random_points(rng, 5000) for _ in range(2))
        for r in (0.25, 2.0, 7.5):
            d1 = hb.koranyi_gauge(hb.h_group(hb.h_inverse(hb.h_dilate(p, r)),
                                             hb.h_dilate(q, r)))
            d0 = hb.koranyi_gauge(hb.h_group(hb.h_inverse(p), q))
            assert np.max(np.abs(d1 - r * d0)) <= 1e-12 * max(1.0, d1.max())

    @pytest.mark.parametrize("n", [1, 2])
    def test_triangle_inequality(self, n):
        rng = np.random.default_rng(6)
        p, q, r = (random_points(rng, 20_000, n=n) for _ in range(3))
        oracle = hb.koranyi_metric(n)
        viol = (oracle.dist_aligned(p, q) - oracle.dist_aligned(p, r)
                - oracle.dist_aligned(r, q))
        assert float(viol.max()) <= 1e-12

    def test_smooth_away_from_center(self):
        # finite-difference gradients of q -> d(p, q) vary continuously
        p = np.zeros(3)
        base = np.array([0.5, 0.2, 0.3])
        eps = 1e-5

        def grad(at):
            g = np.zeros(3)
            for i in range(3):
                d = np.zeros(3)
                d[i] = eps
                g[i] = (hb.koranyi_distance(p, at + d)
                        - hb.koranyi_distance(p, at - d)) / (2 * eps)
            return g

        g1 = grad(base)
        g2 = grad(base + 1e-4)
        assert np.linalg.norm(g1 - g2) < 1e-2


class TestHorizontalPaths:
    def test_straight_segment_length(self):
        controls = np.tile([1.0, 0.0], (16, 1))
        path = hb.integrate_controls(controls)
        assert path.horizontal_length == pytest.approx(1.0)
        assert np.allclose(path.positions[-1], [1.0, 0.0, 0.0], atol=1e-12)

    def test_discrete_lift_consistency(self):
        # each step is the exact group increment of its control
        rng = np.random.default_rng(7)
        controls = rng.normal(size=(20, 2))
        path = hb.integrate_controls(controls)
        dt = np.diff(path.times)
        for i in range(20):
            step = np.concatenate([controls[i] * dt[i], [0.0]])
            expect = hb.h_group(path.positions[i], step)
            assert np.allclose(path.positions[i + 1], expect, atol=1e-12)


class TestIntrinsicDistance:
    def test_coincident_points(self):
        p = np.array([0.1, 0.2, 0.3])
        bound = hb.cc_distance(p, p)
        assert bound == (0.0, 0.0)

    def test_horizontal_segment(self):
        bound = hb.cc_distance(np.zeros(3), np.array([1.0, 0.0, 0.0]),
                               segments=16, restarts=3, seed=1)
        assert bound.upper == pytest.approx(1.0, rel=0.02)
        assert bound.lower <= bound.upper

    def test_vertical_scaling_exponent(self):
        taus = [0.25, 0.5, 1.0]
        uppers = [hb.cc_distance(np.zeros(3), np.array([0.0, 0.0, t]),
                                 segments=16, restarts=3, seed=2).upper
                  for t in taus]
        slope, _ = fit_loglog(taus, uppers)
        assert slope == pytest.approx(0.5, abs=0.05)

    def test_unreachable_tolerance_reports_residual(self):
        from gmt_rect.errors import NoPathFoundError

        with pytest.raises(NoPathFoundError) as info:
            hb.cc_upper_bounds(np.array([[0.4, 0.1, 0.2]]), segments=8,
                               restarts=1, seed=5, miss_tol=0.0)
        assert info.value.best_miss is not None

    def test_bilipschitz_sandwich_on_random_pairs(self):
        # 10^3 random pairs in the unit gauge ball, both bounds honored
        rng = np.random.default_rng(11)
        raw = rng.normal(size=(2000, 3))
        g = hb.koranyi_gauge(raw)
        scale = np.maximum(g, 1.0)
        ball = raw.copy()
        ball[:, :2] /= scale[:, None]
        ball[:, 2] /= scale ** 2
        p, q = ball[:1000], ball[1000:]
        targets = hb.h_group(hb.h_inverse(p), q)
        uppers = hb.cc_upper_bounds(targets, segments=12, restarts=2, seed=3)
        gauges = hb.koranyi_gauge(targets)
        c = hb.bilipschitz_constant(1).value
        assert np.all(uppers >= gauges / c - 1e-9)
        assert np.all(uppers <= c * gauges * (1 + 1e-9))


class TestLipschitzProfile:
    def grid_map(self, fn, n_axis=64):
        idx = box_indices(2, n_axis)
        h = 1.0 / n_axis
        vals = fn(idx * h)
        return SampledMap(2, h, idx, vals, hb.koranyi_metric(1))

    def test_horizontal_line_bounded(self):
        f = self.grid_map(lambda x: np.stack(
            [x[:, 0], np.zeros(len(x)), np.zeros(len(x))], axis=1))
        profile = hb.h_lipschitz_profile(f, scale_steps=(1, 2, 4))
        ratios = [row.max_ratio for row in profile]
        assert all(r == pytest.approx(1.0, abs=1e-9) for r in ratios)
        assert hb.low_rank_check(f, tol=1e-2) == 1

    def test_planar_inclusion_blows_up(self):
        # increments (0, s, 2 x s) have gauge ~ sqrt(2 x s): slope -1/2
        f = self.grid_map(lambda x: np.stack(
            [x[:, 0], x[:, 1], np.zeros(len(x))], axis=1))
        profile = hb.h_lipschitz_profile(f, scale_steps=(1, 2, 4, 8, 16))
        scales = [row.scale for row in profile]
        ratios = [row.max_ratio for row in profile]
        slope, _ = fit_loglog(scales, ratios)
        assert slope == pytest.approx(-0.5, abs=0.1)

    def test_lift_maps_have_rank_at_most_one(self):
        # Lipschitz maps into the first group: every resolved rank <= 1
        lift = heisenberg_lift_surface(radius=2.0)
        f = self.grid_map(lambda x: lift(x))
        profile = hb.h_lipschitz_profile(f)
        assert all(row.max_ratio < 3.0 for row in profile)
        assert hb.low_rank_check(f, tol=1e-2) <= 1

        composed = heisenberg_lift_surface(
            radius=2.0, reparam=lambda x: 0.5 * (x[:, 0] + x[:, 1]))
        g = self.grid_map(lambda x: composed(x))
        assert hb.low_rank_check(g, tol=1e-2) <= 1


class TestHPoint:
    def test_wrapper_round_trip(self):
        p = hb.HPoint(np.array([1.0, 2.0]), 3.0)
        assert p.n == 1
        q = hb.HPoint.from_array(p.as_array())
        assert np.allclose(q.as_array(), [1.0, 2.0, 3.0])
        assert p.to_json_list() == [1.0, 2.0, 3.0]

    def test_wrapper_ops_match_array_ops(self):
        p = hb.HPoint(np.array([1.0, 0.0]), 0.0)
        q = hb.HPoint(np.array([0.0, 1.0]), 0.0)
        assert np.allclose(p.mul(q).as_array(), [1.0, 1.0, -2.0])
        assert p.mul(p.inv()).gauge() == 0.0
        assert np.allclose(p.dilate(2.0).as_array(), [2.0, 0.0, 0.0])


def test_profile_csv_round_trip(tmp_path):
    idx = box_indices(2, 16)
    vals = np.stack([idx[:, 0] / 16, np.zeros(len(idx)), np.zeros(len(idx))],
                    axis=1)
    f = SampledMap(2, 1 / 16, idx, vals, hb.koranyi_metric(1))
    profile = hb.h_lipschitz_profile(f, (1, 2))
    path = tmp_path / "profile.csv"
    hb.write_profile_csv(path, profile)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "scale,max_ratio"
    assert len(lines) == 3


def test_horizontal_lift_is_unit_speed():
    # the lift's height obeys t' = 2(y x' - x y'); increments stay unit pace
    lift = horizontal_lift(radius=2.0)
    s = np.linspace(0, 1, 200)
    pts = lift(s)
    d = hb.koranyi_gauge(hb.h_group(hb.h_inverse(pts[:-1]), pts[1:]))
    ratios = d / np.diff(s)
    assert np.all(ratios < 1.2)
