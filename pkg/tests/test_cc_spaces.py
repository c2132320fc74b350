import numpy as np
import pytest

from gmt_rect import cc_spaces as cc
from gmt_rect import heisenberg as hb
from gmt_rect.errors import (
    ContractViolationError,
    DegenerateFieldsError,
    NotHorizontalError,
)


def euclid2():
    return cc.euclidean_system(2, cc.Box(np.zeros(2), np.ones(2)))


class TestSystems:
    def test_builtin_validation_records_margins(self):
        sys_ = euclid2()
        assert sys_.check.min_field_norm == pytest.approx(1.0)
        assert sys_.check.min_singular_value == pytest.approx(1.0)

    def test_grushin_rejected_across_degenerate_line(self):
        with pytest.raises(DegenerateFieldsError):
            cc.grushin_system(cc.Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0])))

    def test_grushin_accepted_away_from_line(self):
        sys_ = cc.grushin_system(cc.Box(np.array([0.5, -1.0]), np.array([2.0, 1.0])))
        assert sys_.check.min_field_norm >= 0.5

    def test_toml_configuration(self):
        sys_ = cc.system_from_toml(
            '[system]\nname = "grushin"\nbox_lo = [0.5, -1.0]\nbox_hi = [2.0, 1.0]\n'
        )
        assert sys_.name == "grushin"
        with pytest.raises(DegenerateFieldsError):
            cc.system_from_toml(
                '[system]\nname = "grushin"\nbox_lo = [-1.0, -1.0]\nbox_hi = [1.0, 1.0]\n'
            )
        with pytest.raises(ContractViolationError):
            cc.system_from_toml('[system]\nname = "nope"\nbox_lo = [0]\nbox_hi = [1]\n')

    def test_toml_heisenberg(self):
        sys_ = cc.system_from_toml(
            '[system]\nname = "heisenberg"\nn = 1\n'
            'box_lo = [-1.0, -1.0, -1.0]\nbox_hi = [1.0, 1.0, 1.0]\n'
        )
        assert sys_.n == 3 and sys_.m == 2


class TestHorizontalNorm:
    def test_zero_vector(self):
        assert cc.horizontal_norm(euclid2(), np.zeros(2), np.zeros(2)) == 0.0

    def test_orthonormal_field(self):
        assert cc.horizontal_norm(euclid2(), np.zeros(2),
                                  np.array([1.0, 0.0])) == pytest.approx(1.0)

    def test_three_four_five(self):
        v = np.array([3.0, 4.0])
        assert cc.horizontal_norm(euclid2(), np.zeros(2), v) == pytest.approx(5.0)

    def test_non_horizontal_rejected(self):
        sys_ = cc.heisenberg_frame_system(1)
        with pytest.raises(NotHorizontalError):
            cc.horizontal_norm(sys_, np.zeros(3), np.array([0.0, 0.0, 1.0]))

    def test_coefficient_recovery_exact(self):
        rng = np.random.default_rng(0)
        sys_ = cc.heisenberg_frame_system(1)
        for _ in range(50):
            p = rng.normal(size=3)
            a = rng.normal(size=2)
            v = sys_.frame(p) @ a
            assert cc.horizontal_norm(sys_, p, v) == pytest.approx(
                float(np.linalg.norm(a)), abs=1e-9)


class TestPaths:
    def test_constant_path_zero_length(self):
        sys_ = euclid2()
        path = cc.integrate_path(sys_, np.zeros((10, 2)), start=np.zeros(2))
        assert cc.horizontal_length(sys_, path) == 0.0

    def test_euclidean_segment(self):
        sys_ = euclid2()
        path = cc.integrate_path(sys_, np.tile([1.0, 0.0], (10, 1)),
                                 start=np.zeros(2))
        assert cc.horizontal_length(sys_, path) == pytest.approx(1.0)
        assert np.allclose(path.positions[-1], [1.0, 0.0])

    def test_heisenberg_frame_segment_cross_check(self):
        # same x-axis segment through the group-exact integrator: length 1
        sys_ = cc.heisenberg_frame_system(1)
        controls = np.tile([1.0, 0.0], (12, 1))
        path = cc.integrate_path(sys_, controls, start=np.zeros(3))
        assert cc.horizontal_length(sys_, path) == pytest.approx(1.0)
        exact = hb.integrate_controls(controls)
        assert np.allclose(path.positions[-1], exact.positions[-1], atol=1e-9)
        assert exact.horizontal_length == pytest.approx(1.0)

    def test_midpoint_step_residual_second_order(self):
        # custom (programmatic) fields with a nonlinear coefficient; halving
        # the step shrinks the endpoint error ~4x (second order).  No
        # analytic frame jacobian: the finite-difference fallback serves.
        def frame(p):
            p = np.asarray(p, float)
            out = np.zeros(p.shape[:-1] + (2, 2))
            out[..., 0, 0] = 1.0
            out[..., 1, 1] = np.sin(p[..., 0])
            return out

        sys_ = cc.VectorFieldSystem(
            "sin-shear", 2, 2, frame,
            cc.Box(np.array([0.5, -3.0]), np.array([2.5, 3.0])))
        controls = np.tile([0.35, 0.9], (8, 1))
        start = np.array([0.7, 0.0])
        fine = np.repeat(controls, 16, axis=0)
        ref = cc.integrate_path(sys_, fine, start=start).positions[-1]
        errs = []
        for rep in (1, 2):
            c = np.repeat(controls, rep, axis=0)
            end = cc.integrate_path(sys_, c, start=start).positions[-1]
            errs.append(float(np.linalg.norm(end - ref)))
        assert errs[1] < 0.35 * errs[0]

    def test_length_sandwich_against_euclidean(self):
        # C^-1 len <= horizontal length <= C len with the sampled constant
        sys_ = cc.heisenberg_frame_system(1)
        c = cc.length_comparison_constant(sys_)
        rng = np.random.default_rng(1)
        for _ in range(20):
            controls = rng.normal(size=(15, 2))
            path = cc.integrate_path(sys_, controls, start=np.zeros(3))
            lh = cc.horizontal_length(sys_, path)
            le = float(np.sum(np.linalg.norm(np.diff(path.positions, axis=0),
                                             axis=1)))
            assert lh <= c * le * (1 + 1e-6)
            assert lh >= le / c * (1 - 1e-6)


class TestObjectiveGradient:
    def test_matches_finite_differences(self):
        sys_ = cc.heisenberg_frame_system(1)
        rng = np.random.default_rng(2)
        m_steps = 5
        v = rng.normal(size=m_steps * sys_.m)
        start = np.zeros((1, 3))
        target = np.array([[0.3, -0.2, 0.1]])
        lam = rng.normal(size=(1, 3))
        args = (sys_, 1, m_steps, 1.0 / m_steps, start, target, lam, 50.0,
                1e-3, 10.0)
        _, grad = cc._cc_objective(v, *args)
        fd = np.zeros_like(v)
        eps = 1e-6
        for i in range(len(v)):
            dv = np.zeros_like(v)
            dv[i] = eps
            fp, _ = cc._cc_objective(v + dv, *args)
            fm, _ = cc._cc_objective(v - dv, *args)
            fd[i] = (fp - fm) / (2 * eps)
        assert np.allclose(grad, fd, rtol=1e-4, atol=1e-6)


class TestIntrinsicDistance:
    def test_coincident(self):
        res = cc.cc_distance_general(euclid2(), np.array([0.3, 0.3]),
                                     np.array([0.3, 0.3]))
        assert res.upper == 0.0

    def test_euclidean_straight_segment(self):
        res = cc.cc_distance_general(euclid2(), np.zeros(2),
                                     np.array([1.0, 0.0]), segments=12,
                                     restarts=2, seed=1)
        assert res.upper == pytest.approx(1.0, rel=0.01)
        assert res.miss <= 1e-6 * euclid2().domain.diameter

    def test_grushin_explicit_path_bound(self):
        # feasible oracle: hold x = 1, unit vertical control, length 1
        sys_ = cc.grushin_system(cc.Box(np.array([0.5, -0.5]),
                                        np.array([2.0, 1.5])))
        res = cc.cc_distance_general(sys_, np.array([1.0, 0.0]),
                                     np.array([1.0, 1.0]), segments=16,
                                     restarts=3, seed=2)
        assert res.upper <= 1.02

    def test_vertical_target_through_general_solver(self):
        # cross-check against the group-specific optimizer: ~ sqrt(pi/2)
        sys_ = cc.heisenberg_frame_system(1)
        res = cc.cc_distance_general(sys_, np.zeros(3),
                                     np.array([0.0, 0.0, 0.5]), segments=16,
                                     restarts=4, seed=3)
        oracle = hb.cc_distance(np.zeros(3), np.array([0.0, 0.0, 0.5]),
                                segments=16, restarts=3, seed=4).upper
        assert res.upper == pytest.approx(oracle, rel=0.05)

    def test_symmetry_within_tolerance(self):
        sys_ = euclid2()
        rng = np.random.default_rng(5)
        for _ in range(3):
            p, q = rng.random((2, 2))
            a = cc.cc_distance_general(sys_, p, q, segments=10, restarts=2,
                                       seed=6).upper
            b = cc.cc_distance_general(sys_, q, p, segments=10, restarts=2,
                                       seed=7).upper
            assert abs(a - b) <= 2e-2 * max(a, b, 1e-6)

    def test_unreachable_tolerance_reports_residual(self):
        from gmt_rect.errors import NoPathFoundError

        with pytest.raises(NoPathFoundError) as info:
            cc.cc_distance_general(euclid2(), np.zeros(2),
                                   np.array([0.5, 0.5]), segments=8,
                                   restarts=1, seed=9, miss_tol=0.0)
        assert info.value.best_miss is not None

    def test_restart_history_monotone_best(self):
        res = cc.cc_distance_general(euclid2(), np.zeros(2),
                                     np.array([0.7, 0.4]), segments=10,
                                     restarts=3, seed=8)
        lengths = [h["length"] for h in res.diagnostics["restarts"]
                   if h["miss"] <= 1e-6 * euclid2().domain.diameter]
        best_seen = np.minimum.accumulate(lengths)
        assert res.upper == pytest.approx(best_seen[-1])

    def test_cc_metric_oracle_wrapper(self):
        oracle = cc.cc_metric(euclid2(), segments=8, restarts=1, seed=4)
        assert oracle.point_kind == "cc"
        d = oracle.dist(np.zeros(2), np.array([0.3, 0.4]))
        assert d == pytest.approx(0.5, rel=0.02)


class TestWeakBld:
    def curves(self, sys_, seed=0, count=6):
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(count):
            controls = rng.normal(size=(12, sys_.m))
            out.append(cc.integrate_path(sys_, controls,
                                         start=np.full(sys_.n, 0.5)))
        return out

    def test_identity_ratios_one(self):
        sys_ = euclid2()
        rep = cc.weak_bld_estimate(lambda p: p, self.curves(sys_), bound=2.0)
        assert rep.ratio_min == pytest.approx(1.0, abs=1e-6)
        assert rep.ratio_max == pytest.approx(1.0, abs=1e-6)
        assert rep.verdict == "PASS"

    def test_uniform_scaling_ratio_two(self):
        sys_ = euclid2()
        rep = cc.weak_bld_estimate(lambda p: 2.0 * p, self.curves(sys_),
                                   bound=4.0)
        assert rep.ratio_min == pytest.approx(2.0, abs=1e-6)
        assert rep.ratio_max == pytest.approx(2.0, abs=1e-6)
        assert rep.implied_two_sided == pytest.approx(2.0, abs=1e-6)

    def test_identity_chart_on_group_frame(self):
        sys_ = cc.heisenberg_frame_system(1)
        c = cc.length_comparison_constant(sys_)
        rep = cc.weak_bld_estimate(lambda p: p, self.curves(sys_, seed=3),
                                   bound=c * 1.0001)
        assert rep.verdict == "PASS"

    def test_rank_deficient_map_fails_lower_bound(self):
        # vertical segments collapse: image length 0, ratio 0
        sys_ = euclid2()
        vertical = cc.integrate_path(sys_, np.tile([0.0, 1.0], (10, 1)),
                                     start=np.array([0.5, 0.0]))

        def collapse(p):
            out = p.copy()
            out[:, 1] = 0.0
            return out

        rep = cc.weak_bld_estimate(collapse, [vertical], bound=4.0)
        assert rep.ratio_min == pytest.approx(0.0, abs=1e-12)
        assert rep.verdict == "FAIL"

    def test_composition_bounds_multiply(self):
        sys_ = euclid2()
        curves = self.curves(sys_, seed=9)
        theta = 0.6
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        rep1 = cc.weak_bld_estimate(lambda p: 2.0 * p, curves)
        rep2 = cc.weak_bld_estimate(lambda p: p @ rot.T, curves)
        comp = cc.weak_bld_estimate(lambda p: (2.0 * p) @ rot.T, curves)
        assert comp.ratio_max <= rep1.ratio_max * rep2.ratio_max * (1 + 1e-9)
        assert comp.ratio_min >= rep1.ratio_min * rep2.ratio_min * (1 - 1e-9)

    def test_zero_length_curve_skipped(self):
        sys_ = euclid2()
        still = cc.integrate_path(sys_, np.zeros((5, 2)),
                                  start=np.array([0.5, 0.5]))
        with pytest.warns(UserWarning):
            rep = cc.weak_bld_estimate(lambda p: p,
                                       [still] + self.curves(sys_, seed=1,
                                                             count=2))
        assert rep.skipped == 1


class TestQuasiconvexity:
    def test_convex_box_ratio_one(self):
        from gmt_rect.metric_core import euclidean_metric

        rng = np.random.default_rng(4)
        pts = rng.random((12, 2))
        opt = cc.polyline_optimizer(box=cc.Box(np.zeros(2), np.ones(2)),
                                    waypoints=8, restarts=1)
        rep = cc.quasiconvexity_probe(euclidean_metric(), pts, 12, opt, seed=1)
        assert rep.m_constant == pytest.approx(1.0, rel=0.01)

    def test_annulus_detour_bounded_by_half_pi(self):
        # shortest arc vs chord oracle on the circle: worst ratio pi/2
        from gmt_rect.metric_core import euclidean_metric

        angles = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        pts = 0.55 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        box = cc.Box(-np.ones(2), np.ones(2))
        opt = cc.polyline_optimizer(box=box, obstacle=(np.zeros(2), 0.5),
                                    waypoints=24, restarts=2, seed=5)
        rep = cc.quasiconvexity_probe(euclidean_metric(), pts, 24, opt, seed=2)
        assert rep.m_constant > 1.0
        assert rep.m_constant <= np.pi / 2 * 1.05

    def test_budget_contract(self):
        from gmt_rect.metric_core import euclidean_metric

        with pytest.raises(ContractViolationError):
            cc.quasiconvexity_probe(euclidean_metric(), np.zeros((5, 2)), 5,
                                    lambda x, y: (0.0, True))

    def test_group_ball_is_a_length_metric(self):
        # curve length and distance come from independently seeded runs of
        # the same optimizer, so their worst ratio sits at 1 up to slack
        from gmt_rect.metric_core import MetricOracle

        rng = np.random.default_rng(12)
        raw = rng.normal(size=(8, 3)) * 0.4

        def upper(p, q, seed):
            target = hb.h_group(hb.h_inverse(p), q)
            return float(hb.cc_upper_bounds(target[None], segments=10,
                                            restarts=2, seed=seed)[0])

        oracle = MetricOracle("cc", lambda p, q: np.array(
            [upper(a, b, seed=31) for a, b in
             zip(np.atleast_2d(p), np.atleast_2d(q))])
            if np.asarray(p).ndim > 1 else upper(p, q, seed=31))
        rep = cc.quasiconvexity_probe(oracle, raw, 10,
                                      lambda x, y: (upper(x, y, seed=77), True),
                                      seed=3)
        assert rep.m_constant == pytest.approx(1.0, abs=0.2)
