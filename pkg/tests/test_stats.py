import math

import numpy as np
import pytest

from ipolytree import synth
from ipolytree.graphs import InterventionFamily, Polytree
from ipolytree.stats import (
    Direction,
    NumericalError,
    SuffStats,
    all_root_scores,
    bic_edge_score,
    bic_orient_edge,
    bic_root_score,
    brent_maximize,
    collider_test_refined,
    collider_test_simple,
    f_test_from_moments,
    fisher_weight,
    irc_f_test,
    irc_orient_edge,
    profile_objective,
    refined_scores,
    shared_slope,
    suff_stats,
    weighted_mean,
    weighted_median,
)

from conftest import population_stats


def _sem(edges, p, fam, seed, kind="perfect"):
    g = Polytree(p, frozenset(edges))
    par = synth.draw_params(g, fam, kind, seed)
    return g, par


class TestSuffStats:
    def test_identical_columns(self, rng):
        x = rng.normal(size=50)
        s = suff_stats([np.column_stack([x, x, -x])])
        assert s.correlation(0)[0, 1] == pytest.approx(1.0)
        assert s.correlation(0)[0, 2] == pytest.approx(-1.0)

    def test_three_points(self):
        s = suff_stats([np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 4.0]])])
        x, y = np.array([0, 1, 2.0]), np.array([0, 1, 4.0])
        dx, dy = x - x.mean(), y - y.mean()
        expected = (dx @ dy) / math.sqrt((dx @ dx) * (dy @ dy))
        assert s.correlation(0)[0, 1] == pytest.approx(expected, abs=1e-15)

    def test_zero_variance_column(self, rng):
        x = np.column_stack([rng.normal(size=20), np.full(20, 3.0)])
        s = suff_stats([x])
        assert s.degenerate[0, 1] and not s.degenerate[0, 0]
        assert s.correlation(0)[0, 1] == 0.0
        assert s.correlation(0)[1, 1] == 1.0

    def test_sizes_and_symmetry(self, rng):
        data = [rng.normal(size=(n, 4)) for n in (10, 25, 7)]
        s = suff_stats(data)
        assert s.n_total == 42
        for i in range(3):
            r = s.correlation(i)
            assert np.allclose(r, r.T) and np.allclose(np.diag(r), 1)

    def test_data_backed_matches_covariance_backed(self, rng):
        data = [rng.normal(size=(30, 5)), rng.normal(size=(40, 5))]
        a, b = suff_stats(data, keep_covariance=True), suff_stats(data, keep_covariance=False)
        for i in range(2):
            np.testing.assert_allclose(a.cov(i, [1, 3]), b.cov(i, [1, 3]))
            np.testing.assert_allclose(a.correlation(i), b.correlation(i))

    def test_rejects_bad_input(self, rng):
        with pytest.raises(ValueError):
            suff_stats([rng.normal(size=(5, 3)), rng.normal(size=(5, 2))])
        with pytest.raises(ValueError):
            suff_stats([rng.normal(size=(1, 3))])


class TestAggregationPrimitives:
    def test_fisher_zero(self):
        assert fisher_weight([0, 0, 0], [5, 6, 7]) == 0

    def test_fisher_closed_form(self):
        rho = math.sqrt(1 - math.exp(-2))
        assert fisher_weight([rho], [3]) == pytest.approx(3.0)

    def test_fisher_termwise(self, rng):
        rhos = rng.uniform(-0.99, 0.99, 6)
        ns = rng.integers(5, 100, 6)
        expected = sum(-n / 2 * math.log(1 - r * r) for r, n in zip(rhos, ns))
        assert fisher_weight(rhos, ns) == pytest.approx(expected)

    def test_fisher_permutation_and_monotone(self, rng):
        rhos = rng.uniform(0, 0.9, 5)
        ns = rng.integers(5, 50, 5)
        perm = rng.permutation(5)
        assert fisher_weight(rhos[perm], ns[perm]) == pytest.approx(fisher_weight(rhos, ns))
        bumped = rhos.copy()
        bumped[2] += 0.05
        assert fisher_weight(bumped, ns) > fisher_weight(rhos, ns)

    def test_fisher_clip(self):
        assert np.isfinite(fisher_weight([1.0, -1.0], [10, 10]))

    def test_mean_median_small(self):
        assert weighted_mean([0.7], [3]) == pytest.approx(0.7)
        assert weighted_median([0.7], [3]) == 0.7
        assert weighted_mean([0, 1], [1, 1]) == 0.5
        assert weighted_median([0, 1], [1, 1]) == 0

    def test_median_sort_and_scan(self, rng):
        for _ in range(50):
            v = rng.normal(size=7)
            w = rng.integers(1, 10, 7).astype(float)
            order = np.argsort(v)
            acc, expected = 0.0, None
            for i in order:
                acc += w[i]
                if acc >= w.sum() / 2:
                    expected = v[i]
                    break
            assert weighted_median(v, w) == expected

    def test_empty(self):
        with pytest.raises(ValueError):
            weighted_mean([], [])
        with pytest.raises(ValueError):
            weighted_median([], [])


class TestIrcFTest:
    def test_identical_environments(self, rng):
        x = rng.normal(size=40)
        y = 0.8 * x + rng.normal(size=40)
        assert irc_f_test(x, y, x, y) == pytest.approx(1.0)

    def test_four_point_hand_computation(self):
        x0, y0 = np.array([0.0, 1, 2, 3]), np.array([0.1, 1.1, 1.9, 3.2])
        x1, y1 = np.array([0.0, 1, 2, 4]), np.array([0.5, 2.4, 3.9, 8.3])

        def rss(x, y):
            x, y = x - x.mean(), y - y.mean()
            b = (x @ y) / (x @ x)
            return ((y - b * x) ** 2).sum(), x, y

        r0, cx0, cy0 = rss(x0, y0)
        r1, cx1, cy1 = rss(x1, y1)
        b = (cx0 @ cy0 + cx1 @ cy1) / (cx0 @ cx0 + cx1 @ cx1)
        pooled = ((cy0 - b * cx0) ** 2).sum() + ((cy1 - b * cx1) ** 2).sum()
        f = (r0 + r1) ** 2 / (r0**2 / 2 + r1**2 / 2)
        stat = (pooled - r0 - r1) / ((r0 + r1) / f)
        from scipy import stats as sps

        assert irc_f_test(x0, y0, x1, y1) == pytest.approx(sps.f.sf(stat, 1, f), rel=1e-12)

    def test_common_affine_invariance(self, rng):
        x0, x1 = rng.normal(size=60), rng.normal(1, 2, size=60)
        y0, y1 = 1.2 * x0 + rng.normal(size=60), 0.7 * x1 + rng.normal(size=60)
        base = irc_f_test(x0, y0, x1, y1)
        assert irc_f_test(3 * x0 + 1, 3 * y0 - 2, 3 * x1 + 1, 3 * y1 - 2) == pytest.approx(base)
        assert irc_f_test(0.5 * x0, 4 * y0, 0.5 * x1, 4 * y1) == pytest.approx(base)
        assert irc_f_test(x0 + 7, y0, x1 - 3, y1 + 2) == pytest.approx(base)

    def test_degenerate_regressor(self, rng):
        assert irc_f_test(np.ones(10), rng.normal(size=10), rng.normal(size=10), rng.normal(size=10)) is None
        assert f_test_from_moments((2, 1, 0, 1), (10, 1, 0, 1)) is None

    def test_null_size(self):
        # under the invariance null the effect keeps its noise variance; only the cause moves
        rng = np.random.default_rng(1)
        pv = []
        for _ in range(400):
            x0, x1 = rng.normal(size=200), rng.normal(2, 1.5, size=200)
            pv.append(irc_f_test(x0, 0.9 * x0 + rng.normal(size=200), x1, 0.9 * x1 + rng.normal(size=200)))
        assert 0.02 < np.mean(np.array(pv) < 0.05) < 0.09

    def test_conservative_when_residual_variance_moves(self):
        rng = np.random.default_rng(1)
        pv = []
        for _ in range(400):
            x0, x1 = rng.normal(size=200), rng.normal(2, 1.5, size=200)
            pv.append(irc_f_test(x0, 0.9 * x0 + rng.normal(size=200), x1, 0.9 * x1 + rng.normal(0, 2, 200)))
        assert np.mean(np.array(pv) < 0.05) < 0.05

    def test_power(self, rng):
        x0, x1 = rng.normal(size=300), rng.normal(size=300)
        assert irc_f_test(x0, x0 + rng.normal(size=300), x1, 0.2 * x1 + rng.normal(size=300)) < 1e-6


class TestIrcOrientEdge:
    def test_no_applicable_environment(self, rng):
        s = suff_stats([rng.normal(size=(30, 2)), rng.normal(size=(30, 2))])
        res = irc_orient_edge(0, 1, s, InterventionFamily([[], [0, 1]]))
        assert res.direction is Direction.UNDECIDED and res.tests_run == 0

    @pytest.mark.parametrize("forward", [True, False])
    def test_recovers_direction(self, forward):
        fam = InterventionFamily([[], [1]])
        hits = 0
        for seed in range(100):
            edge = (0, 1) if forward else (1, 0)
            _, par = _sem([edge], 2, fam, seed)
            s = suff_stats(synth.sample(par, [2000, 2000], seed + 1000))
            res = irc_orient_edge(0, 1, s, fam)
            hits += res.direction is (Direction.U_TO_V if forward else Direction.V_TO_U)
        assert hits >= 95

    def test_both_families(self):
        fam = InterventionFamily([[], [0], [1]])
        _, par = _sem([(0, 1)], 2, fam, 3)
        s = suff_stats(synth.sample(par, [2000] * 3, 4))
        res = irc_orient_edge(0, 1, s, fam)
        assert res.direction is Direction.U_TO_V and res.tests_run == 2

    def test_population_tie_kept(self, example_b1):
        g, fam = example_b1
        s = population_stats(synth.draw_params(g, fam, seed=0))
        assert irc_orient_edge(0, 1, s, fam).direction is Direction.V_TO_U
        assert irc_orient_edge(1, 2, s, fam).direction is Direction.U_TO_V

    def test_small_environment_skipped(self, rng):
        fam = InterventionFamily([[], [0]])
        s = suff_stats([rng.normal(size=(50, 2)), rng.normal(size=(4, 2))])
        assert irc_orient_edge(0, 1, s, fam).tests_run == 0


class TestBrent:
    def test_quadratic(self):
        x, val = brent_maximize(lambda t: -(t - 0.3) ** 2, -1, 1, tol=1e-8)
        assert x == pytest.approx(0.3, abs=1e-6) and val == pytest.approx(0, abs=1e-12)

    def test_kink(self):
        x, _ = brent_maximize(lambda t: -abs(t - 0.5), -1, 1, tol=1e-8)
        assert x == pytest.approx(0.5, abs=1e-6)

    def test_boundary_maximum(self):
        x, _ = brent_maximize(lambda t: t, 0, 2)
        assert x == 2

    def test_non_finite(self):
        with pytest.raises(NumericalError):
            brent_maximize(lambda t: math.log(t) if t > 0.1 else float("nan"), 0, 1)

    def test_bad_bracket(self):
        with pytest.raises(ValueError):
            brent_maximize(lambda t: t, 1, 1)

    def test_profile_against_grid(self, rng):
        for _ in range(10):
            moms = []
            for _ in range(3):
                n = int(rng.integers(30, 100))
                x = rng.normal(size=n)
                y = rng.uniform(-2, 2) * x + rng.normal(size=n)
                moms.append((n, x @ x, x @ y, y @ y))
            lam, _ = shared_slope(moms)
            grid = np.linspace(lam - 0.5, lam + 0.5, 200_001)
            f = profile_objective(moms)
            best = grid[np.argmax([f(t) for t in grid[::100]]) * 100]
            assert abs(best - lam) < 5e-3


class TestBicEdge:
    def test_single_environment_equivalent(self):
        fam = InterventionFamily([[]])
        for seed in range(10):
            _, par = _sem([(0, 1)], 2, fam, seed)
            s = suff_stats(synth.sample(par, [5000], seed))
            gap = bic_edge_score(1, 0, s, fam).score - bic_edge_score(0, 1, s, fam).score
            assert abs(gap) < 1e-8

    def test_independent_gap_small(self, rng):
        fam = InterventionFamily([[], [1]])
        s = suff_stats([rng.normal(size=(2000, 2)), rng.normal(size=(2000, 2))])
        gap = bic_edge_score(1, 0, s, fam).score - bic_edge_score(0, 1, s, fam).score
        assert abs(gap) < math.log(4000)

    def test_dimension(self, rng):
        fam = InterventionFamily([[], [1]])
        s = suff_stats([rng.normal(size=(50, 2)), rng.normal(size=(50, 2))])
        assert bic_edge_score(0, 1, s, fam).dim == 6
        assert bic_edge_score(1, 0, s, fam).dim == 5

    def test_orients_with_intervention(self):
        fam = InterventionFamily([[], [1]])
        hits = 0
        for seed in range(30):
            _, par = _sem([(0, 1)], 2, fam, seed)
            s = suff_stats(synth.sample(par, [1000, 1000], seed + 1))
            hits += bic_orient_edge(0, 1, s, fam).direction is Direction.U_TO_V
        assert hits >= 27


class TestBicRoot:
    def test_rerooting_matches_direct(self, rng):
        g = synth.random_polytree(9, rng)
        fam = synth.random_family(9, 3, 2, rng)
        par = synth.draw_params(g, fam, seed=rng)
        s = suff_stats(synth.sample(par, [300] * 4, rng))
        edges = sorted((min(e), max(e)) for e in g.edges)
        fast = all_root_scores(edges, list(range(9)), s, fam)
        for r in range(9):
            direct = bic_root_score(edges, r, s, fam)
            assert fast[r].score == pytest.approx(direct.score, rel=1e-12)
            assert fast[r].dim == direct.dim

    def test_dimension_formula(self, rng):
        fam = InterventionFamily([[], [0], [1, 2]])
        s = suff_stats([rng.normal(size=(40, 3)) for _ in range(3)])
        edges = [(0, 1), (1, 2)]
        # root 0: 1 + |I_0| + 2(1 + |I_1|) + 2(1 + |I_2|)
        assert bic_root_score(edges, 0, s, fam).dim == 1 + 1 + 2 * 2 + 2 * 2
        assert bic_root_score([], 1, s, fam, vertices=[1]).dim == 1 + 1

    def test_two_vertex_root_agrees_with_edge_score(self):
        fam = InterventionFamily([[], [1]])
        agree = 0
        for seed in range(30):
            _, par = _sem([(0, 1)], 2, fam, seed)
            s = suff_stats(synth.sample(par, [800, 800], seed + 7))
            scores = all_root_scores([(0, 1)], [0, 1], s, fam)
            root = min(scores, key=lambda r: scores[r].score)
            edge = bic_orient_edge(0, 1, s, fam).direction
            agree += (root == 0) == (edge is Direction.U_TO_V)
        assert agree >= 27

    def test_fork_root(self):
        a, b, c = 0, 1, 2
        fam = InterventionFamily([[], [b]])
        hits = 0
        for seed in range(50):
            _, par = _sem([(b, a), (b, c)], 3, fam, seed)
            s = suff_stats(synth.sample(par, [2500, 2500], seed + 50))
            scores = all_root_scores([(0, 1), (1, 2)], [0, 1, 2], s, fam)
            hits += min(scores, key=lambda r: scores[r].score) == b
        assert hits >= 45


class TestColliders:
    def test_population_independence(self):
        fam = InterventionFamily([[]])
        _, par = _sem([(0, 1), (2, 1)], 3, fam, 0)
        assert collider_test_simple(0, 1, 2, population_stats(par), fam)

    def test_chain_not_collider(self):
        fam = InterventionFamily([[]])
        hits = 0
        for seed in range(100):
            _, par = _sem([(0, 1), (1, 2)], 3, fam, seed)
            s = suff_stats(synth.sample(par, [2000], seed))
            hits += not collider_test_simple(0, 1, 2, s, fam)
        assert hits >= 95

    def test_example_chain_triple(self, example_b1):
        g, fam = example_b1
        s = population_stats(synth.draw_params(g, fam, seed=0))
        assert not collider_test_simple(0, 1, 2, s, fam)
        assert collider_test_simple(2, 3, 4, s, fam)

    def test_refined_decisions(self):
        fam = InterventionFamily([[]])
        coll = chain = agree = 0
        for seed in range(40):
            _, par = _sem([(0, 1), (2, 1)], 3, fam, seed)
            s = suff_stats(synth.sample(par, [2000], seed))
            coll += collider_test_refined(0, 1, 2, s, fam)
            agree += collider_test_refined(0, 1, 2, s, fam) == collider_test_simple(0, 1, 2, s, fam)
            _, par = _sem([(0, 1), (1, 2)], 3, fam, seed)
            s = suff_stats(synth.sample(par, [2000], seed))
            chain += not collider_test_refined(0, 1, 2, s, fam)
            agree += collider_test_refined(0, 1, 2, s, fam) == collider_test_simple(0, 1, 2, s, fam)
        assert coll >= 38 and chain >= 38 and agree >= 72

    def test_refined_dimensions(self, rng):
        fam = InterventionFamily([[], [1], [2], [1, 2]])
        s = suff_stats([rng.normal(size=(40, 3)) for _ in range(4)])
        chain, collider = refined_scores(0, 1, 2, s, fam)
        k, n_v, n_w = 4, 2, 2
        assert chain.dim == 3 * k + n_v + n_w + 2
        assert collider.dim == 2 * (2 * k + n_v + 1)

    def test_refined_singular_falls_back(self, rng, caplog):
        x = rng.normal(size=(50, 1))
        data = np.column_stack([x, rng.normal(size=(50, 1)), x])
        s = suff_stats([data])
        fam = InterventionFamily([[]])
        with caplog.at_level("INFO"):
            out = collider_test_refined(0, 1, 2, s, fam)
        assert out == collider_test_simple(0, 1, 2, s, fam)
        assert "singular" in caplog.text

    def test_degenerate_environment_dropped(self, rng):
        good = rng.normal(size=(100, 2))
        bad = np.column_stack([np.zeros(100), rng.normal(size=100)])
        s = suff_stats([good, good, bad])
        fam = InterventionFamily([[], [0], [1]])
        assert bic_edge_score(0, 1, s, fam).n == 200


def test_population_stats_helper(example_b1):
    g, fam = example_b1
    s = population_stats(synth.draw_params(g, fam, seed=2))
    assert isinstance(s, SuffStats) and s.k == 2 and s.p == 5
