import itertools

import numpy as np
import pytest

from ipolytree import synth
from ipolytree.graphs import InterventionFamily, Polytree, skeleton, skeleton_shd
from ipolytree.skeleton import (
    AggregationMethod,
    aggregate_weights,
    as_method,
    learn_skeleton,
    max_weight_spanning_tree,
)
from ipolytree.stats import SuffStats, suff_stats

from conftest import population_stats

CHOW_LIU_METHODS = ["fisher", "mean", "median"]


def _two_var_stats(rhos, ns):
    covs = [np.array([[1.0, r], [r, 1.0]]) for r in rhos]
    return SuffStats.from_covariances(covs, ns)


class TestAggregate:
    @pytest.mark.parametrize("method", ["mean", "median"])
    def test_single_environment_is_abs_corr(self, method, rng):
        s = suff_stats([rng.normal(size=(30, 4))])
        w = aggregate_weights(s, method)
        r = np.abs(s.correlation(0))
        np.fill_diagonal(r, 0)
        np.testing.assert_allclose(w, r)

    @pytest.mark.parametrize("method", list(AggregationMethod))
    def test_zero_correlations(self, method):
        s = SuffStats.from_covariances([np.eye(3), np.eye(3)], [10, 20])
        assert np.all(aggregate_weights(s, method, InterventionFamily([[], [0]])) == 0)

    def test_weighted_mean_example(self):
        w = aggregate_weights(_two_var_stats([0.2, 0.6], [10, 30]), "mean")
        assert w[0, 1] == pytest.approx(0.5)

    def test_weighted_median_lower(self):
        w = aggregate_weights(_two_var_stats([0.2, 0.6], [20, 20]), "median")
        assert w[0, 1] == pytest.approx(0.2)
        w = aggregate_weights(_two_var_stats([0.2, 0.6, 0.4], [10, 30, 10]), "median")
        assert w[0, 1] == pytest.approx(0.6)

    def test_fisher_example(self):
        w = aggregate_weights(_two_var_stats([0.3, -0.5], [10, 20]), "fisher")
        assert w[0, 1] == pytest.approx(-5 * np.log(1 - 0.09) - 10 * np.log(1 - 0.25))

    def test_pooled_uses_concatenated_data(self, rng):
        a = rng.normal(size=(40, 3))
        b = rng.normal(size=(60, 3)) + 2
        w = aggregate_weights(suff_stats([a, b]), "pooled")
        r = np.abs(np.corrcoef(np.vstack([a, b]).T))
        np.fill_diagonal(r, 0)
        np.testing.assert_allclose(w, r, atol=1e-12)

    def test_observational_uses_empty_target(self, rng):
        a, b = rng.normal(size=(40, 3)), rng.normal(size=(60, 3))
        s = suff_stats([a, b])
        w = aggregate_weights(s, "obs", InterventionFamily([[1], []]))
        r = np.abs(s.correlation(1))
        np.fill_diagonal(r, 0)
        np.testing.assert_allclose(w, r)

    def test_aliases(self):
        assert as_method("itest") is AggregationMethod.FISHER
        assert as_method("observational_baseline") is AggregationMethod.OBSERVATIONAL

    @pytest.mark.parametrize("method", ["fisher", "mean", "median"])
    def test_order_preserving(self, method, rng):
        rhos = rng.uniform(0, 0.9, 5)
        ns = rng.integers(5, 50, 5)
        base = aggregate_weights(_two_var_stats(rhos, ns), method)[0, 1]
        for i in range(5):
            bumped = rhos.copy()
            bumped[i] += 0.05
            assert aggregate_weights(_two_var_stats(bumped, ns), method)[0, 1] >= base

    @pytest.mark.parametrize("method", ["fisher", "mean"])
    def test_g_valid_on_population_triples(self, method, rng):
        for _ in range(10):
            g = synth.random_polytree(10, rng)
            fam = synth.random_family(10, 3, 2, rng)
            s = population_stats(synth.draw_params(g, fam, seed=rng), n=100.0)
            w = aggregate_weights(s, method)
            adj = {v: set(g.parents[v]) | set(g.children[v]) for v in range(10)}
            for v in range(10):
                for u, x in itertools.combinations(sorted(adj[v]), 2):
                    assert min(w[u, v], w[v, x]) >= w[u, x] - 1e-12


class TestSpanningTree:
    def test_two_vertices(self):
        assert max_weight_spanning_tree(np.array([[0, 0.1], [0.1, 0]])) == {(0, 1)}

    def test_forced_triple(self):
        w = np.array([[0, 0.5, 0.25], [0.5, 0, 0.5], [0.25, 0.5, 0]])
        assert max_weight_spanning_tree(w) == {(0, 1), (1, 2)}

    def test_ties_lexicographic(self):
        assert max_weight_spanning_tree(np.zeros((4, 4))) == {(0, 1), (0, 2), (0, 3)}

    def test_brute_force_eight(self, rng):
        p = 8
        a = rng.random((p, p))
        w = np.triu(a, 1) + np.triu(a, 1).T
        best = max(
            sum(w[u, v] for u, v in synth.prufer_decode(list(seq), p))
            for seq in itertools.product(range(p), repeat=p - 2)
        )
        tree = max_weight_spanning_tree(w)
        assert len(tree) == p - 1
        assert sum(w[u, v] for u, v in tree) == pytest.approx(best, abs=1e-12)

    def test_monotone_transform_invariance(self, rng):
        a = rng.random((12, 12))
        w = np.triu(a, 1) + np.triu(a, 1).T
        t = max_weight_spanning_tree(w)
        assert max_weight_spanning_tree(np.exp(3 * w) - 1) == t
        assert max_weight_spanning_tree(np.sqrt(w)) == t

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            max_weight_spanning_tree(np.array([[0, np.nan], [np.nan, 0]]))


class TestLearnSkeleton:
    def test_p2(self, rng):
        assert learn_skeleton([rng.normal(size=(5, 2))]) == {(0, 1)}

    @pytest.mark.parametrize("method", ["fisher", "mean"])
    def test_population_recovery(self, method, rng):
        for _ in range(15):
            p = int(rng.integers(3, 31))
            g = synth.random_polytree(p, rng)
            fam = synth.random_family(p, int(rng.integers(0, 5)), int(rng.integers(1, 4)), rng)
            s = population_stats(synth.draw_params(g, fam, seed=rng))
            assert learn_skeleton(s, fam, method) == skeleton(g)

    def test_population_recovery_median_minority_targets(self, rng):
        done = 0
        while done < 15:
            p = int(rng.integers(3, 31))
            g = synth.random_polytree(p, rng)
            fam = synth.random_family(p, int(rng.integers(0, 5)), int(rng.integers(1, 4)), rng)
            if any(2 * len(fam.intervened(v)) >= len(fam) for v in range(p)):
                continue
            s = population_stats(synth.draw_params(g, fam, seed=rng))
            assert learn_skeleton(s, fam, "median") == skeleton(g)
            done += 1

    def test_population_median_majority_target_zeroes_parents(self):
        # vertex 1 is perfectly intervened in half of the (equal-size) environments
        g = Polytree(3, frozenset({(0, 1), (1, 2)}))
        fam = InterventionFamily([[], [1]])
        s = population_stats(synth.draw_params(g, fam, seed=0))
        w = aggregate_weights(s, "median", fam)
        assert w[0, 1] == 0 and w[0, 2] == 0 and w[1, 2] > 0
        assert aggregate_weights(s, "mean", fam)[0, 1] > aggregate_weights(s, "mean", fam)[0, 2]

    def test_flipped_pooling_worse(self):
        worse = 0
        for seed in range(6):
            rng = np.random.default_rng(seed)
            g = synth.random_polytree(60, rng)
            fam = synth.random_family(60, 20, 1, rng)
            par = synth.draw_params(g, fam, "flipped", rng)
            s = suff_stats(synth.sample(par, synth.even_sizes(5000, 21), rng))
            pooled = skeleton_shd(learn_skeleton(s, fam, "pooled"), skeleton(g))
            mean = skeleton_shd(learn_skeleton(s, fam, "mean"), skeleton(g))
            worse += pooled > mean
        assert worse >= 4
