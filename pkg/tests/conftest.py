import numpy as np
import pytest

from ipolytree import synth
from ipolytree.graphs import InterventionFamily, Polytree
from ipolytree.stats import SuffStats

POPULATION_N = 1e6


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def population_stats(params, n=POPULATION_N):
    """Exact per-environment covariances wrapped as sufficient statistics."""
    k = len(params.environments)
    covs = [synth.trek_rule_covariance(params, i) for i in range(k)]
    means = [e.mean for e in params.environments]
    return SuffStats.from_covariances(covs, [n] * k, means)


@pytest.fixture
def example_b1():
    """b -> a, b -> c, c -> d, e -> d with one intervention on b."""
    a, b, c, d, e = range(5)
    g = Polytree(5, frozenset({(b, a), (b, c), (c, d), (e, d)}))
    fam = InterventionFamily([[], [b]])
    return g, fam
