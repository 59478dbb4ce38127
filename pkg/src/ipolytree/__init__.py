"""Learning interventional CPDAGs of linear Gaussian polytrees from multi-environment data."""

__version__ = "0.1.0"

from .graphs import (
    Dag,
    GraphError,
    InterventionFamily,
    PartiallyDirectedGraph,
    Polytree,
    ShdResult,
    i_cpdag,
    i_dag,
    i_mec_equal,
    shd_cpdag,
    skeleton,
    skeleton_shd,
)
from .orientation import OrientationConfig, learn, orient, procedure_1, procedure_2
from .skeleton import AggregationMethod, aggregate_weights, learn_skeleton
from .stats import SuffStats, suff_stats
from .synth import draw_params, random_polytree, sample, trek_rule_covariance

__all__ = [
    "AggregationMethod", "Dag", "GraphError", "InterventionFamily", "OrientationConfig",
    "PartiallyDirectedGraph", "Polytree", "ShdResult", "SuffStats", "aggregate_weights",
    "draw_params", "i_cpdag", "i_dag", "i_mec_equal", "learn", "learn_skeleton", "orient",
    "procedure_1", "procedure_2", "random_polytree", "sample", "shd_cpdag", "skeleton",
    "skeleton_shd", "suff_stats", "trek_rule_covariance",
]
