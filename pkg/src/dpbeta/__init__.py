"""Private release of networks by edge jittering and moment-based inference for the beta-model."""

from .betamodel import mle_fit, mle_private_fit, population_oracle, sample_graph
from .bootstrap import select_delta
from .graph import Graph, load_edge_list, save_edge_list
from .inference import simultaneous_region
from .moments import estimate_theta, plugin_variances
from .privacy import NoiseSchedule, jitter, privacy_level, regime_diagnostic

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "NoiseSchedule",
    "estimate_theta",
    "jitter",
    "load_edge_list",
    "mle_fit",
    "mle_private_fit",
    "plugin_variances",
    "population_oracle",
    "privacy_level",
    "regime_diagnostic",
    "sample_graph",
    "save_edge_list",
    "select_delta",
    "simultaneous_region",
]
