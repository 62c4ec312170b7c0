"""Monte Carlo simulator for worm epidemics on wireless ad hoc networks."""

from .spatial_graph import (
    Graph,
    GraphKind,
    GraphMetrics,
    NetworkConfig,
    PathlossParams,
    build_er_matched,
    build_rgg,
    compute_metrics,
    export_graph,
    mean_degree_prediction,
    place_nodes,
    toroidal_distance,
    transmission_range,
)
from .epidemic import (
    OUTBREAK_CUTOFF,
    EnsembleStats,
    EpidemicParams,
    NodeState,
    RunRecord,
    ensemble,
    mac_select,
    run,
    step,
)
from .rng import derive_seed, generator_for

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "GraphKind",
    "GraphMetrics",
    "NetworkConfig",
    "PathlossParams",
    "build_er_matched",
    "build_rgg",
    "compute_metrics",
    "export_graph",
    "mean_degree_prediction",
    "place_nodes",
    "toroidal_distance",
    "transmission_range",
    "OUTBREAK_CUTOFF",
    "EnsembleStats",
    "EpidemicParams",
    "NodeState",
    "RunRecord",
    "ensemble",
    "mac_select",
    "run",
    "step",
    "derive_seed",
    "generator_for",
    "__version__",
]
