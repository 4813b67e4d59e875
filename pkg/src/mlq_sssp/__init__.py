"""Concurrent SSSP engine on a multi-level multi-queue hierarchy."""

from .adaptive import (
    BenchmarkRecord,
    ConfigCandidate,
    SelectorModel,
    benchmark_graphs,
    enumerate_candidates,
    read_records_csv,
    select_config,
    select_rule_based,
    train_selector,
    write_records_csv,
)
from .core import (
    INF,
    DistanceTable,
    Element,
    EngineError,
    GraphFormatError,
    InsufficientDataError,
    L1Params,
    L2Params,
    MlmqConfig,
    NegativeWeightError,
    QueueOverflowError,
    ReadStatus,
    RunMetrics,
    WriteStatus,
)
from .engine import (
    EngineConfig,
    SsspResult,
    bellman_ford_oracle,
    bfs_solve,
    compare_distances,
    dijkstra_oracle,
    distances_blob,
    resolve_config,
    sssp_solve,
    unit_weight_view,
)
from .graph import (
    CsrGraph,
    GraphFeatures,
    build_csr,
    extract_features,
    generate_graph,
    load_graph,
    save_graph,
)

__version__ = "0.1.0"

__all__ = [
    "INF",
    "BenchmarkRecord",
    "ConfigCandidate",
    "CsrGraph",
    "DistanceTable",
    "Element",
    "EngineConfig",
    "EngineError",
    "GraphFeatures",
    "GraphFormatError",
    "InsufficientDataError",
    "L1Params",
    "L2Params",
    "MlmqConfig",
    "NegativeWeightError",
    "QueueOverflowError",
    "ReadStatus",
    "RunMetrics",
    "SelectorModel",
    "SsspResult",
    "WriteStatus",
    "bellman_ford_oracle",
    "benchmark_graphs",
    "bfs_solve",
    "build_csr",
    "compare_distances",
    "dijkstra_oracle",
    "distances_blob",
    "enumerate_candidates",
    "extract_features",
    "generate_graph",
    "load_graph",
    "read_records_csv",
    "resolve_config",
    "save_graph",
    "select_config",
    "select_rule_based",
    "sssp_solve",
    "train_selector",
    "unit_weight_view",
    "write_records_csv",
]
