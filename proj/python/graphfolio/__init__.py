"""Portfolio construction on distance-correlation dependency graphs.

Thin numpy-first bindings over the C++ core: dependency estimation,
planar graph filtering, centralities, the allocation network's loss and
weight layers, the benchmark optimizers, the synthetic market generator,
and the full rolling backtest (returned as a JSON report string).
"""

from graphfolio._core import (
    ConfigError,
    DataError,
    PipelineError,
    __version__,
    allocate,
    distance_correlation,
    distance_covariance,
    generate_market_csv,
    graph_centralities,
    mean_variance,
    network_index,
    pairwise_dcor,
    project_to_simplex,
    run_backtest_json,
    sharpe_loss,
    tmfg,
)

__all__ = [
    "ConfigError",
    "DataError",
    "PipelineError",
    "__version__",
    "allocate",
    "distance_correlation",
    "distance_covariance",
    "generate_market_csv",
    "graph_centralities",
    "mean_variance",
    "network_index",
    "pairwise_dcor",
    "project_to_simplex",
    "run_backtest_json",
    "sharpe_loss",
    "tmfg",
]
