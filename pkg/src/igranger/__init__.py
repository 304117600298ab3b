"""Granger causal structure learning from heterogeneous interventional
time series, with edge-level recovery of unknown intervention targets."""

__version__ = "0.1.0"

from .datatypes import (
    ConfigError,
    DataError,
    FitConfig,
    GrangerGraph,
    InterventionalFamily,
    MultiEnvDataset,
    load_dataset,
    save_dataset,
    standardize,
)
from .linear import LinearParams, extract_linear_graph, fit_linear
from .metrics import EvalReport, TargetReport, score_graph, score_targets
from .neural import (
    NeuralGrangerModel,
    backward,
    extract_graph,
    fit_igc,
    forward,
    recover_targets,
)
from .prox import (
    GroupFamily,
    OptimizationError,
    hierarchical_prox,
    prox_gradient_loop,
    soft_threshold_group,
)
from .synth import (
    LinearGenConfig,
    LorenzConfig,
    NonlinearGenConfig,
    gen_linear,
    gen_lorenz,
    gen_nonlinear,
    lorenz_derivative,
)

__all__ = [
    "ConfigError",
    "DataError",
    "EvalReport",
    "FitConfig",
    "GrangerGraph",
    "GroupFamily",
    "InterventionalFamily",
    "LinearGenConfig",
    "LinearParams",
    "LorenzConfig",
    "MultiEnvDataset",
    "NeuralGrangerModel",
    "NonlinearGenConfig",
    "OptimizationError",
    "TargetReport",
    "backward",
    "extract_graph",
    "extract_linear_graph",
    "fit_igc",
    "fit_linear",
    "forward",
    "gen_linear",
    "gen_lorenz",
    "gen_nonlinear",
    "hierarchical_prox",
    "load_dataset",
    "lorenz_derivative",
    "prox_gradient_loop",
    "recover_targets",
    "save_dataset",
    "score_graph",
    "score_targets",
    "soft_threshold_group",
    "standardize",
]
