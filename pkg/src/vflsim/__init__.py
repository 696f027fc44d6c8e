"""Deterministic simulator of federated learning over a vehicular network.

Modules: mobility (vehicle trajectories), v2x_fusion (CAM/CPM messages and
topology-graph fusion), forecast (trajectory prediction and the latency
model), fl_core (datasets, partition, MLP, FedAvg), selection (the five
client-selection strategies), sim_harness (the round loop and experiment
grid), cli (command-line entry points).
"""

__version__ = "0.1.0"

from .config import (
    ExperimentConfig,
    GridConfig,
    LatencyConfig,
    PartitionConfig,
    ScenarioConfig,
    TrainingConfig,
    load_config,
)
from .sim_harness import Simulation, run_experiment, run_grid, summarize_reductions

__all__ = [
    "ExperimentConfig",
    "GridConfig",
    "LatencyConfig",
    "PartitionConfig",
    "ScenarioConfig",
    "TrainingConfig",
    "load_config",
    "Simulation",
    "run_experiment",
    "run_grid",
    "summarize_reductions",
    "__version__",
]
