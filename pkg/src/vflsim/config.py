"""Configuration schema for the simulator.

Every field has a default so an empty config file (or none at all) yields a
runnable experiment. A TOML file supplies section tables (scenario, latency,
training, partition, experiment) and CLI flags override file values.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MOBILITY_KINDS = ("ring_road", "grid_random_waypoint", "stationary")
STRATEGIES = ("greedy", "gossip", "data", "network", "contextual")
DATA_KINDS = ("surrogate", "synthetic", "idx")
PREDICTOR_KINDS = ("constant_velocity", "constant_acceleration")


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass
class ScenarioConfig:
    vehicle_count: int = 100
    mobility_kind: str = "ring_road"
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1000.0, 1000.0)
    ring_radius: float = 300.0
    rsu_count: int = 4
    rsu_positions: list[tuple[float, float]] | None = None
    positions: list[tuple[float, float]] | None = None
    speed_min: float = 12.0
    speed_max: float = 22.0
    v_max: float = 40.0
    a_max: float = 5.0
    dt: float = 0.1
    cam_period: float = 0.1
    cpm_period: float = 0.2
    sensor_range: float = 80.0
    radio_range: float = 150.0
    ttl: float = 1.0
    msg_loss: float = 0.0

    def validate(self) -> None:
        if self.vehicle_count < 1:
            raise ConfigError("vehicle_count must be >= 1")
        x0, y0, x1, y1 = self.bounds
        if (x1 - x0) * (y1 - y0) <= 0:
            raise ConfigError("bounds must have positive area")
        if self.mobility_kind not in MOBILITY_KINDS:
            raise ConfigError(f"unknown mobility_kind {self.mobility_kind!r}")
        if self.dt <= 0 or self.cam_period <= 0 or self.cpm_period <= 0:
            raise ConfigError("dt and message periods must be positive")
        if not 0.0 <= self.msg_loss < 1.0:
            raise ConfigError("msg_loss must lie in [0, 1)")
        if not 0.0 < self.speed_min <= self.speed_max <= self.v_max:
            raise ConfigError("need 0 < speed_min <= speed_max <= v_max")


@dataclass
class LatencyConfig:
    base_latency: float = 0.05
    bandwidth_near: float = 50e6
    range_rsu: float = 300.0
    distance_exponent: float = 2.0
    jitter_std: float = 0.005
    payload_bits: int = 50890 * 32

    def validate(self) -> None:
        if min(self.base_latency, self.bandwidth_near, self.range_rsu) <= 0:
            raise ConfigError("latency model constants must be positive")
        if self.distance_exponent < 1.0:
            raise ConfigError("distance_exponent must be >= 1")
        if self.jitter_std < 0:
            raise ConfigError("jitter_std must be >= 0")
        if self.payload_bits <= 0:
            raise ConfigError("payload_bits must be positive")


@dataclass
class TrainingConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    local_epochs: int = 3
    c_batch: float = 0.002

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise ConfigError("batch_size and local_epochs must be >= 1")
        if self.c_batch < 0:
            raise ConfigError("c_batch must be >= 0")


@dataclass
class PartitionConfig:
    client_count: int = 100
    classes_per_client: int = 2
    data_kind: str = "surrogate"
    train_samples: int = 20000
    test_samples: int = 4000
    images_path: str = ""
    labels_path: str = ""
    test_images_path: str = ""
    test_labels_path: str = ""
    cache_dir: str = ""

    def validate(self, num_classes: int = 10) -> None:
        if self.client_count < 1:
            raise ConfigError("client_count must be >= 1")
        if not 1 <= self.classes_per_client <= num_classes:
            raise ConfigError("classes_per_client must lie in [1, num_classes]")
        if self.data_kind not in DATA_KINDS:
            raise ConfigError(f"unknown data_kind {self.data_kind!r}")
        if self.data_kind == "idx" and not (self.images_path and self.labels_path):
            raise ConfigError("data_kind 'idx' requires images_path and labels_path")


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    strategy: str = "contextual"
    connection_rate: float = 1.0
    time_budget: float = 600.0
    eval_period: int = 1
    selection_rate: float = 0.10
    gamma: float = 0.10
    cluster_count: int = 10
    fingerprint_refresh: int = 10
    profiling_deadline: float = 5.0
    predictor_kind: str = "constant_velocity"
    bootstrap_horizon: float = 1.0
    aggregation_overhead: float = 0.01
    no_show_timeout: float = 10.0
    stop_when_half: bool = False
    seed: int = 42
    run_id: str = ""
    output_path: str = "results.csv"

    def validate(self) -> None:
        self.scenario.validate()
        self.latency.validate()
        self.training.validate()
        self.partition.validate()
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.connection_rate <= 1.0:
            raise ConfigError("connection_rate must lie in (0, 1]")
        if self.time_budget < 0:
            raise ConfigError("time_budget must be >= 0")
        if not 0.0 < self.selection_rate <= 1.0:
            raise ConfigError("selection_rate must lie in (0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.cluster_count < 1 or self.fingerprint_refresh < 1:
            raise ConfigError("cluster_count and fingerprint_refresh must be >= 1")
        if self.profiling_deadline <= 0 or self.no_show_timeout <= 0:
            raise ConfigError("deadlines and timeouts must be positive")
        if self.predictor_kind not in PREDICTOR_KINDS:
            raise ConfigError(f"unknown predictor_kind {self.predictor_kind!r}")
        if self.eval_period < 1:
            raise ConfigError("eval_period must be >= 1")

    @property
    def seeds(self) -> tuple[int, int, int, int]:
        """Per-domain sub-seeds (mobility, data, network, selection)."""
        base = int(self.seed)
        return (base * 4 + 0, base * 4 + 1, base * 4 + 2, base * 4 + 3)

    @property
    def mobility_seed(self) -> int:
        return self.seeds[0]

    @property
    def data_seed(self) -> int:
        return self.seeds[1]

    @property
    def network_seed(self) -> int:
        return self.seeds[2]

    @property
    def selection_seed(self) -> int:
        return self.seeds[3]

    def resolved_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        return (
            f"{self.strategy}-cr{self.connection_rate:g}"
            f"-cpc{self.partition.classes_per_client}-s{self.seed}"
        )


@dataclass
class GridConfig:
    strategies: list[str] = field(default_factory=lambda: ["gossip", "data", "network", "contextual"])
    connection_rates: list[float] = field(default_factory=lambda: [1.0, 0.5, 0.2])
    classes_per_client: list[int] = field(default_factory=lambda: [2])
    seeds: list[int] = field(default_factory=lambda: [42])
    gossip_once: bool = True


def _apply_section(obj: Any, section: dict[str, Any], name: str) -> None:
    valid = {f.name for f in dataclasses.fields(obj)}
    for key, value in section.items():
        if key not in valid:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        current = getattr(obj, key)
        if isinstance(current, tuple):
            value = tuple(value)
        setattr(obj, key, value)


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional TOML file plus overrides.

    Overrides use top-level ExperimentConfig field names and win over file
    values. Unknown keys raise ConfigError rather than being ignored.
    """
    cfg = ExperimentConfig()
    if path is not None:
        raw = tomllib.loads(Path(path).read_text())
        sections = {
            "scenario": cfg.scenario,
            "latency": cfg.latency,
            "training": cfg.training,
            "partition": cfg.partition,
        }
        for name, target in sections.items():
            if name in raw:
                _apply_section(target, raw.pop(name), name)
        if "experiment" in raw:
            section = raw.pop("experiment")
            valid = {
                f.name
                for f in dataclasses.fields(cfg)
                if f.name not in ("scenario", "latency", "training", "partition")
            }
            for key, value in section.items():
                if key not in valid:
                    raise ConfigError(f"unknown key {key!r} in section [experiment]")
                setattr(cfg, key, value)
        raw.pop("grid", None)
        if raw:
            raise ConfigError(f"unknown top-level sections: {sorted(raw)}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "classes_per_client":
            cfg.partition.classes_per_client = value
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown override {key!r}")
    cfg.validate()
    return cfg


def load_grid_config(path: str | Path | None = None) -> GridConfig:
    """Read the [grid] section of a config file, defaulting to the CR sweep."""
    grid = GridConfig()
    if path is not None:
        raw = tomllib.loads(Path(path).read_text())
        if "grid" in raw:
            _apply_section(grid, raw["grid"], "grid")
    for strategy in grid.strategies:
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r} in grid")
    return grid
