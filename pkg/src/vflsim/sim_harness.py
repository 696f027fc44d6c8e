"""Discrete-event orchestration of federated rounds over the vehicular net.

Each round advances mobility, fuses V2X messages into the topology graph,
samples the connected set, refreshes gradient fingerprints when due, asks the
strategy for a client set, trains the delivered clients and aggregates. The
simulated round duration is the slowest selected participant's
downlink + compute + uplink, capped by a no-show timeout when a selected
client is unreachable or disconnected, plus fixed aggregation overhead and
any fingerprint-profiling wait.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from . import fl_core, selection as sel
from .config import ConfigError, ExperimentConfig, GridConfig
from .forecast import LatencyModel, TrajectoryPredictor, estimate_latency, predicted_round_latency
from .mobility import MobilityEngine, build_scenario
from .v2x_fusion import (
    MessageRates,
    drop_messages,
    emit_messages,
    empty_graph,
    fuse,
    message_phases,
    write_trace,
)

CONN_TAG = 10
TRAIN_TAG = 11
LOSS_TAG = 12
PROFILE_TAG = 13

CSV_COLUMNS = [
    "run_id",
    "strategy",
    "connection_rate",
    "classes_per_client",
    "round",
    "sim_time_s",
    "round_latency_s",
    "num_selected",
    "test_accuracy",
    "time_to_half_acc_s",
]

NOT_REACHED = "not reached"

FINGERPRINT_STRATEGIES = ("data", "contextual")


@dataclass
class RoundRecord:
    round_index: int
    sim_time_start: float
    sim_time_end: float
    strategy: str
    selected: list[int]
    round_latency: float
    straggler_latency: float
    participating_count: int
    test_accuracy: float | None


class CsvSink:
    """Incremental writer for the results CSV.

    Rows stream out as rounds complete; the final row of each run carries the
    run's time_to_half_acc_s value, so one row is always held back until the
    run finishes.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh: IO[str] = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_COLUMNS)
        self._pending: list | None = None

    def add(self, row: list) -> None:
        if self._pending is not None:
            self._writer.writerow(self._pending + [""])
        self._pending = row

    def finish_run(self, time_to_half: float | None) -> None:
        if self._pending is not None:
            cell = f"{time_to_half:.6f}" if time_to_half is not None else NOT_REACHED
            self._writer.writerow(self._pending + [cell])
            self._pending = None
        self._fh.flush()

    def close(self) -> None:
        if self._pending is not None:
            self.finish_run(None)
        self._fh.close()


def load_datasets(config: ExperimentConfig) -> tuple[fl_core.Dataset, fl_core.Dataset]:
    """Materialize the (train, test) pair named by the partition config."""
    part = config.partition
    if part.data_kind == "idx":
        train = fl_core.load_idx_dataset(part.images_path, part.labels_path)
        test = fl_core.load_idx_dataset(part.test_images_path, part.test_labels_path)
        if 0 < part.train_samples < len(train):
            train = fl_core.Dataset(
                train.images[: part.train_samples],
                train.labels[: part.train_samples],
                train.num_classes,
            )
        if 0 < part.test_samples < len(test):
            test = fl_core.Dataset(
                test.images[: part.test_samples],
                test.labels[: part.test_samples],
                test.num_classes,
            )
        return train, test
    if part.data_kind == "synthetic":
        # one pool split in two: train and test must share the class axes
        total = part.train_samples + part.test_samples
        pool = fl_core.generate_synthetic_dataset(
            fl_core.SyntheticConfig(
                samples_per_class=max(1, math.ceil(total / 10)),
                separation=8.0,
                seed=config.data_seed,
            )
        )
        train = fl_core.Dataset(
            pool.images[: part.train_samples],
            pool.labels[: part.train_samples],
            pool.num_classes,
        )
        test = fl_core.Dataset(
            pool.images[part.train_samples : total],
            pool.labels[part.train_samples : total],
            pool.num_classes,
        )
        return train, test
    surrogate = fl_core.SurrogateConfig(
        train_samples=part.train_samples,
        test_samples=part.test_samples,
        seed=config.data_seed,
    )
    cache_dir = part.cache_dir or str(Path.home() / ".cache" / "vflsim")
    paths = fl_core.write_surrogate_idx(cache_dir, surrogate)
    train = fl_core.load_idx_dataset(paths["train_images"], paths["train_labels"])
    test = fl_core.load_idx_dataset(paths["test_images"], paths["test_labels"])
    return train, test


class Simulation:
    """One experiment: a strategy run against a seeded scenario and dataset."""

    def __init__(self, config: ExperimentConfig, trace_dir: str | Path | None = None):
        config.validate()
        if config.scenario.vehicle_count != config.partition.client_count:
            raise ConfigError("vehicle_count must equal client_count (vehicles are the clients)")
        self.config = config
        self.universe = list(range(config.partition.client_count))

        train, test = load_datasets(config)
        parts = fl_core.partition_non_iid(
            train,
            config.partition.client_count,
            config.partition.classes_per_client,
            config.data_seed,
        )
        self.client_data = {
            cid: (train.images[idx], train.labels[idx]) for cid, idx in enumerate(parts)
        }
        self.client_sizes = {cid: len(idx) for cid, idx in enumerate(parts)}
        self.test_set = test

        self.scenario = build_scenario(config.scenario, config.mobility_seed)
        self.engine = MobilityEngine(self.scenario)
        self.rates = MessageRates(
            cam_period=config.scenario.cam_period,
            cpm_period=config.scenario.cpm_period,
            sensor_range=config.scenario.sensor_range,
            dt=config.scenario.dt,
        )
        self.phases = message_phases(
            config.scenario.vehicle_count, self.rates, config.mobility_seed
        )
        self.latency_model = LatencyModel.from_config(config.latency, config.network_seed)
        self.rttg = empty_graph(
            self.scenario.rsu_positions, config.scenario.radio_range, config.scenario.ttl
        )

        self.params = fl_core.init_params(config.data_seed)
        self.sim_time = 0.0
        self.round_index = 0
        self.horizon = config.bootstrap_horizon
        self.time_to_half: float | None = None
        self.last_accuracy: float | None = None

        self._tick = 0
        self._message_buffer: list = []
        self._fingerprints: dict[int, fl_core.GradientFingerprint] = {}
        self._pending_late: dict[int, tuple[fl_core.GradientFingerprint, float]] = {}
        self._assignment: sel.ClusterAssignment | None = None
        self._centroids: dict[int, np.ndarray] = {}

        self._trace_dir = Path(trace_dir) if trace_dir else None
        if self._trace_dir:
            self._trace_dir.mkdir(parents=True, exist_ok=True)
            (self._trace_dir / "messages.jsonl").write_text("")
            (self._trace_dir / "selections.jsonl").write_text("")

        self._emit_tick()

    # -- message plumbing ---------------------------------------------------

    def _emit_tick(self) -> None:
        states = self.engine.states()
        now = self._tick * self.config.scenario.dt
        cams, cpms = emit_messages(states, now, self.rates, self.phases)
        if self.config.scenario.msg_loss > 0.0:
            rng = np.random.default_rng(
                np.random.SeedSequence([self.config.network_seed, LOSS_TAG, self._tick])
            )
            cams = drop_messages(cams, self.config.scenario.msg_loss, rng)
            cpms = drop_messages(cpms, self.config.scenario.msg_loss, rng)
        if self._trace_dir:
            write_trace(self._trace_dir / "messages.jsonl", cams + cpms)
        self._message_buffer.extend(cams)
        self._message_buffer.extend(cpms)

    def _advance_and_fuse(self) -> None:
        dt = self.config.scenario.dt
        target_tick = int(math.floor(self.sim_time / dt + 1e-9))
        window_start = target_tick - int(math.ceil(self.config.scenario.ttl / dt))
        while self._tick < target_tick:
            self.engine.advance(dt)
            self._tick += 1
            if self._tick >= window_start:
                self._emit_tick()
        self.rttg = fuse(self._message_buffer, self.sim_time, self.rttg)
        self._message_buffer = []

    # -- per-round state ----------------------------------------------------

    def _sample_connected(self) -> set[int]:
        rng = np.random.default_rng(
            np.random.SeedSequence([self.config.network_seed, CONN_TAG, self.round_index])
        )
        draws = rng.random(len(self.universe))
        return {cid for cid in self.universe if draws[cid] < self.config.connection_rate}

    def _latencies(self, predicted: bool) -> dict[int, object]:
        estimates = {}
        if predicted:
            present = [cid for cid in self.universe if cid in self.rttg.nodes]
            predictor = TrajectoryPredictor(self.config.predictor_kind, self.horizon)
            estimates = predicted_round_latency(
                self.rttg, predictor, self.latency_model, present, self.round_index
            )
        else:
            for cid in self.universe:
                if cid in self.rttg.nodes:
                    estimates[cid] = estimate_latency(
                        self.rttg, cid, self.latency_model, self.round_index
                    )
        return estimates

    def _train_rng(self, cid: int, tag: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.config.data_seed, tag, self.round_index, cid])
        )

    def _refresh_fingerprints(self, connected: set[int], actual: dict) -> float:
        report = sel.profile_fingerprints(
            self.params,
            self.client_data,
            sorted(connected),
            self.config.profiling_deadline,
            actual,
            self.config.training,
            lambda cid: self._train_rng(cid, PROFILE_TAG),
        )
        self._fingerprints.update(report.on_time)
        for cid, (fingerprint, report_time) in report.late.items():
            self._pending_late[cid] = (fingerprint, self.sim_time + report_time)
        if self._fingerprints:
            self._assignment = sel.cluster_by_gradient(
                self._fingerprints, self.config.cluster_count, self.config.selection_seed
            )
            self._centroids = sel.cluster_centroids(self._assignment, self._fingerprints)
        self._round_robin_missing()
        return report.wait_time

    def _round_robin_missing(self) -> None:
        """Clients with no usable fingerprint get dealt across clusters."""
        if self._assignment is None:
            count = min(self.config.cluster_count, len(self.universe))
            self._assignment = sel.ClusterAssignment({}, count)
        assignment = self._assignment
        missing = [cid for cid in self.universe if cid not in assignment.assignment]
        for i, cid in enumerate(sorted(missing)):
            assignment.assignment[cid] = i % assignment.cluster_count

    def _fold_late_arrivals(self) -> None:
        arrived = [cid for cid, (_, t) in self._pending_late.items() if t <= self.sim_time]
        for cid in sorted(arrived):
            fingerprint, _ = self._pending_late.pop(cid)
            self._fingerprints[cid] = fingerprint
            if self._assignment is not None and self._centroids:
                cluster = sel.assign_nearest_centroid(fingerprint, self._centroids)
                if cluster is not None:
                    self._assignment.assignment[cid] = cluster

    # -- the round ----------------------------------------------------------

    def run_round(self) -> RoundRecord:
        config = self.config
        start = self.sim_time
        self._advance_and_fuse()
        connected = self._sample_connected()
        actual = self._latencies(predicted=False)
        uses_fingerprints = config.strategy in FINGERPRINT_STRATEGIES

        profiling_wait = 0.0
        if uses_fingerprints:
            self._fold_late_arrivals()
            if self.round_index % config.fingerprint_refresh == 0 and connected:
                profiling_wait = self._refresh_fingerprints(connected, actual)
            elif self._assignment is None:
                self._round_robin_missing()

        predicted = self._latencies(predicted=True) if config.strategy == "contextual" else {}
        ctx = sel.RoundContext(
            round_index=self.round_index,
            connected=connected,
            universe_size=len(self.universe),
            fingerprints=self._fingerprints,
            cluster_assignment=self._assignment if uses_fingerprints else None,
            current_rttg=self.rttg,
            predicted_latency=predicted,
            actual_latency=actual,
            selection_rate=config.selection_rate,
            gamma=config.gamma,
            cluster_count=config.cluster_count,
            seed=config.selection_seed,
        )
        decision = sel.select(config.strategy, ctx)
        if self._trace_dir:
            with open(self._trace_dir / "selections.jsonl", "a") as fh:
                fh.write(
                    json.dumps(
                        {
                            "round": self.round_index,
                            "strategy": decision.strategy,
                            "selected": decision.selected,
                            "no_participants": decision.no_participants,
                        }
                    )
                    + "\n"
                )

        if decision.no_participants:
            backoff = 1.0
            self.sim_time = start + backoff
            record = RoundRecord(
                self.round_index, start, self.sim_time, config.strategy, [], backoff,
                math.inf, 0, None,
            )
            self.round_index += 1
            return record

        finishes: dict[int, float] = {}
        straggler = 0.0
        for cid in decision.selected:
            estimate = actual.get(cid)
            reachable = estimate is not None and estimate.connected
            if cid not in connected or not reachable:
                finishes[cid] = math.inf
                straggler = math.inf
                continue
            comm = estimate.round_trip
            straggler = max(straggler, comm)
            finishes[cid] = comm + fl_core.compute_time(self.client_sizes[cid], config.training)

        raw_max = max(finishes.values())
        core = min(raw_max, config.no_show_timeout)
        delivered = sorted(cid for cid, t in finishes.items() if t <= core)

        updates = []
        for cid in delivered:
            images, labels = self.client_data[cid]
            local, n = fl_core.local_train(
                self.params, images, labels, config.training, self._train_rng(cid, TRAIN_TAG)
            )
            updates.append((local, n))
        if updates:
            self.params = fl_core.fedavg(updates)

        duration = core + config.aggregation_overhead + profiling_wait
        self.sim_time = start + duration

        accuracy = None
        if self.round_index % config.eval_period == 0:
            accuracy = fl_core.evaluate(self.params, self.test_set)
            self.last_accuracy = accuracy
            if accuracy >= 0.5 and self.time_to_half is None:
                self.time_to_half = self.sim_time

        record = RoundRecord(
            self.round_index, start, self.sim_time, config.strategy,
            decision.selected, duration, straggler, len(delivered), accuracy,
        )
        self.round_index += 1
        return record

    def run(self, sink: CsvSink | None = None) -> list[RoundRecord]:
        records = []
        run_id = self.config.resolved_run_id()
        while self.sim_time < self.config.time_budget:
            record = self.run_round()
            records.append(record)
            if sink is not None:
                sink.add(
                    [
                        run_id,
                        record.strategy,
                        f"{self.config.connection_rate:g}",
                        str(self.config.partition.classes_per_client),
                        str(record.round_index),
                        f"{record.sim_time_end:.6f}",
                        f"{record.round_latency:.6f}",
                        str(len(record.selected)),
                        "" if record.test_accuracy is None else f"{record.test_accuracy:.6f}",
                    ]
                )
            if self.config.stop_when_half and self.time_to_half is not None:
                break
        if sink is not None:
            sink.finish_run(self.time_to_half)
        return records

    def bootstrap_assignment(self) -> sel.ClusterAssignment:
        """Run the profiling/clustering stage of round 0 and return clusters."""
        self._advance_and_fuse()
        connected = self._sample_connected()
        actual = self._latencies(predicted=False)
        if connected:
            self._refresh_fingerprints(connected, actual)
        else:
            self._round_robin_missing()
        return self._assignment


def run_experiment(config: ExperimentConfig, sink: CsvSink | None = None) -> list[RoundRecord]:
    """Run one experiment to its time budget, streaming rows to the sink.

    When no sink is given, one is created at config.output_path.
    """
    own_sink = sink is None
    if own_sink:
        sink = CsvSink(config.output_path)
    sim = Simulation(config)
    try:
        records = sim.run(sink)
    finally:
        if own_sink:
            sink.close()
    return records


# ---------------------------------------------------------------------------
# Experiment grid


def _cell_config(
    base: ExperimentConfig, strategy: str, cr: float, cpc: int, seed: int
) -> ExperimentConfig:
    config = copy.deepcopy(base)
    config.strategy = strategy
    config.connection_rate = cr
    config.partition.classes_per_client = cpc
    config.seed = seed
    config.run_id = f"{strategy}-cr{cr:g}-cpc{cpc}-s{seed}"
    return config


def run_grid(
    base: ExperimentConfig, grid: GridConfig, out_path: str | Path
) -> list[dict]:
    """Run every grid cell into one combined CSV; returns the summary rows.

    Failures in individual cells are recorded and do not stop the sweep.
    gossip_once runs the gossip baseline only at the first connection rate.
    """
    sink = CsvSink(out_path)
    results = []
    try:
        for cpc in grid.classes_per_client:
            for seed in grid.seeds:
                for cr in grid.connection_rates:
                    for strategy in grid.strategies:
                        if (
                            grid.gossip_once
                            and strategy == "gossip"
                            and cr != grid.connection_rates[0]
                        ):
                            continue
                        config = _cell_config(base, strategy, cr, cpc, seed)
                        cell = {
                            "run_id": config.run_id,
                            "strategy": strategy,
                            "connection_rate": cr,
                            "classes_per_client": cpc,
                            "seed": seed,
                        }
                        try:
                            sim = Simulation(config)
                            sim.run(sink)
                            cell["time_to_half_acc_s"] = sim.time_to_half
                            cell["final_accuracy"] = sim.last_accuracy
                            cell["error"] = None
                        except Exception as exc:  # keep sweeping other cells
                            sink.finish_run(None)
                            cell["time_to_half_acc_s"] = None
                            cell["final_accuracy"] = None
                            cell["error"] = f"{type(exc).__name__}: {exc}"
                        results.append(cell)
    finally:
        sink.close()
    return results


def summarize_reductions(csv_path: str | Path) -> list[dict]:
    """Table-1-style summary: per run, time to half accuracy and the
    reduction rate relative to the gossip baseline's time."""
    runs: dict[str, dict] = {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            entry = runs.setdefault(
                row["run_id"],
                {
                    "run_id": row["run_id"],
                    "strategy": row["strategy"],
                    "connection_rate": float(row["connection_rate"]),
                    "classes_per_client": int(row["classes_per_client"]),
                    "time_to_half_acc_s": None,
                },
            )
            cell = row.get("time_to_half_acc_s", "")
            if cell and cell != NOT_REACHED:
                entry["time_to_half_acc_s"] = float(cell)

    gossip_times = [
        (r["connection_rate"], r["time_to_half_acc_s"])
        for r in runs.values()
        if r["strategy"] == "gossip" and r["time_to_half_acc_s"] is not None
    ]
    if not gossip_times:
        raise ValueError("gossip baseline missing from CSV")
    baseline = max(gossip_times)[1]  # prefer the highest connection rate

    summary = []
    for run in runs.values():
        t = run["time_to_half_acc_s"]
        reduction = None if t is None or t == 0 else baseline / t
        summary.append({**run, "reduction_vs_gossip": reduction})
    summary.sort(key=lambda r: (-r["connection_rate"], r["strategy"], r["classes_per_client"]))
    return summary


def write_summary_csv(summary: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["connection_rate", "classes_per_client", "strategy", "time_to_half_acc_s", "reduction_vs_gossip"]
        )
        for row in summary:
            t = row["time_to_half_acc_s"]
            r = row["reduction_vs_gossip"]
            writer.writerow(
                [
                    f"{row['connection_rate']:g}",
                    row["classes_per_client"],
                    row["strategy"],
                    NOT_REACHED if t is None else f"{t:.4f}",
                    "" if r is None else f"{r:.2f}",
                ]
            )
