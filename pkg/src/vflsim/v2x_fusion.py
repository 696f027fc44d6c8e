"""V2X message generation and server-side fusion into a topology graph.

Vehicles periodically broadcast CAMs (own state) and CPMs (perceived
neighbors). The server fuses the message stream into a
RoadTrafficTopologyGraph: per vehicle the freshest state wins (CAM beats CPM
on equal timestamps), entries older than a ttl expire, and radio-range edges
are recomputed from the fused positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .mobility import VehicleState


@dataclass(frozen=True)
class MessageRates:
    cam_period: float = 0.1
    cpm_period: float = 0.2
    sensor_range: float = 80.0
    dt: float = 0.1


@dataclass(frozen=True)
class CamRecord:
    sender_id: int
    state: VehicleState
    generation_time: float


@dataclass(frozen=True)
class CpmRecord:
    sender_id: int
    perceived: tuple[VehicleState, ...]
    generation_time: float


@dataclass(frozen=True)
class NodeEntry:
    state: VehicleState
    last_update: float
    source: str


@dataclass
class FusionStats:
    processed: int = 0
    malformed: int = 0
    superseded: int = 0
    expired: int = 0


@dataclass
class RoadTrafficTopologyGraph:
    nodes: dict[int, NodeEntry] = field(default_factory=dict)
    rsu_nodes: list[np.ndarray] = field(default_factory=list)
    edges: set[tuple[int, int]] = field(default_factory=set)
    snapshot_time: float = 0.0
    radio_range: float = 150.0
    ttl: float = 1.0


def message_phases(vehicle_count: int, rates: MessageRates, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-vehicle emission phase offsets, in ticks, drawn from the seed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    cam_every = max(1, round(rates.cam_period / rates.dt))
    cpm_every = max(1, round(rates.cpm_period / rates.dt))
    cam = rng.integers(0, cam_every, vehicle_count)
    cpm = rng.integers(0, cpm_every, vehicle_count)
    return cam, cpm


def emit_messages(
    states: Sequence[VehicleState],
    now: float,
    rates: MessageRates,
    phases: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[list[CamRecord], list[CpmRecord]]:
    """Emit the CAMs and CPMs due at time now.

    A vehicle emits when the current tick lands on its period grid (per-vehicle
    phase offset). A CPM carries every other vehicle within sensor_range.
    """
    tick = round(now / rates.dt)
    cam_every = max(1, round(rates.cam_period / rates.dt))
    cpm_every = max(1, round(rates.cpm_period / rates.dt))
    n = len(states)
    if phases is None:
        cam_phase = np.zeros(n, dtype=np.int64)
        cpm_phase = np.zeros(n, dtype=np.int64)
    else:
        cam_phase, cpm_phase = phases

    cams = []
    cpms = []
    positions = np.array([s.position for s in states]) if n else np.zeros((0, 2))
    cpm_senders = [i for i in range(n) if (tick - cpm_phase[i]) % cpm_every == 0]
    if cpm_senders:
        diffs = positions[cpm_senders, None, :] - positions[None, :, :]
        dists = np.hypot(diffs[..., 0], diffs[..., 1])
    for i, state in enumerate(states):
        if (tick - cam_phase[i]) % cam_every == 0:
            cams.append(CamRecord(state.vehicle_id, state, state.timestamp))
    for row, i in enumerate(cpm_senders):
        near = np.nonzero(dists[row] <= rates.sensor_range)[0]
        perceived = tuple(states[j] for j in near if j != i)
        cpms.append(CpmRecord(states[i].vehicle_id, perceived, states[i].timestamp))
    return cams, cpms


def drop_messages(records: list, msg_loss: float, rng: np.random.Generator) -> list:
    """Independently drop each record with probability msg_loss."""
    if msg_loss <= 0.0:
        return list(records)
    keep = rng.random(len(records)) >= msg_loss
    return [r for r, k in zip(records, keep) if k]


def _candidates(message, stats: FusionStats):
    """Yield (vehicle_id, state, timestamp, source) from one record."""
    if isinstance(message, CamRecord):
        state = message.state
        ok = (
            state.vehicle_id == message.sender_id
            and message.generation_time == state.timestamp
            and np.all(np.isfinite(state.position))
        )
        if not ok:
            stats.malformed += 1
            return
        yield state.vehicle_id, state, state.timestamp, "cam"
    elif isinstance(message, CpmRecord):
        for state in message.perceived:
            ok = (
                state.vehicle_id != message.sender_id
                and state.timestamp <= message.generation_time
                and np.all(np.isfinite(state.position))
            )
            if not ok:
                stats.malformed += 1
                continue
            yield state.vehicle_id, state, state.timestamp, "cpm"
    else:
        stats.malformed += 1


def compute_edges(positions: dict[int, np.ndarray], radio_range: float) -> set[tuple[int, int]]:
    """Unordered id pairs whose Euclidean distance is within radio_range."""
    ids = sorted(positions)
    if len(ids) < 2:
        return set()
    pts = np.array([positions[i] for i in ids])
    diffs = pts[:, None, :] - pts[None, :, :]
    within = np.hypot(diffs[..., 0], diffs[..., 1]) <= radio_range
    rows, cols = np.nonzero(np.triu(within, k=1))
    return {(ids[a], ids[b]) for a, b in zip(rows.tolist(), cols.tolist())}


def fuse(
    messages: Iterable[CamRecord | CpmRecord],
    now: float,
    prior: RoadTrafficTopologyGraph,
    stats: FusionStats | None = None,
) -> RoadTrafficTopologyGraph:
    """Fuse a message stream onto the prior graph at time now.

    Per vehicle the latest-timestamp state wins; CAM is preferred over CPM on
    equal timestamps. Entries whose last_update falls behind now - ttl are
    dropped before edges are recomputed. Malformed records are counted in
    stats and skipped.
    """
    if stats is None:
        stats = FusionStats()
    nodes = dict(prior.nodes)
    for message in messages:
        if message is None or getattr(message, "generation_time", now) > now:
            stats.malformed += 1
            continue
        stats.processed += 1
        for vid, state, t, source in _candidates(message, stats):
            current = nodes.get(vid)
            if current is None:
                nodes[vid] = NodeEntry(state, t, source)
                continue
            newer = t > current.last_update
            tie_cam = t == current.last_update and source == "cam" and current.source == "cpm"
            if newer or tie_cam:
                nodes[vid] = NodeEntry(state, t, source)
                stats.superseded += 1
    kept = {}
    for vid, entry in nodes.items():
        if entry.last_update >= now - prior.ttl:
            kept[vid] = entry
        else:
            stats.expired += 1
    positions = {vid: entry.state.position for vid, entry in kept.items()}
    return RoadTrafficTopologyGraph(
        nodes=kept,
        rsu_nodes=list(prior.rsu_nodes),
        edges=compute_edges(positions, prior.radio_range),
        snapshot_time=now,
        radio_range=prior.radio_range,
        ttl=prior.ttl,
    )


def empty_graph(rsu_positions: Sequence[np.ndarray], radio_range: float, ttl: float = 1.0) -> RoadTrafficTopologyGraph:
    return RoadTrafficTopologyGraph(
        nodes={},
        rsu_nodes=[np.asarray(p, dtype=np.float64) for p in rsu_positions],
        edges=set(),
        snapshot_time=0.0,
        radio_range=radio_range,
        ttl=ttl,
    )


def _state_dict(state: VehicleState) -> dict:
    return {
        "vehicle_id": state.vehicle_id,
        "position": [float(state.position[0]), float(state.position[1])],
        "velocity": [float(state.velocity[0]), float(state.velocity[1])],
        "acceleration": [float(state.acceleration[0]), float(state.acceleration[1])],
        "heading": float(state.heading),
        "timestamp": float(state.timestamp),
    }


def trace_record(message: CamRecord | CpmRecord) -> dict:
    if isinstance(message, CamRecord):
        return {
            "kind": "cam",
            "sender_id": message.sender_id,
            "generation_time": message.generation_time,
            "state": _state_dict(message.state),
        }
    return {
        "kind": "cpm",
        "sender_id": message.sender_id,
        "generation_time": message.generation_time,
        "perceived": [_state_dict(s) for s in message.perceived],
    }


def write_trace(sink: IO[str] | str | Path, messages: Iterable[CamRecord | CpmRecord]) -> int:
    """Append messages to a JSON-lines trace; returns the record count."""
    count = 0
    if isinstance(sink, (str, Path)):
        with open(sink, "a") as fh:
            return write_trace(fh, messages)
    for message in messages:
        sink.write(json.dumps(trace_record(message)) + "\n")
        count += 1
    return count
