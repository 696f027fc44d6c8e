"""Trajectory prediction over the topology graph and the latency model.

predict_rttg extrapolates every node's kinematics over a horizon and rebuilds
the radio edges, giving the future topology the selection stage reasons about.
estimate_latency converts RSU distance into uplink/downlink seconds through a
parametric bandwidth-degradation model with seeded, reproducible jitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import LatencyConfig
from .mobility import VehicleState
from .v2x_fusion import NodeEntry, RoadTrafficTopologyGraph, compute_edges

UNREACHABLE = math.inf
EDGE_DEGRADATION = 9.0


class UnknownClientError(KeyError):
    """Raised when a latency estimate is requested for an absent client."""


@dataclass(frozen=True)
class TrajectoryPredictor:
    kind: str = "constant_velocity"
    horizon: float = 1.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.kind not in ("constant_velocity", "constant_acceleration"):
            raise ValueError(f"unknown predictor kind {self.kind!r}")


@dataclass(frozen=True)
class LatencyModel:
    base_latency: float = 0.05
    payload_bits: float = 50890 * 32
    bandwidth_near: float = 50e6
    range_rsu: float = 300.0
    distance_exponent: float = 2.0
    jitter_std: float = 0.005
    seed: int = 0

    @classmethod
    def from_config(cls, config: LatencyConfig, seed: int) -> "LatencyModel":
        return cls(
            base_latency=config.base_latency,
            payload_bits=config.payload_bits,
            bandwidth_near=config.bandwidth_near,
            range_rsu=config.range_rsu,
            distance_exponent=config.distance_exponent,
            jitter_std=config.jitter_std,
            seed=seed,
        )


@dataclass(frozen=True)
class LatencyEstimate:
    client_id: int
    uplink: float
    downlink: float
    connected: bool

    @property
    def round_trip(self) -> float:
        return self.uplink + self.downlink


def _extrapolate(state: VehicleState, kind: str, h: float) -> VehicleState:
    if kind == "constant_velocity":
        position = state.position + state.velocity * h
        velocity = state.velocity
    else:
        position = state.position + state.velocity * h + 0.5 * state.acceleration * h * h
        velocity = state.velocity + state.acceleration * h
    heading = state.heading
    speed = float(np.hypot(velocity[0], velocity[1]))
    if speed > 0:
        heading = math.atan2(velocity[1], velocity[0])
    return replace(
        state,
        position=position,
        velocity=velocity,
        heading=heading,
        timestamp=state.timestamp + h,
    )


def predict_rttg(current: RoadTrafficTopologyGraph, predictor: TrajectoryPredictor) -> RoadTrafficTopologyGraph:
    """Extrapolate every node over the predictor's horizon; recompute edges."""
    h = predictor.horizon
    nodes = {}
    for vid, entry in current.nodes.items():
        state = _extrapolate(entry.state, predictor.kind, h)
        nodes[vid] = NodeEntry(state, entry.last_update + h, entry.source)
    positions = {vid: entry.state.position for vid, entry in nodes.items()}
    return RoadTrafficTopologyGraph(
        nodes=nodes,
        rsu_nodes=list(current.rsu_nodes),
        edges=compute_edges(positions, current.radio_range),
        snapshot_time=current.snapshot_time + h,
        radio_range=current.radio_range,
        ttl=current.ttl,
    )


def _jitter(model: LatencyModel, round_index: int, client_id: int, direction: int) -> float:
    """Folded-Gaussian jitter keyed by (round, client, direction)."""
    if model.jitter_std <= 0:
        return 0.0
    rng = np.random.default_rng(
        np.random.SeedSequence([model.seed, 3, round_index, client_id, direction])
    )
    return abs(float(rng.normal(0.0, model.jitter_std)))


def rsu_distance(rttg: RoadTrafficTopologyGraph, client_id: int) -> float:
    if client_id not in rttg.nodes:
        raise UnknownClientError(client_id)
    position = rttg.nodes[client_id].state.position
    return min(float(np.hypot(*(position - rsu))) for rsu in rttg.rsu_nodes)


def estimate_latency(
    rttg: RoadTrafficTopologyGraph,
    client_id: int,
    model: LatencyModel,
    round_index: int = 0,
) -> LatencyEstimate:
    """Latency from the client's RSU distance in the given graph.

    Beyond range_rsu the client is unreachable. Within range, bandwidth
    degrades from bandwidth_near at the RSU to a tenth of it at the cell edge,
    and each direction pays base_latency + payload/bandwidth + jitter.
    """
    d = rsu_distance(rttg, client_id)
    if d > model.range_rsu:
        return LatencyEstimate(client_id, UNREACHABLE, UNREACHABLE, False)
    ratio = (d / model.range_rsu) ** model.distance_exponent
    bandwidth = model.bandwidth_near / (1.0 + EDGE_DEGRADATION * ratio)
    transfer = model.base_latency + model.payload_bits / bandwidth
    uplink = transfer + _jitter(model, round_index, client_id, 0)
    downlink = transfer + _jitter(model, round_index, client_id, 1)
    return LatencyEstimate(client_id, uplink, downlink, True)


def predicted_round_latency(
    rttg: RoadTrafficTopologyGraph,
    predictor: TrajectoryPredictor,
    model: LatencyModel,
    client_ids,
    round_index: int = 0,
) -> dict[int, LatencyEstimate]:
    """estimate_latency over the predicted graph, one entry per client."""
    future = predict_rttg(rttg, predictor)
    return {
        cid: estimate_latency(future, cid, model, round_index) for cid in client_ids
    }
