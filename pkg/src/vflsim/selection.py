"""The five client-selection strategies behind one RoundContext interface.

greedy takes every connected client; gossip samples uniformly; data-based
picks per-cluster at random from gradient-fingerprint clusters regardless of
connectivity (it models a policy blind to network state, so its picks can
no-show); network-based takes the lowest measured round-trip latencies;
contextual applies the Fast-gamma rule, the lowest predicted round-trip
latencies within each cluster with at least one pick per cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import TrainingConfig
from .fl_core import GradientFingerprint, compute_time, local_train, make_fingerprint
from .forecast import LatencyEstimate
from .v2x_fusion import RoadTrafficTopologyGraph

GOSSIP_TAG = 8
DATA_TAG = 9


@dataclass
class ClusterAssignment:
    assignment: dict[int, int]
    cluster_count: int

    def members(self, cluster_id: int) -> list[int]:
        return sorted(cid for cid, k in self.assignment.items() if k == cluster_id)


@dataclass
class RoundContext:
    round_index: int
    connected: set[int]
    universe_size: int
    fingerprints: dict[int, GradientFingerprint] = field(default_factory=dict)
    cluster_assignment: ClusterAssignment | None = None
    current_rttg: RoadTrafficTopologyGraph | None = None
    predicted_latency: dict[int, LatencyEstimate] = field(default_factory=dict)
    actual_latency: dict[int, LatencyEstimate] = field(default_factory=dict)
    selection_rate: float = 0.10
    gamma: float = 0.10
    cluster_count: int = 10
    seed: int = 0


@dataclass
class SelectionDecision:
    selected: list[int]
    rationale: dict[int, tuple[int | None, float | None]]
    strategy: str
    no_participants: bool = False


# ---------------------------------------------------------------------------
# Gradient-fingerprint clustering


def _unit_deltas(fingerprints: Mapping[int, GradientFingerprint], ids: Sequence[int]) -> np.ndarray:
    rows = np.stack([fingerprints[cid].delta.astype(np.float64) for cid in ids])
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / norms


def cluster_by_gradient(
    fingerprints: Mapping[int, GradientFingerprint], cluster_count: int, seed: int = 0
) -> ClusterAssignment:
    """Average-linkage agglomerative clustering over cosine distance.

    Fully deterministic: merge ties break on the smallest
    (min client id of A, min client id of B) pair. Zero-norm deltas cannot
    enter cosine space; they start as their own singleton clusters and merge
    together in id order when the budget requires. With fewer fingerprints
    than clusters the fallback is one client per cluster.
    """
    if not fingerprints:
        raise ValueError("at least one fingerprint is required")
    if cluster_count < 1:
        raise ValueError("cluster_count must be >= 1")
    ids = sorted(fingerprints)
    if len(ids) < cluster_count:
        return ClusterAssignment({cid: i for i, cid in enumerate(ids)}, len(ids))

    zero_ids = [cid for cid in ids if fingerprints[cid].norm == 0.0]
    nonzero_ids = [cid for cid in ids if fingerprints[cid].norm > 0.0]

    if nonzero_ids:
        zero_budget = min(len(zero_ids), cluster_count - 1) if zero_ids else 0
    else:
        zero_budget = min(len(zero_ids), cluster_count)
    nonzero_budget = cluster_count - zero_budget

    clusters: list[list[int]] = []
    if zero_ids:
        head = len(zero_ids) - zero_budget + 1
        clusters.append(list(zero_ids[:head]))
        clusters.extend([z] for z in zero_ids[head:])

    if nonzero_ids:
        if len(nonzero_ids) <= nonzero_budget:
            clusters.extend([c] for c in nonzero_ids)
        else:
            clusters.extend(_agglomerate(fingerprints, nonzero_ids, nonzero_budget))

    clusters.sort(key=min)
    assignment = {}
    for k, members in enumerate(clusters):
        for cid in members:
            assignment[cid] = k
    return ClusterAssignment(assignment, len(clusters))


def _agglomerate(
    fingerprints: Mapping[int, GradientFingerprint], ids: list[int], target: int
) -> list[list[int]]:
    units = _unit_deltas(fingerprints, ids)
    n = len(ids)
    dist = 1.0 - units @ units.T
    np.fill_diagonal(dist, np.inf)
    members: list[list[int] | None] = [[cid] for cid in ids]
    sizes = np.ones(n)
    active = list(range(n))
    while len(active) > target:
        # ids are sorted, merges land in the lower index, so index order on
        # `active` equals min-member-id order and the first (row, col) hit at
        # the minimum distance is the tie-break winner
        sub = dist[np.ix_(active, active)]
        minimum = sub.min()
        rows, cols = np.nonzero(sub == minimum)
        a = b = None
        for r, c in zip(rows, cols):
            if r < c:
                a, b = active[r], active[c]
                break
        # average-linkage update keeps exact mean pairwise distances
        for c in active:
            if c in (a, b):
                continue
            dist[a, c] = dist[c, a] = (
                sizes[a] * dist[a, c] + sizes[b] * dist[b, c]
            ) / (sizes[a] + sizes[b])
        members[a] = sorted(members[a] + members[b])
        sizes[a] += sizes[b]
        members[b] = None
        active.remove(b)
    return [members[a] for a in active]


def cluster_centroids(
    assignment: ClusterAssignment, fingerprints: Mapping[int, GradientFingerprint]
) -> dict[int, np.ndarray]:
    """Mean of the unit deltas per cluster, skipping zero-norm members."""
    centroids = {}
    for k in range(assignment.cluster_count):
        ids = [
            cid
            for cid in assignment.members(k)
            if cid in fingerprints and fingerprints[cid].norm > 0.0
        ]
        if ids:
            centroids[k] = _unit_deltas(fingerprints, ids).mean(axis=0)
    return centroids


def assign_nearest_centroid(
    fingerprint: GradientFingerprint, centroids: Mapping[int, np.ndarray]
) -> int | None:
    """Cluster id whose centroid has the smallest cosine distance; id ties low."""
    if not centroids or fingerprint.norm == 0.0:
        return None
    unit = fingerprint.delta.astype(np.float64) / fingerprint.norm
    best = None
    for k in sorted(centroids):
        centroid = centroids[k]
        scale = np.linalg.norm(centroid)
        if scale == 0.0:
            continue
        d = 1.0 - float(unit @ centroid) / scale
        if best is None or d < best[0]:
            best = (d, k)
    return None if best is None else best[1]


# ---------------------------------------------------------------------------
# Fingerprint profiling


@dataclass
class ProfilingReport:
    on_time: dict[int, GradientFingerprint]
    late: dict[int, tuple[GradientFingerprint, float]]
    unreported: set[int]
    wait_time: float


def profile_fingerprints(
    global_params: np.ndarray,
    client_data: Mapping[int, tuple[np.ndarray, np.ndarray]],
    clients: Sequence[int],
    deadline: float,
    actual_latency: Mapping[int, LatencyEstimate],
    training: TrainingConfig,
    rng_factory: Callable[[int], np.random.Generator],
) -> ProfilingReport:
    """One-epoch profiling pass over the given clients.

    A client's fingerprint is recorded on time iff its compute plus uplink
    fits the deadline; late reports carry their arrival offset so they can be
    folded in by nearest-centroid later; unreachable clients never report.
    The server's wait is the slowest on-time report, capped by the deadline
    whenever anyone is late.
    """
    on_time: dict[int, GradientFingerprint] = {}
    late: dict[int, tuple[GradientFingerprint, float]] = {}
    unreported: set[int] = set()
    slowest = 0.0
    any_late = False
    for cid in sorted(clients):
        estimate = actual_latency.get(cid)
        if estimate is None or not estimate.connected:
            unreported.add(cid)
            any_late = True
            continue
        images, labels = client_data[cid]
        local, n = local_train(global_params, images, labels, training, rng_factory(cid), epochs=1)
        fingerprint = make_fingerprint(cid, local, global_params)
        report_time = compute_time(n, training, epochs=1) + estimate.uplink
        if report_time <= deadline:
            on_time[cid] = fingerprint
            slowest = max(slowest, report_time)
        else:
            late[cid] = (fingerprint, report_time)
            any_late = True
    wait = deadline if any_late else slowest
    return ProfilingReport(on_time, late, unreported, wait)


# ---------------------------------------------------------------------------
# Strategies


def _empty_decision(strategy: str) -> SelectionDecision:
    return SelectionDecision([], {}, strategy, no_participants=True)


def _sample_size(rate: float, universe: int) -> int:
    return max(1, int(round(rate * universe)))


def select_greedy(ctx: RoundContext) -> SelectionDecision:
    if not ctx.connected:
        return _empty_decision("greedy")
    selected = sorted(ctx.connected)
    return SelectionDecision(selected, {cid: (None, None) for cid in selected}, "greedy")


def select_gossip(ctx: RoundContext) -> SelectionDecision:
    if not ctx.connected:
        return _empty_decision("gossip")
    pool = sorted(ctx.connected)
    size = min(_sample_size(ctx.selection_rate, ctx.universe_size), len(pool))
    rng = np.random.default_rng(np.random.SeedSequence([ctx.seed, GOSSIP_TAG, ctx.round_index]))
    selected = sorted(int(c) for c in rng.choice(pool, size=size, replace=False))
    return SelectionDecision(selected, {cid: (None, None) for cid in selected}, "gossip")


def select_data_based(ctx: RoundContext) -> SelectionDecision:
    """Per-cluster uniform picks, blind to the connected set.

    The policy reasons over data similarity only, so its chosen clients may be
    disconnected this round; the harness treats those as no-shows.
    """
    assignment = _require_clusters(ctx)
    if not ctx.connected:
        return _empty_decision("data")
    selected: list[int] = []
    rationale: dict[int, tuple[int | None, float | None]] = {}
    for k in range(assignment.cluster_count):
        members = assignment.members(k)
        if not members:
            continue
        size = min(_sample_size(ctx.selection_rate, len(members)), len(members))
        rng = np.random.default_rng(
            np.random.SeedSequence([ctx.seed, DATA_TAG, ctx.round_index, k])
        )
        picks = rng.choice(members, size=size, replace=False)
        for cid in picks:
            selected.append(int(cid))
            rationale[int(cid)] = (k, None)
    return SelectionDecision(sorted(selected), rationale, "data")


def select_network_based(ctx: RoundContext) -> SelectionDecision:
    if not ctx.connected:
        return _empty_decision("network")
    size = _sample_size(ctx.selection_rate, ctx.universe_size)
    ranked = sorted(
        (cid for cid in ctx.connected if cid in ctx.actual_latency),
        key=lambda cid: (ctx.actual_latency[cid].round_trip, cid),
    )
    selected = sorted(ranked[:size])
    return SelectionDecision(
        selected,
        {cid: (None, ctx.actual_latency[cid].round_trip) for cid in selected},
        "network",
    )


def select_contextual(ctx: RoundContext) -> SelectionDecision:
    """Fast-gamma: per cluster, the gamma-fraction (at least one) of the
    connected members with the lowest predicted round-trip latency."""
    assignment = _require_clusters(ctx)
    if not ctx.connected:
        return _empty_decision("contextual")
    selected: list[int] = []
    rationale: dict[int, tuple[int | None, float | None]] = {}
    for k in range(assignment.cluster_count):
        members = assignment.members(k)
        reachable = [
            cid for cid in members if cid in ctx.connected and cid in ctx.predicted_latency
        ]
        if not reachable:
            continue
        quota = max(1, math.floor(ctx.gamma * len(reachable)))
        ranked = sorted(
            reachable, key=lambda cid: (ctx.predicted_latency[cid].round_trip, cid)
        )
        for cid in ranked[: min(quota, len(ranked))]:
            selected.append(cid)
            rationale[cid] = (k, ctx.predicted_latency[cid].round_trip)
    if not selected:
        return _empty_decision("contextual")
    return SelectionDecision(sorted(selected), rationale, "contextual")


def _require_clusters(ctx: RoundContext) -> ClusterAssignment:
    if ctx.cluster_assignment is not None:
        return ctx.cluster_assignment
    if not ctx.fingerprints:
        raise ValueError("strategy requires fingerprints or a cluster assignment")
    return cluster_by_gradient(ctx.fingerprints, ctx.cluster_count, ctx.seed)


STRATEGY_FUNCTIONS = {
    "greedy": select_greedy,
    "gossip": select_gossip,
    "data": select_data_based,
    "network": select_network_based,
    "contextual": select_contextual,
}


def select(strategy: str, ctx: RoundContext) -> SelectionDecision:
    try:
        fn = STRATEGY_FUNCTIONS[strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}") from None
    return fn(ctx)
