"""Trajectory extrapolation and the distance-degraded latency model."""

import math

import numpy as np
import pytest

from vflsim.config import ScenarioConfig
from vflsim.forecast import (
    LatencyModel,
    TrajectoryPredictor,
    UnknownClientError,
    estimate_latency,
    predict_rttg,
    predicted_round_latency,
)
from vflsim.mobility import MobilityEngine, VehicleState, build_scenario
from vflsim.v2x_fusion import CamRecord, empty_graph, fuse


def _state(vid, x, y, vx=0.0, vy=0.0, ax=0.0, ay=0.0, t=0.0):
    return VehicleState(
        vid,
        np.array([x, y], dtype=np.float64),
        np.array([vx, vy], dtype=np.float64),
        np.array([ax, ay], dtype=np.float64),
        0.0,
        t,
    )


def _graph_of(states, rsus=((0.0, 0.0),), radio_range=150.0, now=0.0):
    prior = empty_graph([np.array(r) for r in rsus], radio_range=radio_range)
    cams = [CamRecord(s.vehicle_id, s, s.timestamp) for s in states]
    return fuse(cams, now=now, prior=prior)


def test_constant_velocity_extrapolation():
    graph = _graph_of([_state(0, 0, 0, vx=10.0)])
    future = predict_rttg(graph, TrajectoryPredictor("constant_velocity", horizon=2.0))
    assert np.allclose(future.nodes[0].state.position, [20.0, 0.0])
    assert future.snapshot_time == pytest.approx(2.0)


def test_constant_acceleration_extrapolation():
    # p' = p + v*h + a*h^2/2 = 0 + 0 + 4/2 = 2
    graph = _graph_of([_state(0, 0, 0, ax=4.0)])
    future = predict_rttg(graph, TrajectoryPredictor("constant_acceleration", horizon=1.0))
    assert np.allclose(future.nodes[0].state.position, [2.0, 0.0])
    assert np.allclose(future.nodes[0].state.velocity, [4.0, 0.0])


def test_stationary_prediction_fixed_point():
    graph = _graph_of([_state(0, 5, 5), _state(1, 50, 5)])
    future = predict_rttg(graph, TrajectoryPredictor("constant_velocity", horizon=7.0))
    for vid in (0, 1):
        assert np.array_equal(
            future.nodes[vid].state.position, graph.nodes[vid].state.position
        )
    assert future.edges == graph.edges


def test_latency_example_at_cell_edge():
    # d = range_rsu: bandwidth 50e6/10 = 5e6; uplink = 0.05 + 32e6/5e6 = 6.45
    model = LatencyModel(
        base_latency=0.05, payload_bits=32e6, bandwidth_near=50e6,
        range_rsu=300.0, distance_exponent=2.0, jitter_std=0.0, seed=0,
    )
    graph = _graph_of([_state(0, 300.0, 0.0)])
    estimate = estimate_latency(graph, 0, model)
    assert estimate.connected
    assert estimate.uplink == pytest.approx(6.45)
    assert estimate.downlink == pytest.approx(6.45)


def test_latency_at_zero_distance():
    model = LatencyModel(jitter_std=0.0)
    graph = _graph_of([_state(0, 0.0, 0.0)])
    estimate = estimate_latency(graph, 0, model)
    expected = 0.05 + (50890 * 32) / 50e6
    assert estimate.uplink == pytest.approx(expected)
    assert estimate.uplink >= model.base_latency


def test_unreachable_beyond_rsu_range():
    model = LatencyModel(jitter_std=0.0)
    graph = _graph_of([_state(0, 301.0, 0.0)])
    estimate = estimate_latency(graph, 0, model)
    assert not estimate.connected
    assert math.isinf(estimate.uplink)


def test_unknown_client_raises():
    model = LatencyModel()
    graph = _graph_of([_state(0, 0, 0)])
    with pytest.raises(UnknownClientError):
        estimate_latency(graph, 99, model)


def test_latency_monotone_in_distance_with_jitter_off():
    model = LatencyModel(jitter_std=0.0)
    last = 0.0
    for d in np.linspace(0.0, 300.0, 61):
        graph = _graph_of([_state(0, float(d), 0.0)])
        uplink = estimate_latency(graph, 0, model).uplink
        assert uplink >= last
        last = uplink


def test_jitter_deterministic_and_keyed():
    model = LatencyModel(jitter_std=0.01, seed=5)
    graph = _graph_of([_state(0, 10.0, 0.0)])
    a = estimate_latency(graph, 0, model, round_index=3)
    b = estimate_latency(graph, 0, model, round_index=3)
    c = estimate_latency(graph, 0, model, round_index=4)
    assert a.uplink == b.uplink and a.downlink == b.downlink
    assert a.uplink != c.uplink
    assert a.uplink != a.downlink  # directions draw independently


def test_predicted_equals_current_for_stationary():
    model = LatencyModel(jitter_std=0.005, seed=1)
    graph = _graph_of([_state(0, 40.0, 0.0), _state(1, 80.0, 0.0)])
    predictor = TrajectoryPredictor("constant_velocity", horizon=3.0)
    predicted = predicted_round_latency(graph, predictor, model, [0, 1], round_index=2)
    for cid in (0, 1):
        current = estimate_latency(graph, cid, model, round_index=2)
        assert predicted[cid].uplink == current.uplink
        assert predicted[cid].downlink == current.downlink


def test_predicted_uplink_drops_when_approaching_rsu():
    model = LatencyModel(jitter_std=0.0)
    graph = _graph_of([_state(0, 200.0, 0.0, vx=-20.0)])
    predictor = TrajectoryPredictor("constant_velocity", horizon=2.0)
    predicted = predicted_round_latency(graph, predictor, model, [0])
    current = estimate_latency(graph, 0, model)
    assert predicted[0].uplink < current.uplink


def test_empty_client_set_gives_empty_association():
    model = LatencyModel()
    graph = _graph_of([_state(0, 0, 0)])
    predictor = TrajectoryPredictor("constant_velocity", horizon=1.0)
    assert predicted_round_latency(graph, predictor, model, []) == {}


def test_cv_prediction_matches_realized_straight_motion():
    # waypoint vehicles move straight between retargets, so constant-velocity
    # prediction must land within one integration step (v_max * dt) of the
    # realized position over the horizon
    config = ScenarioConfig(
        vehicle_count=5,
        mobility_kind="grid_random_waypoint",
        bounds=(0.0, 0.0, 100000.0, 100000.0),
    )
    engine = MobilityEngine(build_scenario(config, seed=21))
    states = engine.states()
    graph = _graph_of(states, radio_range=1e9)
    horizon = 1.0
    future = predict_rttg(graph, TrajectoryPredictor("constant_velocity", horizon))
    steps = int(horizon / config.dt)
    for _ in range(steps):
        realized = engine.advance(config.dt)
    for state in realized:
        predicted = future.nodes[state.vehicle_id].state.position
        error = np.hypot(*(predicted - state.position))
        assert error <= config.v_max * config.dt + 1e-9
