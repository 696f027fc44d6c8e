"""Deterministic vehicle mobility on synthetic road scenarios.

Three kinds are provided: ring_road (vehicles circulate a circular lane at
fixed per-vehicle speeds), grid_random_waypoint (straight legs between seeded
waypoints inside the bounds), and stationary. Identical (config, seed) pairs
replay bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, ScenarioConfig


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one vehicle at an instant of simulated time."""

    vehicle_id: int
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    heading: float
    timestamp: float


@dataclass
class Scenario:
    config: ScenarioConfig
    seed: int
    initial_states: list[VehicleState]
    rsu_positions: list[np.ndarray]


def _vec(x: float, y: float) -> np.ndarray:
    return np.array([x, y], dtype=np.float64)


def _ring_center(config: ScenarioConfig) -> np.ndarray:
    x0, y0, x1, y1 = config.bounds
    return _vec((x0 + x1) / 2.0, (y0 + y1) / 2.0)


def _default_rsus(config: ScenarioConfig) -> list[np.ndarray]:
    if config.rsu_positions:
        return [_vec(*p) for p in config.rsu_positions]
    if config.rsu_count < 1:
        raise ConfigError("at least one RSU is required")
    if config.mobility_kind == "ring_road":
        center = _ring_center(config)
        angles = 2.0 * math.pi * np.arange(config.rsu_count) / config.rsu_count
        return [center + config.ring_radius * _vec(math.cos(a), math.sin(a)) for a in angles]
    x0, y0, x1, y1 = config.bounds
    side = math.ceil(math.sqrt(config.rsu_count))
    rsus = []
    for k in range(config.rsu_count):
        i, j = divmod(k, side)
        rsus.append(_vec(x0 + (j + 0.5) * (x1 - x0) / side, y0 + (i + 0.5) * (y1 - y0) / side))
    return rsus


def build_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Place vehicles deterministically from the seed.

    ring_road spaces vehicles equally in angle; grid_random_waypoint and
    stationary place them uniformly in bounds unless explicit positions are
    given in the config.
    """
    config.validate()
    n = config.vehicle_count
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    x0, y0, x1, y1 = config.bounds

    if config.mobility_kind == "ring_road":
        if config.ring_radius > min(x1 - x0, y1 - y0) / 2.0:
            raise ConfigError("ring_radius does not fit inside bounds")
        speed_cap = min(config.v_max, math.sqrt(config.a_max * config.ring_radius))
        speeds = np.minimum(rng.uniform(config.speed_min, config.speed_max, n), speed_cap)
        center = _ring_center(config)
        states = []
        for i in range(n):
            theta = 2.0 * math.pi * i / n
            states.append(_ring_state(i, theta, speeds[i], center, config.ring_radius, 0.0))
    elif config.mobility_kind == "grid_random_waypoint":
        if config.positions is not None:
            if len(config.positions) != n:
                raise ConfigError("positions length must equal vehicle_count")
            pos = np.array(config.positions, dtype=np.float64)
        else:
            pos = np.column_stack(
                [rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)]
            )
        states = [
            VehicleState(i, pos[i].copy(), _vec(0, 0), _vec(0, 0), 0.0, 0.0)
            for i in range(n)
        ]
    else:
        if config.positions is not None:
            if len(config.positions) != n:
                raise ConfigError("positions length must equal vehicle_count")
            pos = np.array(config.positions, dtype=np.float64)
        else:
            pos = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
        states = [
            VehicleState(i, pos[i].copy(), _vec(0, 0), _vec(0, 0), 0.0, 0.0)
            for i in range(n)
        ]
    return Scenario(config, seed, states, _default_rsus(config))


def _ring_state(
    vid: int, theta: float, speed: float, center: np.ndarray, radius: float, now: float
) -> VehicleState:
    tangent = _vec(-math.sin(theta), math.cos(theta))
    position = center + radius * _vec(math.cos(theta), math.sin(theta))
    velocity = speed * tangent
    # centripetal acceleration points toward the ring center
    acceleration = -(speed * speed / radius) * _vec(math.cos(theta), math.sin(theta))
    heading = math.atan2(tangent[1], tangent[0])
    return VehicleState(vid, position, velocity, acceleration, heading, now)


def step_kinematics(state: VehicleState, dt: float) -> VehicleState:
    """Semi-implicit Euler step: v += a*dt then p += v*dt."""
    velocity = state.velocity + state.acceleration * dt
    position = state.position + velocity * dt
    heading = state.heading
    speed = float(np.hypot(velocity[0], velocity[1]))
    if speed > 0:
        heading = math.atan2(velocity[1], velocity[0])
    return replace(
        state,
        position=position,
        velocity=velocity,
        heading=heading,
        timestamp=state.timestamp + dt,
    )


class MobilityEngine:
    """Advances a scenario's vehicles through simulated time.

    Holds the per-vehicle auxiliary state (ring speeds, waypoint targets and
    their seeded generators) so that rebuilding the engine from the same
    scenario replays the identical trajectory table.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.config = scenario.config
        self.now = 0.0
        self._states = list(scenario.initial_states)
        n = self.config.vehicle_count
        seq = np.random.SeedSequence([scenario.seed, 1])
        self._vehicle_rngs = [np.random.default_rng(s) for s in seq.spawn(n)]
        kind = self.config.mobility_kind
        if kind == "ring_road":
            self._speeds = np.array(
                [float(np.hypot(*s.velocity)) for s in self._states]
            )
            self._center = _ring_center(self.config)
        elif kind == "grid_random_waypoint":
            self._speeds = np.array(
                [
                    min(r.uniform(self.config.speed_min, self.config.speed_max), self.config.v_max)
                    for r in self._vehicle_rngs
                ]
            )
            self._targets = [self._draw_target(i) for i in range(n)]
            self._states = [
                self._aim(s, self._targets[s.vehicle_id]) for s in self._states
            ]

    def _draw_target(self, vid: int) -> np.ndarray:
        x0, y0, x1, y1 = self.config.bounds
        r = self._vehicle_rngs[vid]
        return _vec(r.uniform(x0, x1), r.uniform(y0, y1))

    def _aim(self, state: VehicleState, target: np.ndarray) -> VehicleState:
        direction = target - state.position
        dist = float(np.hypot(direction[0], direction[1]))
        if dist == 0.0:
            return replace(state, velocity=_vec(0, 0))
        unit = direction / dist
        speed = self._speeds[state.vehicle_id]
        return replace(
            state,
            velocity=speed * unit,
            heading=math.atan2(unit[1], unit[0]),
        )

    def states(self) -> list[VehicleState]:
        return list(self._states)

    def advance(self, dt: float) -> list[VehicleState]:
        """Advance every vehicle by one step of dt seconds."""
        if dt <= 0:
            raise ConfigError("dt must be positive")
        kind = self.config.mobility_kind
        self.now += dt
        if kind == "ring_road":
            self._states = [self._advance_ring(s, dt) for s in self._states]
        elif kind == "grid_random_waypoint":
            self._states = [self._advance_waypoint(s, dt) for s in self._states]
        else:
            self._states = [replace(s, timestamp=self.now) for s in self._states]
        return self.states()

    def _advance_ring(self, state: VehicleState, dt: float) -> VehicleState:
        radius = self.config.ring_radius
        offset = state.position - self._center
        theta = math.atan2(offset[1], offset[0])
        speed = self._speeds[state.vehicle_id]
        theta = math.remainder(theta + speed / radius * dt, 2.0 * math.pi)
        return _ring_state(state.vehicle_id, theta, speed, self._center, radius, self.now)

    def _advance_waypoint(self, state: VehicleState, dt: float) -> VehicleState:
        vid = state.vehicle_id
        target = self._targets[vid]
        to_target = target - state.position
        dist = float(np.hypot(to_target[0], to_target[1]))
        step_len = self._speeds[vid] * dt
        if dist <= step_len:
            arrived = replace(state, position=target.copy(), timestamp=self.now)
            self._targets[vid] = self._draw_target(vid)
            return self._aim(arrived, self._targets[vid])
        stepped = step_kinematics(state, dt)
        return replace(stepped, timestamp=self.now)


def advance(engine: MobilityEngine, dt: float) -> list[VehicleState]:
    """Module-level alias for MobilityEngine.advance."""
    return engine.advance(dt)
