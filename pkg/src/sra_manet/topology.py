"""Node placement, random-waypoint mobility and disc-model neighbourhoods."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

DEFAULT_SPEED_RANGE = (25.0, 30.0)
DEFAULT_PAUSE_TIME = 10.0


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class WorldConfig:
    area_width: float = 1200.0
    area_height: float = 1200.0
    radio_range: float = 250.0
    node_count: int = 50

    @property
    def area(self) -> float:
        return self.area_width * self.area_height

    def contains(self, pos: Position) -> bool:
        return 0.0 <= pos.x <= self.area_width and 0.0 <= pos.y <= self.area_height

    def validate(self) -> list[str]:
        errors = []
        if not self.radio_range > 0:
            errors.append("radio_range must be > 0")
        if not (self.area_width > 0 and self.area_height > 0):
            errors.append("area dimensions must be > 0")
        if self.node_count < 2:
            errors.append("node_count must be >= 2")
        return errors


@dataclass(frozen=True)
class MobilityState:
    position: Position
    waypoint: Position
    speed: float
    pause_remaining: float = 0.0


def random_position(world: WorldConfig, rng: random.Random) -> Position:
    return Position(rng.uniform(0.0, world.area_width), rng.uniform(0.0, world.area_height))


def initial_mobility(
    world: WorldConfig,
    rng: random.Random,
    speed_range: tuple[float, float] = DEFAULT_SPEED_RANGE,
) -> MobilityState:
    """Uniform placement with a first waypoint already drawn and no pause."""
    pos = random_position(world, rng)
    return MobilityState(pos, random_position(world, rng), rng.uniform(*speed_range), 0.0)


def step_mobility(
    state: MobilityState,
    dt: float,
    world: WorldConfig,
    rng: random.Random,
    speed_range: tuple[float, float] = DEFAULT_SPEED_RANGE,
    pause_time: float = DEFAULT_PAUSE_TIME,
) -> MobilityState:
    """Advance one random-waypoint node by ``dt`` seconds.

    A paused node only burns pause time. A moving node walks toward its
    waypoint; on reaching it the node snaps to the waypoint, starts a full
    pause and draws its next waypoint and speed. Time left over inside the
    tick after an arrival (or after a pause ends) is discarded.
    """
    if state.pause_remaining > 0.0:
        return MobilityState(
            state.position, state.waypoint, state.speed, max(0.0, state.pause_remaining - dt)
        )
    pos, wp = state.position, state.waypoint
    dx, dy = wp.x - pos.x, wp.y - pos.y
    dist = math.hypot(dx, dy)
    travel = state.speed * dt
    if travel >= dist:
        nxt = random_position(world, rng)
        return MobilityState(wp, nxt, rng.uniform(*speed_range), pause_time)
    frac = travel / dist
    return MobilityState(Position(pos.x + dx * frac, pos.y + dy * frac), wp, state.speed, 0.0)


class MobilityField:
    """Array-backed random waypoint for a whole node population.

    Same kinematics as :func:`step_mobility`, applied to every node at once.
    Each node draws from its own ``random.Random`` stream so the trajectory of
    node ``i`` does not depend on how many other nodes exist.
    """

    def __init__(
        self,
        states: Sequence[MobilityState],
        world: WorldConfig,
        rngs: Sequence[random.Random],
        speed_range: tuple[float, float] = DEFAULT_SPEED_RANGE,
        pause_time: float = DEFAULT_PAUSE_TIME,
    ):
        self.world = world
        self.rngs = list(rngs)
        self.speed_range = speed_range
        self.pause_time = pause_time
        self.pos = np.array([[s.position.x, s.position.y] for s in states], dtype=float)
        self.wp = np.array([[s.waypoint.x, s.waypoint.y] for s in states], dtype=float)
        self.speed = np.array([s.speed for s in states], dtype=float)
        self.pause = np.array([s.pause_remaining for s in states], dtype=float)

    def state(self, i: int) -> MobilityState:
        return MobilityState(
            Position(float(self.pos[i, 0]), float(self.pos[i, 1])),
            Position(float(self.wp[i, 0]), float(self.wp[i, 1])),
            float(self.speed[i]),
            float(self.pause[i]),
        )

    def step(self, dt: float) -> None:
        paused = self.pause > 0.0
        self.pause[paused] = np.maximum(0.0, self.pause[paused] - dt)
        moving = ~paused
        delta = self.wp - self.pos
        dist = np.hypot(delta[:, 0], delta[:, 1])
        travel = self.speed * dt
        arrive = moving & (travel >= dist)
        walk = moving & ~arrive
        frac = np.zeros_like(dist)
        frac[walk] = travel[walk] / dist[walk]
        self.pos[walk] += delta[walk] * frac[walk, None]
        w, h = self.world.area_width, self.world.area_height
        for i in np.flatnonzero(arrive):
            rng = self.rngs[i]
            self.pos[i] = self.wp[i]
            # draw order mirrors step_mobility: waypoint x, y, then speed
            self.wp[i, 0] = rng.uniform(0.0, w)
            self.wp[i, 1] = rng.uniform(0.0, h)
            self.speed[i] = rng.uniform(*self.speed_range)
            self.pause[i] = self.pause_time

    def adjacency(self, radio_range: float, alive: np.ndarray | None = None) -> np.ndarray:
        """Boolean unit-disk adjacency matrix (symmetric, zero diagonal)."""
        d = self.pos[:, None, :] - self.pos[None, :, :]
        adj = (d[..., 0] ** 2 + d[..., 1] ** 2) <= radio_range * radio_range
        np.fill_diagonal(adj, False)
        if alive is not None:
            adj &= alive[:, None] & alive[None, :]
        return adj


def neighbors(node_id: Hashable, positions: Mapping[Hashable, Position], range_: float) -> set:
    """Every other node within Euclidean distance ``range_`` (inclusive)."""
    me = positions[node_id]
    return {
        other
        for other, pos in positions.items()
        if other != node_id and me.distance_to(pos) <= range_
    }


def transmission_radius(a0: float, b0: float, a: float, b: float) -> float:
    return math.sqrt((a - a0) ** 2 + (b - b0) ** 2) / 2.0


def expected_neighbor_count(node_count: int, world: WorldConfig, radius: float) -> float:
    """Node density times disc area, ``n / A * pi * r^2``."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if world.area <= 0:
        raise ValueError("area must be > 0")
    return node_count / world.area * math.pi * radius * radius


def expected_path_distance(h: int, d_avg: float) -> float:
    if h < 1:
        raise ValueError("a path has at least one hop")
    if d_avg < 0:
        raise ValueError("d_avg must be >= 0")
    return h * d_avg
