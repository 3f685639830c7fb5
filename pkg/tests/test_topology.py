import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sra_manet.topology import (
    MobilityField,
    MobilityState,
    Position,
    WorldConfig,
    expected_neighbor_count,
    expected_path_distance,
    initial_mobility,
    neighbors,
    step_mobility,
    transmission_radius,
)

WORLD = WorldConfig()


def test_arrival_snaps_to_waypoint_and_pauses():
    s = MobilityState(Position(0, 0), Position(30, 0), 30.0)
    out = step_mobility(s, 1.0, WORLD, random.Random(1))
    assert out.position == Position(30, 0)
    assert out.pause_remaining == 10.0
    assert 25.0 <= out.speed <= 30.0
    assert WORLD.contains(out.waypoint)


def test_partial_move_along_segment():
    s = MobilityState(Position(0, 0), Position(60, 80), 25.0)
    out = step_mobility(s, 0.5, WORLD, random.Random(1))
    assert out.position.distance_to(Position(0, 0)) == pytest.approx(12.5)
    # still on the segment toward (60, 80)
    assert out.position.x == pytest.approx(12.5 * 0.6)
    assert out.position.y == pytest.approx(12.5 * 0.8)
    assert out.pause_remaining == 0.0


def test_paused_node_stays_put():
    s = MobilityState(Position(5, 5), Position(100, 100), 27.0, pause_remaining=10.0)
    out = step_mobility(s, 3.0, WORLD, random.Random(1))
    assert out.position == Position(5, 5)
    assert out.pause_remaining == pytest.approx(7.0)


def test_neighbors_disc_boundary():
    pos = {0: Position(0, 0), 1: Position(100, 0)}
    assert neighbors(0, pos, 250) == {1}
    assert neighbors(1, pos, 250) == {0}
    far = {0: Position(0, 0), 1: Position(251, 0)}
    assert neighbors(0, far, 250) == set()
    assert neighbors(1, far, 250) == set()
    edge = {0: Position(0, 0), 1: Position(250, 0)}
    assert neighbors(0, edge, 250) == {1}


def test_neighbors_unknown_node():
    with pytest.raises(KeyError):
        neighbors(7, {0: Position(0, 0)}, 250)


def test_neighbors_match_pairwise_oracle():
    rng = random.Random(42)
    pos = {i: Position(rng.uniform(0, 600), rng.uniform(0, 600)) for i in range(10)}
    for i in pos:
        brute = set()
        for j in pos:
            if j != i and math.dist((pos[i].x, pos[i].y), (pos[j].x, pos[j].y)) <= 250:
                brute.add(j)
        assert neighbors(i, pos, 250) == brute


@pytest.mark.parametrize(
    "args, expected",
    [((0, 0, 0, 0), 0.0), ((0, 0, 6, 8), 5.0), ((1, 1, 1, 9), 4.0)],
)
def test_transmission_radius(args, expected):
    assert transmission_radius(*args) == pytest.approx(expected)


def test_expected_neighbor_count_values():
    assert expected_neighbor_count(100, WorldConfig(1000, 1000), 0) == 0
    assert expected_neighbor_count(100, WorldConfig(1000, 1000), 250) == pytest.approx(19.63, abs=0.01)
    assert expected_neighbor_count(150, WorldConfig(1200, 1200), 250) == pytest.approx(20.45, abs=0.01)
    with pytest.raises(ValueError):
        expected_neighbor_count(10, WORLD, -1)


@pytest.mark.parametrize("n, side", [(100, 1000.0), (150, 1200.0)])
def test_expected_neighbor_count_monte_carlo(n, side):
    # count other nodes around a probe kept one radius away from the border
    rng = np.random.default_rng(7)
    r = 250.0
    trials = 4000
    others = rng.uniform(0, side, size=(trials, n - 1, 2))
    probe = rng.uniform(r, side - r, size=(trials, 1, 2))
    counts = (np.sum((others - probe) ** 2, axis=2) <= r * r).sum(axis=1)
    # density of the other n-1 nodes, scaled back to n
    empirical = counts.mean() * n / (n - 1)
    assert empirical == pytest.approx(expected_neighbor_count(n, WorldConfig(side, side), r), abs=0.5)


def test_expected_path_distance():
    assert expected_path_distance(1, 200) == 200
    assert expected_path_distance(4, 150) == 600
    with pytest.raises(ValueError):
        expected_path_distance(0, 100)


def test_world_validation():
    assert WorldConfig().validate() == []
    assert WorldConfig(node_count=1).validate()
    assert WorldConfig(radio_range=0).validate()
    assert WorldConfig(area_width=-1).validate()


coords = st.floats(0, 1200, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.floats(0.01, 5.0), min_size=1, max_size=40))
def test_mobility_stays_in_bounds(seed, dts):
    rng = random.Random(seed)
    s = initial_mobility(WORLD, rng)
    for dt in dts:
        s = step_mobility(s, dt, WORLD, rng)
        assert WORLD.contains(s.position)
        assert s.pause_remaining >= 0
        if s.pause_remaining == 0:
            assert 25.0 <= s.speed <= 30.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.01, 3.0))
def test_step_is_deterministic(seed, dt):
    s = initial_mobility(WORLD, random.Random(seed))
    a = step_mobility(s, dt, WORLD, random.Random(seed + 1))
    b = step_mobility(s, dt, WORLD, random.Random(seed + 1))
    assert a == b


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=2, max_size=25), st.floats(1, 600))
def test_neighbor_relation_symmetric_irreflexive(points, r):
    pos = {i: Position(x, y) for i, (x, y) in enumerate(points)}
    nb = {i: neighbors(i, pos, r) for i in pos}
    for i, ns in nb.items():
        assert i not in ns
        for j in ns:
            assert i in nb[j]


def test_field_matches_scalar_model():
    n = 12
    world = WorldConfig(400, 300, 100, n)
    states = [initial_mobility(world, random.Random(f"init:{i}")) for i in range(n)]
    scalar_rngs = [random.Random(f"walk:{i}") for i in range(n)]
    field_ = MobilityField(states, world, [random.Random(f"walk:{i}") for i in range(n)])
    scalar = list(states)
    for _ in range(300):
        field_.step(0.1)
        scalar = [step_mobility(s, 0.1, world, scalar_rngs[i]) for i, s in enumerate(scalar)]
    for i in range(n):
        got = field_.state(i)
        assert got.position.x == pytest.approx(scalar[i].position.x)
        assert got.position.y == pytest.approx(scalar[i].position.y)
        assert got.pause_remaining == pytest.approx(scalar[i].pause_remaining)
    adj = field_.adjacency(100.0)
    positions = {i: field_.state(i).position for i in range(n)}
    for i in range(n):
        assert set(np.flatnonzero(adj[i]).tolist()) == neighbors(i, positions, 100.0)
