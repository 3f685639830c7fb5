from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import log_audit
from sra_manet.adversary import Role
from sra_manet.engine import (
    ConfigError,
    EnergyAction,
    EnergyCosts,
    EnergyLedger,
    EventKind,
    EventQueue,
    ScenarioConfig,
    Simulator,
    charge_energy,
    generate_traffic,
    run,
)
from sra_manet.routing import Packet, PacketKind
from sra_manet.topology import WorldConfig

SMALL = ScenarioConfig(seed=1, world=WorldConfig(500, 500, 250, 12), sim_time=40.0)


# -- queue ---------------------------------------------------------------------

@given(st.lists(st.floats(0, 100), max_size=60))
def test_queue_pops_in_time_then_insertion_order(times):
    q = EventQueue()
    for i, t in enumerate(times):
        q.push(t, EventKind.TIMER, i)
    out = [q.pop() for _ in range(len(times))]
    keys = [(e.time, e.tie_seq) for e in out]
    assert keys == sorted(keys)
    assert len({e.tie_seq for e in out}) == len(out)


# -- energy ----------------------------------------------------------------------

def test_charge_energy_examples():
    led = EnergyLedger({0: 100.0, 1: 0.01})
    charge_energy(led, 0, EnergyAction.TRANSMIT, 512)
    assert led.residual(0) == pytest.approx(99.98)
    charge_energy(led, 1, EnergyAction.TRANSMIT, 512)
    assert led.residual(1) == 0 and not led.alive(1)
    charge_energy(led, 0, EnergyAction.IDLE_TICK)
    assert led.residual(0) == pytest.approx(99.98)
    with pytest.raises(KeyError):
        charge_energy(led, 7, EnergyAction.RECEIVE)
    assert led.consumed_uj() == 20_000 + 10_000


@given(st.lists(st.tuples(st.integers(0, 2), st.sampled_from(list(EnergyAction))), max_size=200))
def test_ledger_bounds_and_conservation(actions):
    led = EnergyLedger({0: 1.0, 1: 0.05, 2: 100.0})
    costs = EnergyCosts(0.02, 0.01, 0.001)
    for node, act in actions:
        charge_energy(led, node, act, costs=costs)
        for n in (0, 1, 2):
            assert 0 <= led.residual_uj[n] <= led.initial_uj[n]
    assert led.consumed_uj() == led.charged_uj


# -- traffic ------------------------------------------------------------------------

def test_generate_traffic_period():
    assert generate_traffic((0, 1, 4.0), 0.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        generate_traffic((2, 2, 4.0), 0.0)
    with pytest.raises(ValueError):
        generate_traffic((0, 1, 0.0), 0.0)


def test_rate_times_duration_packets_sent():
    cfg = ScenarioConfig(seed=0, world=WorldConfig(100, 100, 250, 2), traffic_rate=4.0)
    res = run(cfg)
    assert res.sent == 2800


# -- radio ----------------------------------------------------------------------------

def _placed(points, **kw):
    n = len(points)
    cfg = ScenarioConfig(seed=3, world=WorldConfig(1000, 1000, 250, n), **kw)
    sim = Simulator(cfg)
    sim.mobility.pos[:] = np.array(points, dtype=float)
    sim.mobility.wp[:] = sim.mobility.pos
    sim._adj = None
    return sim


def test_transmission_time_of_data_frame():
    sim = _placed([(0, 0), (100, 0)])
    pkt = Packet(PacketKind.DATA, 0, 1, payload_size=512)
    assert sim.transmission_time(pkt) == pytest.approx(2.048e-3)


def test_broadcast_fan_out():
    sim = _placed([(0, 0), (100, 0), (0, 100), (100, 100), (900, 900)])
    req = Packet(PacketKind.ROUTE_REQUEST, 0, 4)
    assert sim.broadcast(0, req) == 3
    assert len(sim.queue) == 3
    assert sorted(ev.subject for ev in sim.queue._heap) == [1, 2, 3]
    assert sim.broadcast(4, Packet(PacketKind.ROUTE_REQUEST, 4, 0)) == 0
    assert len(sim.queue) == 3
    for ev in sim.queue._heap:
        assert 0 < ev.time - 64 * 8 / 2e6 <= sim.cfg.jitter


def test_dead_sender_is_a_logged_noop():
    sim = _placed([(0, 0), (100, 0)])
    sim.ledger.residual_uj[0] = 0
    assert sim.broadcast(0, Packet(PacketKind.ROUTE_REQUEST, 0, 1)) == 0
    assert "reason=dead-sender" in sim.log.lines[-1]


# -- whole runs ------------------------------------------------------------------------

def test_two_nodes_in_range_deliver_everything():
    cfg = ScenarioConfig(seed=5, world=WorldConfig(100, 100, 250, 2), sim_time=30.0)
    rep = run(cfg).report
    assert rep.sent == 60
    assert rep.pdr == 1.0


def test_identical_config_identical_log():
    a, b = run(SMALL), run(SMALL)
    assert a.log.text() == b.log.text()
    assert a.log.digest() == b.log.digest()
    assert run(replace(SMALL, seed=2)).log.digest() != a.log.digest()


def test_blackhole_on_only_path_costs_packets():
    # src - attacker - dst in a line, nothing else can relay
    cfg = ScenarioConfig(
        seed=4, world=WorldConfig(1000, 1000, 250, 3), sim_time=20.0,
        speed_min=1e-9, speed_max=1e-9, attack_fraction=0.34, detection_enabled=False,
    )
    sim = Simulator(cfg)
    (src, dst), = sim.flows
    bad = next(i for i, r in sim.roles.items() if r is Role.ATTACKER)
    place = {src: (100, 500), bad: (300, 500), dst: (500, 500)}
    for i, p in place.items():
        sim.mobility.pos[i] = p
        sim.mobility.wp[i] = p
    res = sim.run()
    assert res.report.pdr < 1.0
    drops = [line for line in res.log.lines if ",drop," in line and "reason=attack" in line]
    assert drops and all("truth=attacker" in line for line in drops)


def test_invalid_config_lists_fields():
    bad = ScenarioConfig(seed=-1, world=WorldConfig(node_count=1), traffic_rate=0)
    with pytest.raises(ConfigError) as exc:
        bad.validated()
    text = " ".join(exc.value.errors)
    assert "seed" in text and "node_count" in text and "traffic_rate" in text


def _check_run(res):
    lines = res.log.lines
    assert log_audit.times_non_decreasing(lines)
    assert log_audit.logged_energy_uj(lines) == res.ledger.consumed_uj()
    assert log_audit.untraced_deliveries(lines) == []
    assert log_audit.blacklisted_data_sends(lines) == []
    roles = log_audit.logged_roles(lines)
    assert roles == {n: r.value for n, r in res.roles.items()}
    rep = res.report
    assert rep.pdr * rep.sent == pytest.approx(rep.received, abs=0)
    emitted, delivered = log_audit.counts(lines, res.config.sim_time)
    assert (emitted, delivered) == (rep.sent, rep.received)
    for n in res.roles:
        assert 0 <= res.ledger.residual_uj[n] <= res.ledger.initial_uj[n]


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    seed=st.integers(0, 10_000),
    nodes=st.integers(6, 20),
    fraction=st.sampled_from([0.0, 0.2, 0.4]),
    detection=st.booleans(),
    idle=st.sampled_from([0.0, 0.001]),
)
def test_run_accounting_invariants(seed, nodes, fraction, detection, idle):
    cfg = ScenarioConfig(
        seed=seed, world=WorldConfig(600, 600, 250, nodes), sim_time=30.0,
        attack_fraction=fraction, detection_enabled=detection,
        energy=EnergyCosts(idle=idle),
    )
    _check_run(run(cfg))


def test_energy_exhaustion_keeps_accounting_exact():
    cfg = replace(SMALL, initial_energy=0.5, traffic_rate=8.0, attack_fraction=0.2)
    res = run(cfg)
    assert any(",dead," in line for line in res.log.lines)
    _check_run(res)
