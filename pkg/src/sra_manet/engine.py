"""Deterministic discrete-event core.

One scenario is one single-threaded event loop. Every source of randomness
is a ``random.Random`` derived from the scenario seed, events pop in strict
``(time, tie_seq)`` order, and everything observable is written to a
line-oriented :class:`EventLog` whose digest is a pure function of the
configuration.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from .adversary import (
    AttackKind,
    AttackProfile,
    AttackerState,
    DataAction,
    FORGING_KINDS,
    Role,
    attacker_handle_data,
    attacker_handle_route_request,
    seed_attackers,
)
from .detection import (
    DetectionParams,
    Observation,
    ReplySummary,
    TrustStore,
    energy_admission,
    monitor_forwarding,
    tnr_scan_matrix,
)
from .routing import (
    ForwardAction,
    LoadState,
    Packet,
    PacketKind,
    RequestAction,
    RouteEntry,
    RoutingTable,
    forward_data,
    forward_deadline,
    handle_route_request,
    originate_route_request,
    route_fitness,
    select_route,
    select_route_aodv,
)
from .topology import MobilityField, WorldConfig, initial_mobility

MAX_BACKOFF_EXPONENT = 4
UJ = 1_000_000  # micro-joules per joule; the ledger is integer so sums are exact


class ConfigError(ValueError):
    """Scenario validation failure; ``errors`` lists every offending field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class EventKind(str, enum.Enum):
    MOBILITY_TICK = "mobility-tick"
    PACKET_ARRIVAL = "packet-arrival"
    TIMER = "timer"
    TRAFFIC_EMIT = "traffic-emit"
    DETECTION_SCAN = "detection-scan"


class Event(NamedTuple):
    time: float
    tie_seq: int
    kind: EventKind
    subject: int
    payload: object = None


class EventQueue:
    def __init__(self):
        self._heap: list[Event] = []
        self._tie = 0

    def push(self, time: float, kind: EventKind, subject: int, payload: object = None) -> Event:
        ev = Event(time, self._tie, kind, subject, payload)
        self._tie += 1
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def peek_time(self) -> float:
        return self._heap[0].time

    def __len__(self) -> int:
        return len(self._heap)


# --------------------------------------------------------------------------
# energy

class EnergyAction(str, enum.Enum):
    TRANSMIT = "transmit"
    RECEIVE = "receive"
    IDLE_TICK = "idle-tick"


@dataclass(frozen=True)
class EnergyCosts:
    """Joules per packet (or per mobility tick for idle)."""

    transmit: float = 0.02
    receive: float = 0.01
    idle: float = 0.0

    def micro(self, action: EnergyAction) -> int:
        value = {
            EnergyAction.TRANSMIT: self.transmit,
            EnergyAction.RECEIVE: self.receive,
            EnergyAction.IDLE_TICK: self.idle,
        }[action]
        return round(value * UJ)


class EnergyLedger:
    """Initial and residual energy per node, held in integer micro-joules."""

    def __init__(self, initial: dict[int, float]):
        self.initial_uj = {n: round(j * UJ) for n, j in initial.items()}
        self.residual_uj = dict(self.initial_uj)
        self.charged_uj = 0

    def initial(self, node: int) -> float:
        return self.initial_uj[node] / UJ

    def residual(self, node: int) -> float:
        return self.residual_uj[node] / UJ

    def alive(self, node: int) -> bool:
        return self.residual_uj[node] > 0

    def charge(self, node: int, cost_uj: int) -> int:
        """Deduct up to ``cost_uj``; returns what was actually taken."""
        have = self.residual_uj[node]  # KeyError for unknown nodes
        taken = min(have, cost_uj)
        self.residual_uj[node] = have - taken
        self.charged_uj += taken
        return taken

    def consumed_uj(self) -> int:
        return sum(self.initial_uj[n] - self.residual_uj[n] for n in self.initial_uj)


def charge_energy(
    ledger: EnergyLedger,
    node: int,
    action: EnergyAction,
    size: int = 0,
    costs: EnergyCosts = EnergyCosts(),
) -> EnergyLedger:
    """Charge one action to ``node``; residual is floored at zero.

    Costs are per packet, so ``size`` does not change the amount.
    """
    if node not in ledger.residual_uj:
        raise KeyError(f"unknown node {node}")
    ledger.charge(node, costs.micro(action))
    return ledger


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    world: WorldConfig = WorldConfig()
    sim_time: float = 700.0
    bandwidth: float = 2e6
    packet_size: int = 512
    speed_min: float = 25.0
    speed_max: float = 30.0
    pause_time: float = 10.0
    mobility_tick: float = 0.1
    traffic_rate: float = 2.0
    flows: int = 1
    attack: AttackProfile = AttackProfile()
    attack_fraction: float = 0.0
    detection_enabled: bool = True
    detection: DetectionParams = DetectionParams()
    initial_energy: float = 100.0
    energy: EnergyCosts = EnergyCosts()
    route_lifetime: float = 3.0
    discovery_timeout: float = 0.5
    buffer_timeout: float = 3.0
    buffer_size: int = 64
    drain_time: float = 2.0
    jitter: float = 1e-4

    @property
    def node_count(self) -> int:
        return self.world.node_count

    def validate(self) -> list[str]:
        errors = list(self.world.validate())
        if self.seed is None or not isinstance(self.seed, int) or self.seed < 0:
            errors.append("seed must be a non-negative integer")
        if not 2 <= self.world.node_count <= 1000:
            errors.append("node_count must lie in [2, 1000]")
        positive = (
            "sim_time", "bandwidth", "packet_size", "mobility_tick", "traffic_rate",
            "route_lifetime", "discovery_timeout", "buffer_timeout", "initial_energy",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                errors.append(f"{name} must be > 0")
        if not 0 <= self.speed_min <= self.speed_max or self.speed_max <= 0:
            errors.append("speed range must satisfy 0 <= speed_min <= speed_max, speed_max > 0")
        if self.pause_time < 0:
            errors.append("pause_time must be >= 0")
        if self.flows < 1 or 2 * self.flows > self.world.node_count:
            errors.append("flows must be >= 1 with 2 distinct endpoints per flow")
        if self.buffer_size < 1:
            errors.append("buffer_size must be >= 1")
        if self.drain_time < 0 or self.jitter < 0:
            errors.append("drain_time and jitter must be >= 0")
        if not 0.0 <= self.attack_fraction <= 1.0:
            errors.append("attack_fraction must lie in [0, 1]")
        elif self.world.node_count - round(self.attack_fraction * self.world.node_count) < max(
            2, 2 * self.flows
        ):
            errors.append("attack_fraction leaves too few honest nodes for the flow endpoints")
        for name in ("transmit", "receive", "idle"):
            if getattr(self.energy, name) < 0:
                errors.append(f"energy cost {name} must be >= 0")
        errors += self.detection.validate()
        honest_deadline = self.detection.base_link_delay * self.detection.slack_factor
        errors += self.attack.validate(honest_deadline)
        return errors

    def validated(self) -> "ScenarioConfig":
        errors = self.validate()
        if errors:
            raise ConfigError(errors)
        return self


# --------------------------------------------------------------------------
# event log

class EventLog:
    """Append-only ``time,kind,subject,detail`` records."""

    def __init__(self):
        self.lines: list[str] = []

    def write(self, time: float, kind: str, subject: int, detail: str = "") -> None:
        self.lines.append(f"{time:.9f},{kind},{subject},{detail}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n" if self.lines else ""

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    def records(self, kind: str | None = None) -> Iterator[tuple[float, str, int, dict[str, str]]]:
        tag = None if kind is None else f",{kind},"
        for line in self.lines:
            if tag is not None and tag not in line:
                continue
            t, k, subj, detail = line.split(",", 3)
            if kind is not None and k != kind:
                continue
            yield float(t), k, int(subj), parse_detail(detail)

    def __len__(self) -> int:
        return len(self.lines)


def parse_detail(detail: str) -> dict[str, str]:
    out = {}
    for i, tok in enumerate(detail.split()):
        key, sep, val = tok.partition("=")
        if sep:
            out[key] = val
        else:
            out[f"_{i}"] = tok
    return out


# --------------------------------------------------------------------------
# simulation

@dataclass
class Watch:
    observer: int
    peer: int
    handed_at: float
    deadline: float
    relay_at: float | None = None
    excused: bool = False


@dataclass
class Node:
    id: int
    role: Role
    table: RoutingTable
    trust: TrustStore | None = None
    attacker: AttackerState | None = None
    buffer: deque = field(default_factory=deque)
    discovering: dict[int, int] = field(default_factory=dict)
    failures: dict[int, int] = field(default_factory=dict)
    sent_requests: set = field(default_factory=set)
    # (request origin, request id) -> destination seq carried by that request
    heard_requests: dict[tuple[int, int], int] = field(default_factory=dict)
    forwarded_replies: set = field(default_factory=set)
    open_watches: dict[int, int] = field(default_factory=dict)


@dataclass
class RunResult:
    config: ScenarioConfig
    log: EventLog
    ledger: EnergyLedger
    roles: dict[int, Role]
    flows: list[tuple[int, int]]
    sent: int
    received: int

    @property
    def report(self):
        from .metrics import compute_report

        return compute_report(self)


class Simulator:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config.validated()
        cfg = self.cfg
        self.world = cfg.world
        n = cfg.world.node_count
        self.rng = random.Random(f"{cfg.seed}:engine")
        self.queue = EventQueue()
        self.log = EventLog()
        self.now = 0.0
        self.sra = cfg.detection_enabled
        self.dp = cfg.detection
        speed_range = (cfg.speed_min, cfg.speed_max)
        rngs = [random.Random(f"{cfg.seed}:mobility:{i}") for i in range(n)]
        states = [initial_mobility(cfg.world, rngs[i], speed_range) for i in range(n)]
        self.mobility = MobilityField(states, cfg.world, rngs, speed_range, cfg.pause_time)
        self.ledger = EnergyLedger({i: cfg.initial_energy for i in range(n)})
        self._tx_uj = cfg.energy.micro(EnergyAction.TRANSMIT)
        self._rx_uj = cfg.energy.micro(EnergyAction.RECEIVE)
        self._idle_uj = cfg.energy.micro(EnergyAction.IDLE_TICK)

        traffic_rng = random.Random(f"{cfg.seed}:traffic")
        endpoints = traffic_rng.sample(range(n), 2 * cfg.flows)
        self.flows = [(endpoints[2 * k], endpoints[2 * k + 1]) for k in range(cfg.flows)]
        self.roles = seed_attackers(
            list(range(n)),
            cfg.attack_fraction,
            cfg.attack,
            random.Random(f"{cfg.seed}:attackers"),
            protected=endpoints,
        )
        self.nodes: list[Node] = []
        for i in range(n):
            node = Node(i, self.roles[i], RoutingTable(i))
            if node.role is Role.ATTACKER:
                node.attacker = AttackerState(cfg.attack.warmup, random.Random(f"{cfg.seed}:attack:{i}"))
            elif self.sra:
                node.trust = TrustStore(i, self.dp)
            self.nodes.append(node)

        self.watches: dict[int, Watch] = {}
        self.watch_index: dict[tuple[int, int], int] = {}
        self.next_watch = 0
        self.next_uid = 0
        self.sent = 0
        self.received = 0
        self._adj: np.ndarray | None = None
        self._nbrs: dict[int, list[int]] = {}
        self._alive = np.ones(n, dtype=bool)
        self._tx_time = {}

    # -- radio ----------------------------------------------------------

    def adjacency(self) -> np.ndarray:
        if self._adj is None:
            self._adj = self.mobility.adjacency(self.world.radio_range, self._alive)
            self._nbrs = {}
        return self._adj

    def neighbors_of(self, i: int) -> list[int]:
        nb = self._nbrs.get(i) if self._adj is not None else None
        if nb is None:
            nb = np.flatnonzero(self.adjacency()[i]).tolist()
            self._nbrs[i] = nb
        return nb

    def transmission_time(self, pkt: Packet) -> float:
        t = self._tx_time.get(pkt.payload_size)
        if t is None:
            t = self._tx_time[pkt.payload_size] = pkt.payload_size * 8 / self.cfg.bandwidth
        return t

    def _charge(self, node: int, cost_uj: int) -> int:
        taken = self.ledger.charge(node, cost_uj) if cost_uj else 0
        if taken and self.ledger.residual_uj[node] == 0:
            self._alive[node] = False
            self._adj = None
            self.log.write(self.now, "dead", node, f"truth={self.roles[node].value}")
        return taken

    def _describe(self, pkt: Packet) -> str:
        if pkt.kind is PacketKind.DATA:
            return f"data uid={pkt.uid} o={pkt.origin} d={pkt.target}"
        return (
            f"{pkt.kind.value} o={pkt.origin} d={pkt.target} rid={pkt.request_id} "
            f"seq={pkt.seq_no} r={pkt.replier}"
        )

    def broadcast(self, sender: int, pkt: Packet) -> int:
        """Send ``pkt`` to every current neighbour; returns arrivals scheduled."""
        if not self.ledger.alive(sender):
            self.log.write(self.now, "drop", sender, f"{self._describe(pkt)} reason=dead-sender")
            return 0
        pkt.hop_count += 1
        nbrs = self.neighbors_of(sender)
        taken = self._charge(sender, self._tx_uj)
        self.log.write(
            self.now, "tx", sender, f"{self._describe(pkt)} to=* hop={pkt.hop_count} e={taken}"
        )
        base = self.now + self.transmission_time(pkt)
        for r in nbrs:
            self.queue.push(
                base + self.rng.uniform(0.0, self.cfg.jitter),
                EventKind.PACKET_ARRIVAL, r, (sender, pkt),
            )
        return len(nbrs)

    def unicast(self, sender: int, receiver: int, pkt: Packet) -> bool:
        """Send to one neighbour. False when the link is down or sender dead."""
        if not self.ledger.alive(sender):
            self.log.write(self.now, "drop", sender, f"{self._describe(pkt)} reason=dead-sender")
            return False
        if receiver not in self.neighbors_of(sender):
            return False
        pkt = replace(pkt, hop_count=pkt.hop_count + 1)
        taken = self._charge(sender, self._tx_uj)
        self.log.write(
            self.now, "tx", sender,
            f"{self._describe(pkt)} to={receiver} hop={pkt.hop_count} e={taken}",
        )
        self.queue.push(
            self.now + self.transmission_time(pkt) + self.rng.uniform(0.0, self.cfg.jitter),
            EventKind.PACKET_ARRIVAL, receiver, (sender, pkt),
        )
        self._overhear(sender, pkt)
        return True

    def _overhear(self, sender: int, pkt: Packet) -> None:
        if not self.sra:
            return
        if pkt.kind is PacketKind.DATA:
            w = self.watches.get(self.watch_index.get((pkt.uid, sender), -1))
            if w is not None and w.relay_at is None and sender in self.neighbors_of(w.observer):
                w.relay_at = self.now
        elif pkt.kind is PacketKind.ROUTE_REPLY and pkt.replier == sender:
            density = len(self.neighbors_of(sender))
            for obs in self.neighbors_of(sender):
                node = self.nodes[obs]
                if node.trust is None:
                    continue
                req_seq = node.heard_requests.get((pkt.target, pkt.request_id))
                was = sender in node.trust.blacklist
                if node.trust.overhear_reply(ReplySummary(sender, pkt.seq_no, req_seq), self.now, density):
                    self._log_transition(obs, sender, was, Observation.ANOMALY)

    # -- trust bookkeeping ------------------------------------------------

    def _observe(self, observer: int, peer: int, obs: Observation) -> None:
        was = peer in self.nodes[observer].trust.blacklist
        self.nodes[observer].trust.observe(peer, obs, self.now)
        self._log_transition(observer, peer, was, obs)

    def _log_transition(self, observer: int, peer: int, was: bool, obs: Observation) -> None:
        store = self.nodes[observer].trust
        now_black = peer in store.blacklist
        if now_black and not was:
            rec = store.records[peer]
            self.log.write(
                self.now, "blacklist", observer,
                f"peer={peer} truth={self.roles[peer].value} cause={obs.value} trust={rec.trust:.4f}",
            )
            self.nodes[observer].table.invalidate_via(peer)
        elif was and not now_black:
            self.log.write(self.now, "release", observer, f"peer={peer}")

    def blacklist(self, node: int) -> set[int]:
        store = self.nodes[node].trust
        return store.blacklist if store is not None else set()

    # -- event handlers ---------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        for i, node in enumerate(self.nodes):
            self.log.write(0.0, "role", i, node.role.value)
        for k, (s, d) in enumerate(self.flows):
            self.log.write(0.0, "flow", s, f"dst={d} rate={cfg.traffic_rate}")
            self.queue.push(0.0, EventKind.TRAFFIC_EMIT, s, (k, 0))
        self.queue.push(cfg.mobility_tick, EventKind.MOBILITY_TICK, -1, 1)
        if self.sra:
            self.queue.push(self.dp.detection_interval, EventKind.DETECTION_SCAN, -1, 1)
        horizon = cfg.sim_time + cfg.drain_time
        handlers = {
            EventKind.MOBILITY_TICK: self._on_tick,
            EventKind.PACKET_ARRIVAL: self._on_arrival,
            EventKind.TIMER: self._on_timer,
            EventKind.TRAFFIC_EMIT: self._on_emit,
            EventKind.DETECTION_SCAN: self._on_scan,
        }
        q = self.queue
        while q and q.peek_time() <= horizon:
            ev = q.pop()
            self.now = ev.time
            handlers[ev.kind](ev)
        self.now = horizon
        for node in self.nodes:
            for _pkt, _t in node.buffer:
                self.log.write(horizon, "drop", node.id, f"data uid={_pkt.uid} reason=buffered-at-end")
            node.buffer.clear()
        return RunResult(cfg, self.log, self.ledger, dict(self.roles), list(self.flows),
                         self.sent, self.received)

    def _on_tick(self, ev: Event) -> None:
        cfg = self.cfg
        self.mobility.step(cfg.mobility_tick)
        self._adj = None
        if self._idle_uj:
            total = 0
            for i in range(len(self.nodes)):
                if self._alive[i]:
                    total += self._charge(i, self._idle_uj)
            self.log.write(self.now, "idle", -1, f"e={total}")
        k = ev.payload + 1
        self.queue.push(k * cfg.mobility_tick, EventKind.MOBILITY_TICK, -1, k)

    def _on_scan(self, ev: Event) -> None:
        adj = self.adjacency()
        for peer in tnr_scan_matrix(adj, self.dp.tnr_threshold):
            self.log.write(self.now, "tnr", peer, f"truth={self.roles[peer].value}")
            for obs in self.neighbors_of(peer):
                store = self.nodes[obs].trust
                # a degree anomaly only escalates doubt the observer already holds
                if store is not None and store.record(peer).trust < self.dp.initial_trust:
                    self._observe(obs, peer, Observation.TNR_SUSPECT)
        for node in self.nodes:
            if node.trust is not None:
                for peer in node.trust.expire(self.now):
                    self.log.write(self.now, "release", node.id, f"peer={peer}")
        k = ev.payload + 1
        self.queue.push(k * self.dp.detection_interval, EventKind.DETECTION_SCAN, -1, k)

    def _on_emit(self, ev: Event) -> None:
        cfg = self.cfg
        k, count = ev.payload
        src, dst = self.flows[k]
        if self.now < cfg.sim_time:
            pkt = Packet(
                PacketKind.DATA, origin=src, target=dst, payload_size=cfg.packet_size,
                created_at=self.now, uid=self.next_uid,
            )
            self.next_uid += 1
            self.sent += 1
            self.log.write(self.now, "emit", src, f"uid={pkt.uid} dst={dst}")
            self._originate(src, pkt)
            nxt = (count + 1) / cfg.traffic_rate
            if nxt < cfg.sim_time:
                self.queue.push(nxt, EventKind.TRAFFIC_EMIT, src, (k, count + 1))

    def _originate(self, src: int, pkt: Packet) -> None:
        node = self.nodes[src]
        dst = pkt.target
        if not self.ledger.alive(src):
            self.log.write(self.now, "drop", src, f"data uid={pkt.uid} reason=dead-source")
            return
        found = originate_route_request(src, dst, node.table, self.now, self.blacklist(src)) \
            if dst not in node.discovering else None
        if isinstance(found, RouteEntry):
            if self._send_data(src, found, pkt):
                return
            node.table.invalidate(dst)
            found = originate_route_request(src, dst, node.table, self.now, self.blacklist(src))
        self._buffer(node, pkt)
        if isinstance(found, Packet):
            self._start_discovery(node, found)

    def _buffer(self, node: Node, pkt: Packet) -> None:
        if len(node.buffer) >= self.cfg.buffer_size:
            old, _ = node.buffer.popleft()
            self.log.write(self.now, "drop", node.id, f"data uid={old.uid} reason=buffer-full")
        node.buffer.append((pkt, self.now))

    def _start_discovery(self, node: Node, req: Packet) -> None:
        node.discovering[req.target] = req.request_id
        node.heard_requests[(node.id, req.request_id)] = req.dest_seq_no
        self._broadcast_request(node.id, req)
        # binary exponential backoff across consecutive unanswered discoveries
        backoff = 2 ** min(node.failures.get(req.target, 0), MAX_BACKOFF_EXPONENT)
        self.queue.push(
            self.now + self.cfg.discovery_timeout * backoff, EventKind.TIMER, node.id,
            ("discovery", req.target, req.request_id),
        )

    def _broadcast_request(self, me: int, req: Packet) -> None:
        """Flood a request; neighbours that already sent it count this as a relay."""
        key = (req.origin, req.request_id)
        self.nodes[me].sent_requests.add(key)
        if self.broadcast(me, req) and self.sra and req.origin != me:
            for obs in self.neighbors_of(me):
                node = self.nodes[obs]
                if node.trust is not None and key in node.sent_requests:
                    self._observe(obs, me, Observation.FORWARDED)

    def _flush(self, node: Node, dst: int) -> None:
        keep = deque()
        pending = list(node.buffer)
        node.buffer.clear()
        for pkt, t in pending:
            if pkt.target != dst:
                keep.append((pkt, t))
                continue
            if self.now - t > self.cfg.buffer_timeout:
                self.log.write(self.now, "drop", node.id, f"data uid={pkt.uid} reason=buffer-timeout")
                continue
            entry = node.table.lookup(dst, self.now, self.blacklist(node.id))
            if entry is None or not self._send_data(node.id, entry, pkt):
                node.table.invalidate(dst)
                keep.append((pkt, t))
        node.buffer.extend(keep)
        if any(p.target == dst for p, _ in node.buffer) and dst not in node.discovering:
            req = originate_route_request(node.id, dst, node.table, self.now, self.blacklist(node.id))
            if isinstance(req, Packet):
                self._start_discovery(node, req)

    def _send_data(self, me: int, entry: RouteEntry, pkt: Packet) -> bool:
        """Hand a data packet to ``entry.next_hop`` and put it under watch."""
        nh = entry.next_hop
        if self.sra and not energy_admission(self.ledger.residual(nh), self.dp.energy_threshold):
            return False
        if not self.unicast(me, nh, pkt):
            return False
        entry.expires_at = max(entry.expires_at, self.now + self.cfg.route_lifetime)
        node = self.nodes[me]
        if node.trust is not None and nh != pkt.target:
            queued = node.open_watches.get(nh, 0)
            deadline = forward_deadline(
                pkt, LoadState(queued, self.dp.base_link_delay), self.dp.slack_factor
            )
            wid = self.next_watch
            self.next_watch += 1
            self.watches[wid] = Watch(me, nh, self.now, deadline)
            self.watch_index[(pkt.uid, nh)] = wid
            node.open_watches[nh] = queued + 1
            self.queue.push(self.now + deadline, EventKind.TIMER, me, ("watch", wid))
        return True

    def _on_timer(self, ev: Event) -> None:
        tag = ev.payload[0]
        if tag == "watch":
            w = self.watches.pop(ev.payload[1])
            peer = w.peer
            self.nodes[w.observer].open_watches[peer] -= 1
            if w.excused or not self.ledger.alive(w.observer):
                return
            obs = monitor_forwarding(peer, w.handed_at, w.relay_at, w.deadline)
            self._observe(w.observer, peer, obs)
        elif tag == "discovery":
            _, dst, rid = ev.payload
            node = self.nodes[ev.subject]
            if node.discovering.get(dst) != rid:
                return
            del node.discovering[dst]
            if node.table.lookup(dst, self.now, self.blacklist(node.id)) is None:
                node.failures[dst] = node.failures.get(dst, 0) + 1
            self._flush(node, dst)
        elif tag == "route-error":
            _, dst = ev.payload
            node = self.nodes[ev.subject]
            self.log.write(self.now, "rerr", ev.subject, f"d={dst}")
            node.table.invalidate(dst)
        elif tag == "delayed-relay":
            _, pkt = ev.payload
            self._relay_data(ev.subject, pkt)

    def _on_arrival(self, ev: Event) -> None:
        me = ev.subject
        sender, pkt = ev.payload
        if not self.ledger.alive(me):
            return
        taken = self._charge(me, self._rx_uj)
        kind = pkt.kind
        if kind is PacketKind.DATA:
            self.log.write(self.now, "rx", me, f"data uid={pkt.uid} from={sender} e={taken}")
            self._on_data(me, sender, pkt)
        elif kind is PacketKind.ROUTE_REQUEST:
            self.log.write(
                self.now, "rx", me,
                f"rreq o={pkt.origin} rid={pkt.request_id} from={sender} e={taken}",
            )
            self._on_request(me, sender, pkt)
        elif kind is PacketKind.ROUTE_REPLY:
            self.log.write(
                self.now, "rx", me,
                f"rrep o={pkt.origin} rid={pkt.request_id} r={pkt.replier} from={sender} e={taken}",
            )
            self._on_reply(me, sender, pkt)

    def _on_request(self, me: int, sender: int, pkt: Packet) -> None:
        node = self.nodes[me]
        key = (pkt.origin, pkt.request_id)
        if key not in node.heard_requests:
            node.heard_requests[key] = pkt.dest_seq_no
        if node.role is Role.ATTACKER and self.cfg.attack.kind in FORGING_KINDS:
            if key in node.table.seen or pkt.origin == me:
                return
            node.table.seen.add(key)
            node.table.install(
                RouteEntry(pkt.origin, sender, pkt.hop_count, pkt.seq_no, 0.0,
                           self.now + self.cfg.route_lifetime)
            )
            if pkt.target == me:
                return
            observed = max(pkt.dest_seq_no, node.table.known_seq.get(pkt.target, 0))
            reply = attacker_handle_route_request(pkt, self.cfg.attack, observed, me, self.now)
            self.unicast(me, sender, reply)
            if self.cfg.attack.kind is not AttackKind.BLACKHOLE:
                self._broadcast_request(me, replace(pkt))
            return
        bl = self.blacklist(me)
        action, reply = handle_route_request(
            pkt, me, node.table, bl, sender, self.now, self.cfg.route_lifetime
        )
        if action is RequestAction.REPLY:
            reply.path_energy = self.ledger.residual(me) / self.ledger.initial(me)
            self.unicast(me, sender, reply)
        elif action is RequestAction.REBROADCAST:
            if self.sra and not energy_admission(self.ledger.residual(me), self.dp.energy_threshold):
                return
            self._broadcast_request(me, replace(pkt))

    def _on_reply(self, me: int, sender: int, pkt: Packet) -> None:
        node = self.nodes[me]
        bl = self.blacklist(me)
        if sender in bl or pkt.replier in bl:
            self.log.write(self.now, "drop", me, f"rrep r={pkt.replier} reason=blacklisted")
            return
        dest = pkt.origin
        if dest == me:
            return
        energy = pkt.path_energy
        if node.role is Role.HONEST:
            energy = min(energy, self.ledger.residual(me) / self.ledger.initial(me))
        cand = RouteEntry(
            dest, sender, pkt.hop_count, pkt.seq_no,
            route_fitness(pkt.hop_count, energy, pkt.path_capacity),
            self.now + self.cfg.route_lifetime,
        )
        current = node.table.lookup(dest, self.now, bl)
        options = [cand] if current is None else [current, cand]
        best = select_route(options, bl) if self.sra else select_route_aodv(options)
        if best is cand:
            node.table.install(cand)
        if pkt.target == me:
            if node.discovering.get(dest) == pkt.request_id:
                del node.discovering[dest]
            node.failures.pop(dest, None)
            self._flush(node, dest)
            return
        key = (pkt.target, pkt.request_id, pkt.replier)
        if key in node.forwarded_replies:
            return
        node.forwarded_replies.add(key)
        back = node.table.lookup(pkt.target, self.now, bl)
        if back is None:
            self.log.write(self.now, "drop", me, f"rrep r={pkt.replier} reason=no-reverse-route")
            return
        fwd = replace(pkt, path_energy=energy)
        if not self.unicast(me, back.next_hop, fwd):
            self.log.write(self.now, "drop", me, f"rrep r={pkt.replier} reason=link-break")

    def _on_data(self, me: int, sender: int, pkt: Packet) -> None:
        node = self.nodes[me]
        if pkt.target == me:
            if self.now <= self.cfg.sim_time:
                self.received += 1
            self.log.write(
                self.now, "deliver", me,
                f"uid={pkt.uid} hop={pkt.hop_count} delay={self.now - pkt.created_at:.9f}",
            )
            return
        if node.role is Role.ATTACKER:
            action, hold = attacker_handle_data(pkt, self.cfg.attack, node.attacker)
            if action is DataAction.DROP:
                self.log.write(
                    self.now, "drop", me, f"data uid={pkt.uid} reason=attack truth=attacker"
                )
                return
            if action is DataAction.DELAY:
                self.queue.push(self.now + hold, EventKind.TIMER, me, ("delayed-relay", pkt))
                return
        self._relay_data(me, pkt)

    def _relay_data(self, me: int, pkt: Packet) -> None:
        node = self.nodes[me]
        action, nh = forward_data(pkt, me, node.table, self.now, self.blacklist(me))
        reason = "no-route"
        if action is ForwardAction.SEND:
            entry = node.table.routes[pkt.target]
            if self._send_data(me, entry, pkt):
                return
            node.table.invalidate(pkt.target)
            reason = "link-break"
        self.log.write(
            self.now, "drop", me,
            f"data uid={pkt.uid} reason={reason} truth={self.roles[me].value}",
        )
        # the route error is audible to the previous hop, which excuses the drop
        w = self.watches.get(self.watch_index.get((pkt.uid, me), -1))
        if w is not None:
            w.excused = True
        delay = max(1, pkt.hop_count) * (self.transmission_time(pkt) + self.cfg.jitter)
        self.queue.push(self.now + delay, EventKind.TIMER, pkt.origin, ("route-error", pkt.target))


def run(config: ScenarioConfig) -> RunResult:
    return Simulator(config).run()


def generate_traffic(flow: tuple[int, int, float], clock: float) -> float:
    """Time of the next CBR emission after ``clock`` for ``(source, dest, rate)``."""
    source, dest, rate = flow
    if rate <= 0:
        raise ValueError("rate must be > 0")
    if source == dest:
        raise ValueError("flow source and destination must differ")
    return clock + 1.0 / rate
