"""AODV-style discovery and forwarding with fitness-based route choice."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

DATA_PACKET_SIZE = 512
CONTROL_PACKET_SIZE = 64
DEFAULT_ROUTE_LIFETIME = 3.0
DEFAULT_SLACK_FACTOR = 2.0


class RoutingError(Exception):
    pass


class InvalidRequest(RoutingError):
    pass


class NoRoute(RoutingError):
    pass


class PacketKind(str, enum.Enum):
    ROUTE_REQUEST = "rreq"
    ROUTE_REPLY = "rrep"
    DATA = "data"
    ACK = "ack"


@dataclass
class Packet:
    """A frame on the air.

    For route requests ``seq_no`` is the originator's own counter and
    ``dest_seq_no`` the freshest sequence number it knows for ``target``.
    For route replies ``origin`` is the destination the route leads to,
    ``replier`` the node that generated the reply and ``seq_no`` the
    advertised destination sequence number.
    """

    kind: PacketKind
    origin: int
    target: int
    hop_count: int = 0
    seq_no: int = 0
    request_id: int = 0
    payload_size: int = CONTROL_PACKET_SIZE
    created_at: float = 0.0
    dest_seq_no: int = 0
    replier: int = -1
    path_energy: float = 1.0
    path_capacity: float = 1.0
    uid: int = -1

    @property
    def bits(self) -> int:
        return self.payload_size * 8


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq_no: int
    fitness: float
    expires_at: float

    def live(self, clock: float) -> bool:
        return clock < self.expires_at


@dataclass
class RoutingTable:
    """Per-node routing state: routes, own sequence counter, seen requests."""

    owner: int
    seq_no: int = 0
    next_request_id: int = 0
    routes: dict[int, RouteEntry] = field(default_factory=dict)
    seen: set[tuple[int, int]] = field(default_factory=set)
    # freshest destination sequence number ever learned, per destination
    known_seq: dict[int, int] = field(default_factory=dict)
    protocol_errors: int = 0

    def lookup(self, dest: int, clock: float, blacklist: Iterable[int] = ()) -> RouteEntry | None:
        entry = self.routes.get(dest)
        if entry is None or not entry.live(clock) or entry.next_hop in blacklist:
            return None
        return entry

    def install(self, entry: RouteEntry) -> None:
        self.routes[entry.destination] = entry
        if entry.dest_seq_no > self.known_seq.get(entry.destination, -1):
            self.known_seq[entry.destination] = entry.dest_seq_no

    def invalidate(self, dest: int) -> None:
        self.routes.pop(dest, None)

    def invalidate_via(self, next_hop: int) -> list[int]:
        gone = [d for d, e in self.routes.items() if e.next_hop == next_hop]
        for d in gone:
            del self.routes[d]
        return gone


@dataclass(frozen=True)
class FitnessInputs:
    Eg: float
    tp: float
    Pc: float = 1.0
    path_length: int = 2
    link_costs: Sequence[float] = ()


@dataclass(frozen=True)
class LoadState:
    queued_packets: int = 0
    base_link_delay: float = 0.005
    arrival_rate: float = 0.0


class RequestAction(str, enum.Enum):
    REBROADCAST = "rebroadcast"
    REPLY = "reply"
    DROP = "drop"


class ForwardAction(str, enum.Enum):
    SEND = "send"
    DELIVER = "deliver"
    DROP_NO_ROUTE = "drop-no-route"


def originate_route_request(
    source: int,
    dest: int,
    table: RoutingTable,
    clock: float,
    blacklist: Iterable[int] = (),
) -> Packet | RouteEntry:
    """Return a usable cached route, or a fresh route request to flood."""
    if source == dest:
        raise InvalidRequest(f"node {source} cannot request a route to itself")
    cached = table.lookup(dest, clock, blacklist)
    if cached is not None:
        return cached
    table.seq_no += 1
    table.next_request_id += 1
    req = Packet(
        PacketKind.ROUTE_REQUEST,
        origin=source,
        target=dest,
        hop_count=0,
        seq_no=table.seq_no,
        request_id=table.next_request_id,
        created_at=clock,
        dest_seq_no=table.known_seq.get(dest, 0),
    )
    table.seen.add((source, req.request_id))
    return req


def handle_route_request(
    req: Packet,
    me: int,
    table: RoutingTable,
    blacklist: Iterable[int] = (),
    sender: int | None = None,
    clock: float = 0.0,
    route_lifetime: float = DEFAULT_ROUTE_LIFETIME,
) -> tuple[RequestAction, Packet | None]:
    """Process a route request heard from ``sender``.

    ``req.hop_count`` is the number of transmissions the request has made, so
    it is also this node's distance back to the originator. Duplicate
    suppression runs before anything else; requests relayed by blacklisted
    senders leave no trace in the table.
    """
    if req.kind is not PacketKind.ROUTE_REQUEST or req.hop_count < 1 or req.origin == me:
        table.protocol_errors += req.origin != me
        return RequestAction.DROP, None
    sender = req.origin if sender is None else sender
    key = (req.origin, req.request_id)
    if key in table.seen:
        return RequestAction.DROP, None
    if sender in blacklist:
        return RequestAction.DROP, None
    table.seen.add(key)
    rev = table.routes.get(req.origin)
    if rev is None or rev.dest_seq_no < req.seq_no or (
        rev.dest_seq_no == req.seq_no and req.hop_count < rev.hop_count
    ) or not rev.live(clock):
        table.install(
            RouteEntry(req.origin, sender, req.hop_count, req.seq_no, 0.0, clock + route_lifetime)
        )
    if me == req.target:
        table.seq_no = max(table.seq_no, req.dest_seq_no) + 1
        reply = Packet(
            PacketKind.ROUTE_REPLY,
            origin=me,
            target=req.origin,
            hop_count=0,
            seq_no=table.seq_no,
            request_id=req.request_id,
            created_at=clock,
            replier=me,
        )
        return RequestAction.REPLY, reply
    return RequestAction.REBROADCAST, None


def path_connectivity(link_costs: Sequence[float]) -> float:
    """Reciprocal of the summed link cost, clamped into [0, 1]."""
    if not link_costs:
        raise ValueError("a path needs at least one link")
    if any(c <= 0 for c in link_costs):
        raise ValueError("link costs must be positive")
    return min(1.0, 1.0 / sum(link_costs))


def compute_fitness(inputs: FitnessInputs) -> float:
    """Mean of normalised energy, capacity and connectivity.

    When ``link_costs`` are given they define the connectivity term and must
    cover ``path_length - 1`` links; otherwise ``Pc`` is taken as supplied.
    """
    pc = inputs.Pc
    if inputs.link_costs:
        if len(inputs.link_costs) != inputs.path_length - 1:
            raise ValueError("need exactly path_length - 1 link costs")
        pc = path_connectivity(inputs.link_costs)
    for name, value in (("Eg", inputs.Eg), ("tp", inputs.tp), ("Pc", pc)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name}={value} outside [0, 1]")
    return (inputs.Eg + inputs.tp + pc) / 3.0


def route_fitness(hop_count: int, path_energy: float, path_capacity: float = 1.0) -> float:
    """Fitness of a route with unit link costs over ``hop_count`` links."""
    return compute_fitness(
        FitnessInputs(
            Eg=min(1.0, max(0.0, path_energy)),
            tp=min(1.0, max(0.0, path_capacity)),
            path_length=hop_count + 1,
            link_costs=(1.0,) * hop_count,
        )
    )


def _preference(entry: RouteEntry) -> tuple:
    return (entry.fitness, entry.dest_seq_no, -entry.hop_count, -entry.next_hop)


def select_route(candidates: Sequence[RouteEntry], blacklist: Iterable[int] = ()) -> RouteEntry:
    """Best non-blacklisted candidate by fitness.

    Ties go to the higher destination sequence number, then fewer hops, then
    the lower next-hop id.
    """
    if not candidates:
        raise NoRoute("no candidate routes")
    banned = set(blacklist)
    alive = [c for c in candidates if c.next_hop not in banned]
    if not alive:
        raise NoRoute("every candidate goes through a blacklisted node")
    return max(alive, key=_preference)


def select_route_aodv(candidates: Sequence[RouteEntry]) -> RouteEntry:
    """Plain AODV preference: freshest sequence number, then fewest hops."""
    if not candidates:
        raise NoRoute("no candidate routes")
    return max(candidates, key=lambda e: (e.dest_seq_no, -e.hop_count, -e.next_hop))


def forward_deadline(
    pkt: Packet, load: LoadState, slack_factor: float = DEFAULT_SLACK_FACTOR
) -> float:
    """Time a neighbour may hold ``pkt`` before it counts as a delay suspect."""
    if load.queued_packets < 0 or load.base_link_delay <= 0:
        raise ValueError(f"invalid load state {load}")
    return load.base_link_delay * (1 + load.queued_packets) * max(1.0, slack_factor)


def forward_data(
    pkt: Packet,
    me: int,
    table: RoutingTable,
    clock: float = 0.0,
    blacklist: Iterable[int] = (),
) -> tuple[ForwardAction, int | None]:
    if pkt.kind is not PacketKind.DATA:
        raise RoutingError("forward_data only handles data packets")
    if me == pkt.target:
        return ForwardAction.DELIVER, None
    entry = table.lookup(pkt.target, clock, blacklist)
    if entry is None:
        return ForwardAction.DROP_NO_ROUTE, None
    return ForwardAction.SEND, entry.next_hop


def refreshed(entry: RouteEntry, clock: float, lifetime: float = DEFAULT_ROUTE_LIFETIME) -> RouteEntry:
    return replace(entry, expires_at=max(entry.expires_at, clock + lifetime))
