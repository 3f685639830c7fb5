"""Attack-node identification.

Degree-ratio screening over the neighbour graph, two sliding windows over
eavesdropped route replies, forwarding supervision, a trust ledger with a
local blacklist, and the analytic misbehaviour/secure-path probabilities.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class DetectionError(ValueError):
    pass


class Observation(str, enum.Enum):
    FORWARDED = "forwarded"
    VIOLATED = "violated"
    ANOMALY = "anomaly"
    TNR_SUSPECT = "tnr_suspect"


class Verdict(str, enum.Enum):
    NORMAL = "normal"
    SUSPICIOUS = "suspicious"


@dataclass(frozen=True)
class DetectionParams:
    tnr_threshold: float = 1.5
    window_capacity: int = 8
    delta_threshold: int = 100
    min_hits: int = 3
    reward: float = 0.05
    penalty: float = 0.2
    blacklist_threshold: float = 0.2
    initial_trust: float = 0.5
    quarantine_period: float = 50.0
    probation_trust: float = 0.3
    detection_interval: float = 5.0
    energy_threshold: float = 0.5
    slack_factor: float = 2.0
    base_link_delay: float = 0.005

    def validate(self) -> list[str]:
        errors = []
        for name in ("reward", "penalty", "blacklist_threshold", "initial_trust", "probation_trust"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                errors.append(f"{name} must lie in [0, 1]")
        if self.window_capacity < 1:
            errors.append("window_capacity must be >= 1")
        if self.min_hits < 1:
            errors.append("min_hits must be >= 1")
        if self.tnr_threshold <= 0:
            errors.append("tnr_threshold must be > 0")
        for name in ("quarantine_period", "detection_interval", "base_link_delay"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} must be > 0")
        if self.slack_factor < 1:
            errors.append("slack_factor must be >= 1")
        if self.energy_threshold < 0:
            errors.append("energy_threshold must be >= 0")
        return errors


# --------------------------------------------------------------------------
# neighbour ratio

@dataclass(frozen=True)
class NeighborStats:
    node: int
    own_degree: int
    neighbor_degrees: tuple[int, ...]
    ratio: float


def neighbor_ratio(own_degree: int, neighbor_degrees: Sequence[int]) -> float:
    """Own degree over the mean degree of the neighbours (0 when isolated)."""
    if own_degree < 0 or any(d < 0 for d in neighbor_degrees):
        raise DetectionError("degrees must be non-negative")
    if own_degree == 0:
        return 0.0
    total = sum(neighbor_degrees)
    if total == 0:
        return 0.0
    return own_degree / (total / own_degree)


def neighbor_stats(adjacency: Mapping[int, Iterable[int]]) -> dict[int, NeighborStats]:
    degree = {n: len(set(nbrs)) for n, nbrs in adjacency.items()}
    out = {}
    for n, nbrs in adjacency.items():
        nd = tuple(degree[k] for k in sorted(set(nbrs)))
        out[n] = NeighborStats(n, degree[n], nd, neighbor_ratio(degree[n], nd))
    return out


def tnr_scan(adjacency: Mapping[int, Iterable[int]], threshold: float) -> set[int]:
    """Nodes whose neighbour ratio exceeds ``threshold``."""
    adj = {n: set(nbrs) for n, nbrs in adjacency.items()}
    for n, nbrs in adj.items():
        if n in nbrs:
            raise DetectionError(f"self-loop at {n}")
        for k in nbrs:
            if n not in adj.get(k, ()):
                raise DetectionError(f"asymmetric adjacency: {n}->{k} without {k}->{n}")
    return {n for n, st in neighbor_stats(adj).items() if st.ratio > threshold}


def tnr_scan_matrix(adj, threshold: float) -> list[int]:
    """Vectorised :func:`tnr_scan` for a symmetric boolean numpy matrix."""
    import numpy as np

    deg = adj.sum(axis=1)
    nsum = adj.astype(np.int64) @ deg
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(nsum > 0, deg * deg / np.maximum(nsum, 1), 0.0)
    return [int(i) for i in np.flatnonzero(ratio > threshold)]


# --------------------------------------------------------------------------
# sliding windows

@dataclass(frozen=True)
class ReplySummary:
    """What an eavesdropper learns from one route reply."""

    peer: int
    seq_no: int
    request_seq: int | None = None


@dataclass
class SlidingWindows:
    capacity: int = 8
    sl1: deque = field(default_factory=deque)
    sl2: deque = field(default_factory=deque)

    def __post_init__(self):
        self.sl1 = deque(self.sl1, maxlen=self.capacity)
        self.sl2 = deque(self.sl2, maxlen=self.capacity)


def record_overheard(
    windows: SlidingWindows, msg: ReplySummary, clock: float, local_density: int
) -> SlidingWindows:
    """Append one overheard reply; matched request/reply pairs also go to SL2."""
    windows.sl1.append((msg.peer, clock, local_density, msg.seq_no))
    if msg.request_seq is not None:
        windows.sl2.append((msg.peer, clock, msg.seq_no - msg.request_seq))
    return windows


def detect_sequence_anomaly(
    windows: SlidingWindows, delta_threshold: int = 100, min_hits: int = 3
) -> dict[int, Verdict]:
    hits: dict[int, int] = {}
    for peer, _, delta in windows.sl2:
        hits.setdefault(peer, 0)
        if delta > delta_threshold:
            hits[peer] += 1
    return {p: Verdict.SUSPICIOUS if h >= min_hits else Verdict.NORMAL for p, h in hits.items()}


# --------------------------------------------------------------------------
# supervision and trust

def monitor_forwarding(
    peer: int, handed_at: float, overheard_relay_at: float | None, deadline: float
) -> Observation:
    if deadline <= 0:
        raise DetectionError("deadline must be > 0")
    if overheard_relay_at is not None and overheard_relay_at <= handed_at + deadline:
        return Observation.FORWARDED
    return Observation.VIOLATED


@dataclass
class TrustRecord:
    peer: int
    trust: float = 0.5
    blacklisted: bool = False
    last_update: float = 0.0
    blacklisted_at: float = 0.0


def update_trust(
    record: TrustRecord,
    observation: Observation,
    params: DetectionParams = DetectionParams(),
    clock: float | None = None,
) -> TrustRecord:
    """Apply one observation and return the updated record.

    A blacklisted peer stays blacklisted for the quarantine period; during it
    only penalties are applied. Once the period has elapsed the record comes
    back on probation before the observation is applied.
    """
    now = record.last_update if clock is None else clock
    trust, black, since = record.trust, record.blacklisted, record.blacklisted_at
    if black and now - since >= params.quarantine_period:
        trust, black = params.probation_trust, False
    if observation is Observation.FORWARDED:
        if not black:
            trust = min(1.0, trust + params.reward)
    else:
        trust = max(0.0, trust - params.penalty)
    if not black and trust < params.blacklist_threshold:
        black, since = True, now
    return TrustRecord(record.peer, trust, black, now, since)


class TrustStore:
    """One observer's trust records and its local blacklist."""

    def __init__(self, owner: int, params: DetectionParams = DetectionParams()):
        self.owner = owner
        self.params = params
        self.records: dict[int, TrustRecord] = {}
        self.blacklist: set[int] = set()
        self.windows = SlidingWindows(params.window_capacity)
        # peers whose anomaly evidence has already been charged once
        self._charged: set[int] = set()

    def record(self, peer: int) -> TrustRecord:
        rec = self.records.get(peer)
        if rec is None:
            rec = self.records[peer] = TrustRecord(peer, self.params.initial_trust)
        return rec

    def observe(self, peer: int, observation: Observation, clock: float) -> TrustRecord:
        """Update trust; returns the new record (caller inspects transitions)."""
        rec = update_trust(self.record(peer), observation, self.params, clock)
        self.records[peer] = rec
        if rec.blacklisted:
            self.blacklist.add(peer)
        else:
            self.blacklist.discard(peer)
        return rec

    def expire(self, clock: float) -> list[int]:
        """Release peers whose quarantine has run out; returns them."""
        if not self.blacklist:
            return []
        released = []
        q = self.params.quarantine_period
        for peer in sorted(self.blacklist):
            rec = self.records[peer]
            if clock - rec.blacklisted_at >= q:
                self.records[peer] = TrustRecord(peer, self.params.probation_trust, False, clock)
                released.append(peer)
        self.blacklist.difference_update(released)
        return released

    def overhear_reply(
        self, msg: ReplySummary, clock: float, local_density: int
    ) -> list[TrustRecord]:
        """Record a reply and turn fresh anomaly evidence into penalties.

        The reply that first pushes a peer over the evidence floor charges one
        anomaly per offending SL2 entry; every later offending reply charges
        one more.
        """
        p = self.params
        record_overheard(self.windows, msg, clock, local_density)
        if msg.request_seq is None or msg.seq_no - msg.request_seq <= p.delta_threshold:
            return []
        verdicts = detect_sequence_anomaly(self.windows, p.delta_threshold, p.min_hits)
        if verdicts.get(msg.peer) is not Verdict.SUSPICIOUS:
            return []
        if msg.peer in self._charged:
            count = 1
        else:
            count = sum(
                1 for peer, _, d in self.windows.sl2 if peer == msg.peer and d > p.delta_threshold
            )
        self._charged.add(msg.peer)
        return [self.observe(msg.peer, Observation.ANOMALY, clock) for _ in range(count)]


# --------------------------------------------------------------------------
# energy admission and analytics

def energy_admission(residual: float, threshold: float = 0.5) -> bool:
    if residual < 0:
        raise DetectionError("residual energy cannot be negative")
    return residual >= threshold


@dataclass(frozen=True)
class SecurityAnalytics:
    Nm: int
    Nn: int
    h: float = 1.0


def _check_counts(Nm: int, Nn: int) -> None:
    if Nn <= 0:
        raise DetectionError("Nn must be > 0")
    if not 0 <= Nm <= Nn:
        raise DetectionError("need 0 <= Nm <= Nn")


def prob_misbehaving(Nm: int, Nn: int) -> float:
    _check_counts(Nm, Nn)
    return Nm / Nn


def prob_secure_path(Nm: int, Nn: int, h: float) -> float:
    """Chance that none of the ``h - 1`` intermediate nodes misbehaves."""
    _check_counts(Nm, Nn)
    if h < 1:
        raise DetectionError("h must be >= 1")
    return (1.0 - Nm / Nn) ** (h - 1)
