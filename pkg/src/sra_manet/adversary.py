"""Misbehaviour models that stand in for honest node logic."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Collection, Sequence

from .routing import Packet, PacketKind


class AdversaryConfigError(ValueError):
    pass


class AttackKind(str, enum.Enum):
    BLACKHOLE = "blackhole"
    GRAYHOLE = "grayhole"
    SEQ_INFLATION = "seq-inflation"
    DELAY = "delay"


class Role(str, enum.Enum):
    HONEST = "honest"
    ATTACKER = "attacker"


class DataAction(str, enum.Enum):
    DROP = "drop"
    DELAY = "delay"
    FORWARD = "forward"


FORGING_KINDS = frozenset({AttackKind.BLACKHOLE, AttackKind.GRAYHOLE, AttackKind.SEQ_INFLATION})


@dataclass(frozen=True)
class AttackProfile:
    kind: AttackKind = AttackKind.BLACKHOLE
    drop_probability: float = 1.0
    warmup: int = 20
    inflation_amount: int = 1000
    added_delay: float = 0.2

    def validate(self, honest_deadline: float = 0.0) -> list[str]:
        errors = []
        if not 0.0 <= self.drop_probability <= 1.0:
            errors.append("drop_probability must lie in [0, 1]")
        if self.warmup < 0:
            errors.append("warmup must be >= 0")
        if self.kind in FORGING_KINDS and self.inflation_amount <= 0:
            errors.append("inflation_amount must be > 0")
        if self.kind is AttackKind.DELAY and self.added_delay <= honest_deadline:
            errors.append("added_delay must exceed the honest forwarding deadline")
        return errors


@dataclass
class AttackerState:
    """Mutable per-attacker bookkeeping."""

    warmup_remaining: int
    rng: random.Random
    dropped: int = 0


def seed_attackers(
    node_ids: Sequence[int],
    fraction: float,
    profile: AttackProfile | None = None,
    rng: random.Random | int = 0,
    protected: Collection[int] = (),
) -> dict[int, Role]:
    """Mark ``round(fraction * n)`` nodes as attackers, never touching ``protected``.

    Python's ``round`` rounds halves to even; 50 nodes at 0.2 gives 10.
    """
    if not 0.0 <= fraction <= 1.0:
        raise AdversaryConfigError(f"attack fraction {fraction} outside [0, 1]")
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    ids = list(node_ids)
    count = round(fraction * len(ids))
    if len(ids) - count < 2:
        raise AdversaryConfigError("fewer than 2 honest nodes would remain")
    guarded = set(protected)
    pool = [n for n in ids if n not in guarded]
    if count > len(pool):
        raise AdversaryConfigError(
            f"cannot place {count} attackers among {len(pool)} unprotected nodes"
        )
    chosen = set(rng.sample(sorted(pool), count))
    return {n: (Role.ATTACKER if n in chosen else Role.HONEST) for n in ids}


def attacker_handle_route_request(
    req: Packet,
    profile: AttackProfile,
    observed_max_seq: int,
    me: int = -1,
    clock: float = 0.0,
) -> Packet:
    """Forge a reply claiming a one-hop route with an inflated sequence number."""
    if profile.kind not in FORGING_KINDS:
        raise AdversaryConfigError(f"{profile.kind.value} attackers do not forge replies")
    return Packet(
        PacketKind.ROUTE_REPLY,
        origin=req.target,
        target=req.origin,
        hop_count=1,
        seq_no=observed_max_seq + profile.inflation_amount,
        request_id=req.request_id,
        created_at=clock,
        replier=me,
        path_energy=1.0,
        path_capacity=1.0,
    )


def attacker_handle_data(
    pkt: Packet, profile: AttackProfile, state: AttackerState
) -> tuple[DataAction, float]:
    """Decide what an attacker does with a data packet it should relay.

    Returns the action and the extra holding time (non-zero only for delay).
    """
    kind = profile.kind
    if kind is AttackKind.BLACKHOLE:
        action = DataAction.DROP
    elif kind is AttackKind.GRAYHOLE:
        if state.warmup_remaining > 0:
            state.warmup_remaining -= 1
            action = DataAction.FORWARD
        elif state.rng.random() < profile.drop_probability:
            action = DataAction.DROP
        else:
            action = DataAction.FORWARD
    elif kind is AttackKind.DELAY:
        return DataAction.DELAY, profile.added_delay
    else:
        action = DataAction.FORWARD
    if action is DataAction.DROP:
        state.dropped += 1
    return action, 0.0
