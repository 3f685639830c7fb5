"""Evaluation quantities computed from a finished run's event log."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .adversary import Role


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionQuality:
    recall: float
    precision: float
    false_positive_rate: float
    degenerate: bool = False


@dataclass(frozen=True)
class MetricsReport:
    pdr: float
    throughput: float
    throughput_bps: float
    energy_consumed: float
    detection: DetectionQuality
    mean_delay: float
    sent: int
    received: int


def pdr(received: int, sent: int) -> float:
    if sent <= 0:
        raise MetricError("packet delivery ratio is undefined when nothing was sent")
    return received / sent


def throughput(log, sent: int, sim_time: float, packet_bits: int | None = None) -> tuple[float, float]:
    """Delivered fraction (including deliveries in the drain window) and bit/s.

    ``log`` is an :class:`~sra_manet.engine.EventLog`. Bits per packet come
    from ``packet_bits`` when given, else 512-byte frames are assumed.
    """
    if sent <= 0:
        raise MetricError("throughput is undefined when nothing was sent")
    delivered = sum(1 for _ in log.records("deliver"))
    bits = packet_bits if packet_bits is not None else 512 * 8
    return delivered / sent, delivered * bits / sim_time


def energy_consumption(ledger) -> float:
    """Total energy spent, summed over every node's initial minus residual."""
    return ledger.consumed_uj() / 1_000_000


def detection_metrics(
    verdicts: Mapping[int, bool], ground_truth: Mapping[int, Role]
) -> DetectionQuality:
    if set(verdicts) != set(ground_truth):
        raise MetricError("verdicts and ground truth cover different nodes")
    attackers = [n for n, r in ground_truth.items() if r is Role.ATTACKER]
    honest = [n for n, r in ground_truth.items() if r is not Role.ATTACKER]
    flagged = [n for n, v in verdicts.items() if v]
    tp = sum(1 for n in attackers if verdicts[n])
    fp = sum(1 for n in honest if verdicts[n])
    degenerate = not attackers or not flagged or not honest
    recall = tp / len(attackers) if attackers else 0.0
    precision = tp / len(flagged) if flagged else 0.0
    fpr = fp / len(honest) if honest else 0.0
    return DetectionQuality(recall, precision, fpr, degenerate)


def verdicts_from_log(log, roles: Mapping[int, Role]) -> dict[int, bool]:
    """A node counts as detected once any honest observer blacklists it."""
    flagged = {n: False for n in roles}
    for _t, _k, observer, detail in log.records("blacklist"):
        if roles[observer] is Role.HONEST:
            flagged[int(detail["peer"])] = True
    return flagged


def compute_report(result) -> MetricsReport:
    cfg = result.config
    log = result.log
    delays = [float(d["delay"]) for t, _k, _s, d in log.records("deliver") if t <= cfg.sim_time]
    received = len(delays)
    sent = sum(1 for _ in log.records("emit"))
    frac, bps = throughput(log, sent, cfg.sim_time, cfg.packet_size * 8)
    quality = detection_metrics(verdicts_from_log(log, result.roles), result.roles)
    return MetricsReport(
        pdr=pdr(received, sent),
        throughput=frac,
        throughput_bps=bps,
        energy_consumed=energy_consumption(result.ledger),
        detection=quality,
        mean_delay=sum(delays) / received if received else 0.0,
        sent=sent,
        received=received,
    )
