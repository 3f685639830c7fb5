"""Independent checks over a finished run's event log.

These re-derive accounting facts from the log text alone so they can serve as
oracles for the engine and metrics code.
"""

from collections import Counter, defaultdict


def parse(line):
    t, kind, subj, detail = line.split(",", 3)
    fields = dict(tok.split("=", 1) for tok in detail.split() if "=" in tok)
    words = [tok for tok in detail.split() if "=" not in tok]
    return float(t), kind, int(subj), fields, words


def logged_energy_uj(lines):
    """Sum of every ``e=`` charge recorded in the log (micro-joules)."""
    return sum(int(parse(line)[3].get("e", 0)) for line in lines)


def times_non_decreasing(lines):
    times = [parse(line)[0] for line in lines]
    return all(a <= b for a, b in zip(times, times[1:]))


def untraced_deliveries(lines):
    """Delivered uids without an earlier emit, plus uids whose hop count
    disagrees with the number of data transmissions recorded for them."""
    emitted = set()
    tx = Counter()
    problems = []
    for line in lines:
        _t, kind, _s, f, words = parse(line)
        if kind == "emit":
            emitted.add(f["uid"])
        elif kind == "tx" and words[:1] == ["data"]:
            tx[f["uid"]] += 1
        elif kind == "deliver":
            uid = f["uid"]
            if uid not in emitted:
                problems.append(("no-emit", uid))
            if int(f["hop"]) != tx[uid]:
                problems.append(("hop-mismatch", uid, int(f["hop"]), tx[uid]))
    return problems


def blacklisted_data_sends(lines):
    """Data transmissions addressed to a next hop the sender had blacklisted."""
    black = defaultdict(set)
    bad = []
    for line in lines:
        t, kind, subj, f, words = parse(line)
        if kind == "blacklist":
            black[subj].add(int(f["peer"]))
        elif kind == "release":
            black[subj].discard(int(f["peer"]))
        elif kind == "tx" and words[:1] == ["data"] and int(f["to"]) in black[subj]:
            bad.append((t, subj, int(f["to"])))
    return bad


def logged_roles(lines):
    return {parse(line)[2]: parse(line)[4][0] for line in lines if parse(line)[1] == "role"}


def counts(lines, horizon=None):
    """Emitted packets and deliveries at or before ``horizon`` (all if None)."""
    emitted = delivered = 0
    for line in lines:
        t, kind = parse(line)[:2]
        if kind == "emit":
            emitted += 1
        elif kind == "deliver" and (horizon is None or t <= horizon):
            delivered += 1
    return emitted, delivered
