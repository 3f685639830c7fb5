"""Scenario files, experiment sweeps and CSV output.

Scenario files are flat ``key = value`` text; ``#`` starts a comment. Every
key is optional except ``seed``, which may instead come from ``--seed`` or the
``SRA_MANET_SEED`` environment variable (the flag wins).
"""

from __future__ import annotations

import argparse
import csv
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .adversary import AttackKind, AttackProfile
from .detection import DetectionParams
from .engine import ConfigError, EnergyCosts, ScenarioConfig, run
from .metrics import MetricsReport
from .topology import WorldConfig

SEED_ENV = "SRA_MANET_SEED"
VARIANTS = ("sra", "baseline")
SWEEP_VARIABLES = ("attack_fraction", "node_count", "traffic_rate")

DETAIL_COLUMNS = (
    "variant", "variable", "seed", "pdr", "throughput_fraction", "throughput_bps",
    "energy_j", "recall", "precision", "fpr", "mean_delay_s", "sent", "received",
)
METRIC_COLUMNS = DETAIL_COLUMNS[3:]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _fmt_bool(v: bool) -> str:
    return "on" if v else "off"


# key -> (section, field, parser, formatter); section None means top level
_KEYS: dict[str, tuple[str | None, str, Callable, Callable]] = {
    "seed": (None, "seed", int, str),
    "nodes": ("world", "node_count", int, str),
    "area_width": ("world", "area_width", float, repr),
    "area_height": ("world", "area_height", float, repr),
    "radio_range": ("world", "radio_range", float, repr),
    "sim_time": (None, "sim_time", float, repr),
    "bandwidth": (None, "bandwidth", float, repr),
    "packet_size": (None, "packet_size", int, str),
    "speed_min": (None, "speed_min", float, repr),
    "speed_max": (None, "speed_max", float, repr),
    "pause_time": (None, "pause_time", float, repr),
    "mobility_tick": (None, "mobility_tick", float, repr),
    "traffic_rate": (None, "traffic_rate", float, repr),
    "flows": (None, "flows", int, str),
    "attack_kind": ("attack", "kind", AttackKind, lambda k: k.value),
    "attack_fraction": (None, "attack_fraction", float, repr),
    "drop_probability": ("attack", "drop_probability", float, repr),
    "warmup": ("attack", "warmup", int, str),
    "inflation_amount": ("attack", "inflation_amount", int, str),
    "added_delay": ("attack", "added_delay", float, repr),
    "detection": (None, "detection_enabled", _parse_bool, _fmt_bool),
    "tnr_threshold": ("detection", "tnr_threshold", float, repr),
    "window_capacity": ("detection", "window_capacity", int, str),
    "delta_threshold": ("detection", "delta_threshold", int, str),
    "min_hits": ("detection", "min_hits", int, str),
    "reward": ("detection", "reward", float, repr),
    "penalty": ("detection", "penalty", float, repr),
    "blacklist_threshold": ("detection", "blacklist_threshold", float, repr),
    "initial_trust": ("detection", "initial_trust", float, repr),
    "quarantine_period": ("detection", "quarantine_period", float, repr),
    "probation_trust": ("detection", "probation_trust", float, repr),
    "detection_interval": ("detection", "detection_interval", float, repr),
    "energy_threshold": ("detection", "energy_threshold", float, repr),
    "slack_factor": ("detection", "slack_factor", float, repr),
    "base_link_delay": ("detection", "base_link_delay", float, repr),
    "initial_energy": (None, "initial_energy", float, repr),
    "tx_cost": ("energy", "transmit", float, repr),
    "rx_cost": ("energy", "receive", float, repr),
    "idle_cost": ("energy", "idle", float, repr),
    "route_lifetime": (None, "route_lifetime", float, repr),
    "discovery_timeout": (None, "discovery_timeout", float, repr),
    "buffer_timeout": (None, "buffer_timeout", float, repr),
    "buffer_size": (None, "buffer_size", int, str),
    "drain_time": (None, "drain_time", float, repr),
    "jitter": (None, "jitter", float, repr),
}
_ALIASES = {"node_count": "nodes", "area": "area"}


def build_config(values: Mapping[str, object]) -> ScenarioConfig:
    """Assemble a config from already-typed flat values; omitted keys keep their defaults."""
    sections: dict[str | None, dict[str, object]] = {}
    for key, value in values.items():
        section, name, _, _ = _KEYS[key]
        sections.setdefault(section, {})[name] = value
    top = dict(sections.get(None, {}))
    if "seed" not in top:
        raise ConfigError(["seed: missing (set it in the file, with --seed, or $" + SEED_ENV + ")"])
    top["world"] = WorldConfig(**sections.get("world", {}))
    top["attack"] = AttackProfile(**sections.get("attack", {}))
    top["detection"] = DetectionParams(**sections.get("detection", {}))
    top["energy"] = EnergyCosts(**sections.get("energy", {}))
    return ScenarioConfig(**top)


def _convert(key: str, raw: str, where: str) -> tuple[list[tuple[str, object]], list[str]]:
    key = _ALIASES.get(key, key)
    if key == "area":
        try:
            side = float(raw)
        except ValueError:
            return [], [f"{where}area: cannot parse {raw!r} as a number"]
        return [("area_width", side), ("area_height", side)], []
    if key not in _KEYS:
        return [], [f"{where}unknown key {key!r}"]
    parser = _KEYS[key][2]
    try:
        return [(key, parser(raw.strip()))], []
    except ValueError as exc:
        return [], [f"{where}{key}: cannot parse {raw!r} ({exc})"]


def parse_overrides(overrides: Mapping[str, object] | Sequence[str] | None) -> dict[str, str]:
    if not overrides:
        return {}
    if isinstance(overrides, Mapping):
        return {k: str(v) for k, v in overrides.items()}
    out = {}
    for item in overrides:
        for tok in str(item).split():
            k, sep, v = tok.partition("=")
            if not sep:
                raise ConfigError([f"override {tok!r}: expected key=value"])
            out[k.strip()] = v
    return out


def parse_scenario_text(
    text: str, overrides: Mapping[str, object] | Sequence[str] | None = None
) -> ScenarioConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        pairs, errs = _convert(key.strip(), val, f"line {lineno}: ")
        errors += errs
        for k, v in pairs:
            values[k] = v
            lines[k] = lineno
    for key, raw in parse_overrides(overrides).items():
        pairs, errs = _convert(key, raw, "override: ")
        errors += errs
        for k, v in pairs:
            values[k] = v
            lines.pop(k, None)
    if errors:
        raise ConfigError(errors)
    config = build_config(values)
    problems = config.validate()
    if problems:
        raise ConfigError([_locate(p, lines) for p in problems])
    return config


def _locate(problem: str, lines: Mapping[str, int]) -> str:
    for key, lineno in lines.items():
        field_name = _KEYS[key][1]
        if problem.startswith(field_name) or problem.startswith(key):
            return f"line {lineno}: {key}: {problem}"
    return problem


def parse_scenario(
    path: str | os.PathLike, overrides: Mapping[str, object] | Sequence[str] | None = None
) -> ScenarioConfig:
    """Read a scenario file; ``overrides`` (``key=value``) win over file values."""
    text = Path(path).read_text()
    return parse_scenario_text(text, overrides)


def format_scenario(config: ScenarioConfig) -> str:
    out = ["# scenario parameters; any key left out takes its default"]
    for key, (section, name, _, fmt) in _KEYS.items():
        holder = config if section is None else getattr(config, section)
        out.append(f"{key} = {fmt(getattr(holder, name))}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    seeds: tuple[int, ...]
    base: ScenarioConfig
    variants: tuple[str, ...] = VARIANTS

    def validate(self) -> list[str]:
        errors = []
        if self.variable not in SWEEP_VARIABLES:
            errors.append(f"variable must be one of {SWEEP_VARIABLES}")
        if not self.values:
            errors.append("values must be non-empty")
        if not self.seeds:
            errors.append("seeds must be non-empty")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            errors.append(f"variants must be drawn from {VARIANTS}")
        return errors


@dataclass(frozen=True)
class SweepRow:
    variant: str
    value: float
    seed: int
    report: MetricsReport
    config: ScenarioConfig


def variant_config(base: ScenarioConfig, variable: str, value, seed: int, variant: str) -> ScenarioConfig:
    cfg = replace(base, seed=seed, detection_enabled=(variant == "sra"))
    if variable == "attack_fraction":
        return replace(cfg, attack_fraction=float(value))
    if variable == "node_count":
        return replace(cfg, world=replace(cfg.world, node_count=int(value)))
    if variable == "traffic_rate":
        return replace(cfg, traffic_rate=float(value))
    raise ConfigError([f"unknown sweep variable {variable!r}"])


def _run_one(cfg: ScenarioConfig) -> MetricsReport:
    return run(cfg).report


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    """Run every (variant, value, seed) combination; rows come back in that order."""
    errors = spec.validate()
    if errors:
        raise ConfigError(errors)
    plan = []
    for variant in spec.variants:
        for value in spec.values:
            for seed in spec.seeds:
                cfg = variant_config(spec.base, spec.variable, value, seed, variant)
                problems = cfg.validate()
                if problems:
                    raise ConfigError(problems + ["offending config:\n" + format_scenario(cfg)])
                plan.append((variant, value, seed, cfg))
    configs = [p[3] for p in plan]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_one, configs))
    else:
        reports = [_run_one(c) for c in configs]
    return [SweepRow(v, val, s, rep, cfg) for (v, val, s, cfg), rep in zip(plan, reports)]


def _num(x) -> str:
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".10g")


def _metric_values(rep: MetricsReport) -> list:
    d = rep.detection
    return [
        rep.pdr, rep.throughput, rep.throughput_bps, rep.energy_consumed,
        d.recall, d.precision, d.false_positive_rate, rep.mean_delay, rep.sent, rep.received,
    ]


def aggregate_rows(rows: Sequence[SweepRow]) -> list[tuple[str, float, int, list[float], list[float]]]:
    groups: dict[tuple[str, float], list[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.variant, row.value), []).append(row)
    out = []
    for (variant, value), members in groups.items():
        cols = list(zip(*(_metric_values(r.report) for r in members)))
        means = [statistics.fmean(c) for c in cols]
        stds = [statistics.stdev(c) if len(c) > 1 else 0.0 for c in cols]
        out.append((variant, value, len(members), means, stds))
    return out


def aggregate_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_aggregate" + p.suffix)


def emit_csv(rows: Sequence[SweepRow], path: str | os.PathLike, variable: str = "") -> tuple[Path, Path]:
    """Write per-run rows and the per-(variant, value) mean/std companion file."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETAIL_COLUMNS)
        for r in rows:
            w.writerow([r.variant, _num(r.value), r.seed] + [_num(v) for v in _metric_values(r.report)])
    agg = aggregate_path(path)
    with agg.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["variant", "variable", "value", "runs"]
        for c in METRIC_COLUMNS:
            header += [f"{c}_mean", f"{c}_std"]
        w.writerow(header)
        for variant, value, n, means, stds in aggregate_rows(rows):
            line = [variant, variable, _num(value), n]
            for m, s in zip(means, stds):
                line += [_num(m), _num(s)]
            w.writerow(line)
    return path, agg


def parse_values(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive) or a comma list."""
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError([f"values: cannot parse range {text!r}"]) from None
        if step <= 0 or stop < start:
            raise ConfigError([f"values: empty range {text!r}"])
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError([f"values: cannot parse list {text!r}"]) from None


# --------------------------------------------------------------------------
# command line

def _load(args) -> ScenarioConfig:
    overrides: dict[str, object] = {}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        overrides["seed"] = env_seed
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "nodes", None) is not None:
        overrides["nodes"] = args.nodes
    if getattr(args, "attack_fraction", None) is not None:
        overrides["attack_fraction"] = args.attack_fraction
    if getattr(args, "detection", None) is not None:
        overrides["detection"] = args.detection
    for item in args.set or ():
        overrides.update(parse_overrides([item]))
    if args.config:
        return parse_scenario(args.config, overrides)
    return parse_scenario_text("", overrides)


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run(cfg)
    (out / "events.log").write_text(result.log.text())
    (out / "scenario.cfg").write_text(format_scenario(cfg))
    row = SweepRow("sra" if cfg.detection_enabled else "baseline", cfg.attack_fraction,
                   cfg.seed, result.report, cfg)
    emit_csv([row], out / "metrics.csv", "attack_fraction")
    rep = row.report
    print(
        f"pdr={rep.pdr:.4f} throughput={rep.throughput:.4f} energy_j={rep.energy_consumed:.2f} "
        f"recall={rep.detection.recall:.3f} fpr={rep.detection.false_positive_rate:.3f} "
        f"sent={rep.sent} received={rep.received} digest={result.log.digest()[:16]}"
    )
    return 0


def _cmd_sweep(args) -> int:
    base = _load(args)
    n_seeds = args.seeds
    if n_seeds < 1:
        raise ConfigError(["seeds: need at least one"])
    spec = SweepSpec(
        variable=args.variable,
        values=parse_values(args.values),
        seeds=tuple(range(base.seed, base.seed + n_seeds)),
        base=base,
        variants=tuple(v.strip() for v in args.variants.split(",")),
    )
    rows = run_sweep(spec, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    detail, agg = emit_csv(rows, out / "sweep.csv", spec.variable)
    print(f"{len(rows)} runs -> {detail} and {agg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sra-manet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario file (key = value)")
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any scenario key; repeatable")
        p.add_argument("--out", required=True, help="output directory")

    sim = sub.add_parser("simulate", help="run one scenario")
    common(sim)
    sim.add_argument("--nodes", type=int)
    sim.add_argument("--attack-fraction", type=float)
    sim.add_argument("--detection", choices=("on", "off"))
    sim.set_defaults(func=_cmd_simulate)

    sw = sub.add_parser("sweep", help="run a parameter sweep for both variants")
    common(sw)
    sw.add_argument("--variable", default="attack_fraction", choices=SWEEP_VARIABLES)
    sw.add_argument("--values", default="0.1:0.6:0.1")
    sw.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds")
    sw.add_argument("--variants", default=",".join(VARIANTS))
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
