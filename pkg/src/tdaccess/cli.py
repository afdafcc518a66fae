"""Command-line entry point: synth, validate, run, classify, curve."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .accessibility import cumulative_population_curve, relative
from .clustering import classify, reference_set
from .io import (
    IngestError,
    ScenarioConfig,
    fmt,
    load_scenario,
    read_reference_profiles,
    read_zone_series,
    write_csv,
    write_cumulative_curve,
    write_repair_report,
    write_reports,
)
from .network import NetworkError
from .synthgen import Dip, SynthSpec, generate_tables, write_scenario

logger = logging.getLogger("tdaccess")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="scenario config (key = value)")
    for f in fields(ScenarioConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar="VALUE")


def _config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_file(args.config)
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return cfg.with_overrides(overrides) if overrides else cfg


def cmd_synth(args) -> int:
    spec = SynthSpec(
        rings=args.rings,
        radials=args.radials,
        ring_spacing_km=args.ring_spacing_km,
        core_population=args.core_population,
        density_decay_per_km=args.density_decay,
        morning=Dip(args.morning_depth, args.morning_center, args.morning_width),
        afternoon=Dip(args.afternoon_depth, args.afternoon_center, args.afternoon_width),
        asymmetry=args.asymmetry,
        seed=args.seed,
    )
    path = write_scenario(generate_tables(spec), args.out)
    print(path)
    return 0


def cmd_validate(args) -> int:
    scenario = load_scenario(_config(args))
    net = scenario.network
    print(f"nodes={len(net.nodes)} links={len(net.links)} restrictions={len(net.restrictions)}")
    print(f"zones={len(scenario.zones)} study={len(scenario.study_zones)}")
    print(f"fifo_repaired_links={len(net.repair_report)}")
    return 0


def cmd_run(args) -> int:
    from .pipeline import run_pipeline

    cfg = _config(args)
    scenario = load_scenario(cfg)
    results = run_pipeline(scenario)
    paths = write_reports(results, cfg.output_dir)
    paths.append(write_repair_report(scenario.network, Path(cfg.output_dir) / "fifo_repair.csv"))
    for p in paths:
        print(p)
    return 0


def cmd_classify(args) -> int:
    ids, values = read_zone_series(args.series)
    refs = reference_set(read_reference_profiles(args.references))
    rows = []
    for zid, row in zip(ids, values):
        label, dist = classify(relative(row), refs)
        rows.append([zid, label, fmt(dist)])
    out = args.out or sys.stdout
    if out is sys.stdout:
        print("zone_id,label,distance")
        for r in rows:
            print(",".join(r))
    else:
        write_csv(out, ["zone_id", "label", "distance"], rows)
    return 0


def cmd_curve(args) -> int:
    cfg = _config(args)
    scenario = load_scenario(cfg)
    rows = cumulative_population_curve(scenario.study_zones, scenario.downtown, args.ring_width or cfg.ring_width_km)
    out = args.out or Path(cfg.output_dir) / "cumulative_population.csv"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    print(write_cumulative_curve(Path(out), rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdaccess", description="Congestion-aware accessibility on a 2 km grid.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic ring-radial scenario")
    p.add_argument("--out", required=True, type=Path)
    defaults = SynthSpec()
    p.add_argument("--rings", type=int, default=defaults.rings)
    p.add_argument("--radials", type=int, default=defaults.radials)
    p.add_argument("--ring-spacing-km", type=float, default=defaults.ring_spacing_km)
    p.add_argument("--core-population", type=float, default=defaults.core_population)
    p.add_argument("--density-decay", type=float, default=defaults.density_decay_per_km)
    p.add_argument("--morning-depth", type=float, default=defaults.morning.depth)
    p.add_argument("--morning-center", type=float, default=defaults.morning.center)
    p.add_argument("--morning-width", type=float, default=defaults.morning.half_width)
    p.add_argument("--afternoon-depth", type=float, default=defaults.afternoon.depth)
    p.add_argument("--afternoon-center", type=float, default=defaults.afternoon.center)
    p.add_argument("--afternoon-width", type=float, default=defaults.afternoon.half_width)
    p.add_argument("--asymmetry", type=float, default=defaults.asymmetry)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="load and check a scenario")
    _add_config_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the full pipeline and write reports")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("classify", help="assign zone series to reference profiles")
    p.add_argument("--series", required=True, type=Path, help="zone_series.csv")
    p.add_argument("--references", required=True, type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("curve", help="cumulative population by distance from downtown")
    _add_config_flags(p)
    p.add_argument("--ring-width", type=float)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IngestError, NetworkError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
