"""Scenario files: flat key=value config, CSV inputs, and report outputs."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .network import (
    PROFILE_END,
    PROFILE_LENGTH,
    PROFILE_START,
    PROFILE_STEP,
    Link,
    Network,
    NetworkError,
    Node,
    SpeedProfile,
    TurnRestriction,
)
from .zoning import ZONE_SIZE_M, GridError, Zone, build_grid, cells_in_extent

logger = logging.getLogger(__name__)

REVERSE_SUFFIX = ":rev"
PROFILE_COLUMNS = [
    "p{:02d}{:02d}".format(*divmod(m, 60)) for m in range(PROFILE_START, PROFILE_END + 1, PROFILE_STEP)
]


class IngestError(ValueError):
    """Invalid scenario input; the message names the file and row."""


def format_hhmm(minutes: Optional[float]) -> str:
    if minutes is None:
        return ""
    m = int(round(minutes))
    return f"{m // 60:02d}:{m % 60:02d}"


def parse_hhmm(text: str) -> int:
    try:
        h, m = text.strip().split(":")
        h, m = int(h), int(m)
    except ValueError:
        raise ValueError(f"expected HH:MM, got {text!r}") from None
    if not (0 <= h <= 24 and 0 <= m < 60):
        raise ValueError(f"expected HH:MM, got {text!r}")
    return h * 60 + m


def instant_columns(departures: Sequence[float]) -> List[str]:
    return ["t" + format_hhmm(t).replace(":", "") for t in departures]


def _parse_window(text: str) -> Tuple[float, float]:
    a, b = text.split("-")
    return float(parse_hhmm(a)), float(parse_hhmm(b))


def _parse_bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str, n: int) -> Tuple[float, ...]:
    parts = [float(p) for p in text.replace(";", ",").split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {text!r}")
    return tuple(parts)


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: Optional[Path] = None
    links: Optional[Path] = None
    profiles: Optional[Path] = None
    restrictions: Optional[Path] = None
    population: Optional[Path] = None
    study_cells: Optional[Path] = None
    study_extent: Optional[Tuple[float, float, float, float]] = None
    grid_extent: Optional[Tuple[float, float, float, float]] = None
    name: str = "scenario"
    beta: float = 0.065
    depart_start: int = 0
    depart_step: int = 15
    depart_count: int = 96
    connector_kmh: float = 20.0
    max_connector_m: Optional[float] = None
    morning_window: Tuple[float, float] = (300.0, 720.0)
    afternoon_window: Tuple[float, float] = (720.0, 1320.0)
    buffer_minutes: float = 15.0
    buffer_destinations: bool = True
    downtown: Optional[Tuple[float, float]] = None
    output_dir: Path = Path("out")
    crs_name: str = "EPSG:3035"
    references: Optional[Path] = None
    clusters: int = 4
    cluster_seed: int = 0
    ring_width_km: float = 2.0
    workers: int = 1

    def __post_init__(self):
        if self.depart_count < 1:
            raise ValueError("depart_count must be >= 1")
        if self.depart_step <= 0:
            raise ValueError("depart_step must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.depart_start + self.depart_step * (self.depart_count - 1) >= 1440:
            raise ValueError("departure schedule runs past 24:00")
        if self.connector_kmh <= 0:
            raise ValueError("connector_kmh must be positive")

    @property
    def departures(self) -> np.ndarray:
        return self.depart_start + self.depart_step * np.arange(self.depart_count, dtype=float)

    @property
    def windows(self):
        return self.morning_window, self.afternoon_window

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base: Path = Path(".")) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _convert(key, str(raw), base)
        kwargs.setdefault("output_dir", base / "out")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        path = Path(path)
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise IngestError(f"{path}:{lineno}: expected key = value")
                key, value = (s.strip() for s in line.split("=", 1))
                values[key] = value
        try:
            return cls.from_mapping(values, path.parent)
        except ValueError as exc:
            raise IngestError(f"{path}: {exc}") from exc

    def with_overrides(self, values: Mapping[str, str], base: Path = Path(".")) -> "ScenarioConfig":
        return replace(self, **{k: _convert(k, str(v), base) for k, v in values.items()})

    def to_lines(self) -> List[str]:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name.endswith("_window"):
                v = f"{format_hhmm(v[0])}-{format_hhmm(v[1])}"
            elif f.name == "depart_start":
                v = format_hhmm(v)
            elif isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return lines


_PATH_KEYS = {"nodes", "links", "profiles", "restrictions", "population", "study_cells", "references", "output_dir"}


def _convert(key: str, raw: str, base: Path):
    raw = raw.strip()
    if key in _PATH_KEYS:
        return Path(raw) if os.path.isabs(raw) else base / raw
    if key in ("study_extent", "grid_extent"):
        return _parse_floats(raw, 4)
    if key == "downtown":
        return _parse_floats(raw, 2)
    if key in ("morning_window", "afternoon_window"):
        return _parse_window(raw)
    if key == "depart_start":
        return parse_hhmm(raw) if ":" in raw else int(raw)
    if key in ("depart_step", "depart_count", "clusters", "cluster_seed", "workers"):
        return int(raw)
    if key in ("beta", "connector_kmh", "buffer_minutes", "ring_width_km"):
        return float(raw)
    if key == "max_connector_m":
        return None if raw.lower() in ("", "none") else float(raw)
    if key == "buffer_destinations":
        return _parse_bool(raw)
    return raw


# -- CSV ingest ---------------------------------------------------------------


def _read_csv(path: Path, required: Sequence[str]) -> Iterable[Tuple[int, Dict[str, str]]]:
    if not Path(path).exists():
        raise IngestError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise IngestError(f"{path}: missing columns {', '.join(missing)}")
        for row in reader:
            yield reader.line_num, row


def _number(path, lineno, row, key, kind=float):
    try:
        return kind(row[key])
    except (TypeError, ValueError):
        raise IngestError(f"{path}:{lineno}: column {key!r} is not a valid number: {row[key]!r}") from None


def read_nodes(path: Path) -> Dict[str, Node]:
    nodes = {}
    for lineno, row in _read_csv(path, ["id", "x", "y"]):
        nid = row["id"].strip()
        if nid in nodes:
            raise IngestError(f"{path}:{lineno}: duplicate node id {nid}")
        try:
            nodes[nid] = Node(nid, _number(path, lineno, row, "x"), _number(path, lineno, row, "y"))
        except NetworkError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
    return nodes


def read_profiles(path: Optional[Path]) -> Dict[str, SpeedProfile]:
    if path is None:
        return {}
    profiles = {}
    for lineno, row in _read_csv(path, ["id"]):
        pid = row["id"].strip()
        values = [row.get(c) for c in PROFILE_COLUMNS]
        values = [v for v in values if v not in (None, "")]
        if len(values) != PROFILE_LENGTH:
            raise IngestError(
                f"{path}:{lineno}: profile {pid}: profile length must be {PROFILE_LENGTH}, got {len(values)}"
            )
        try:
            profiles[pid] = SpeedProfile(pid, np.array([float(v) for v in values]))
        except (ValueError, NetworkError) as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
    return profiles


def read_links(path: Path, nodes: Mapping[str, Node], profiles: Mapping[str, SpeedProfile]) -> Tuple[List[Link], Dict[str, List[str]]]:
    """Directed links plus a map from row id to the directed ids it produced.

    A two-way row yields its forward link under the row id and the reverse link
    under ``<id>:rev``.
    """
    cols = ["id", "from", "to", "length_m", "freeflow_kmh", "frc", "oneway", "profile_id"]
    links: List[Link] = []
    rows: Dict[str, List[str]] = {}
    for lineno, row in _read_csv(path, cols):
        lid = row["id"].strip()
        if lid in rows:
            raise IngestError(f"{path}:{lineno}: duplicate link id {lid}")
        a, b = row["from"].strip(), row["to"].strip()
        for end in (a, b):
            if end not in nodes:
                raise IngestError(f"{path}:{lineno}: link {lid} references unknown node {end}")
        pid = (row["profile_id"] or "").strip()
        if pid and pid not in profiles:
            raise IngestError(f"{path}:{lineno}: link {lid} references unknown profile {pid}")
        profile = profiles.get(pid) if pid else None
        try:
            oneway = _parse_bool(row["oneway"])
        except ValueError:
            raise IngestError(f"{path}:{lineno}: link {lid}: bad oneway value {row['oneway']!r}") from None
        length = _number(path, lineno, row, "length_m")
        speed = _number(path, lineno, row, "freeflow_kmh")
        frc = _number(path, lineno, row, "frc", int)
        try:
            made = [Link(lid, a, b, length, speed, frc, profile)]
            if not oneway:
                made.append(Link(lid + REVERSE_SUFFIX, b, a, length, speed, frc, profile))
        except NetworkError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        links.extend(made)
        rows[lid] = [l.id for l in made]
    return links, rows


def read_restrictions(path: Optional[Path], links: Sequence[Link], rows: Mapping[str, List[str]]) -> List[TurnRestriction]:
    if path is None:
        return []
    by_id = {l.id: l for l in links}
    out = []
    for lineno, row in _read_csv(path, ["via", "from_link", "to_link"]):
        via = row["via"].strip()
        found = []
        for key, end in (("from_link", "to_node"), ("to_link", "from_node")):
            rid = row[key].strip()
            if rid not in rows:
                raise IngestError(f"{path}:{lineno}: restriction references unknown link {rid}")
            match = [d for d in rows[rid] if getattr(by_id[d], end) == via]
            if len(match) != 1:
                raise IngestError(f"{path}:{lineno}: link {rid} does not touch node {via} as required")
            found.append(match[0])
        out.append(TurnRestriction(via, found[0], found[1]))
    return out


def read_population(path: Path) -> List[Tuple[int, int, float]]:
    out = []
    for lineno, row in _read_csv(path, ["cell_x", "cell_y", "pop"]):
        x = _number(path, lineno, row, "cell_x", float)
        y = _number(path, lineno, row, "cell_y", float)
        if x != int(x) or y != int(y):
            raise IngestError(f"{path}:{lineno}: cell corner must be integral metres")
        raw = row["pop"].strip()
        try:
            pop = int(raw)
        except ValueError:
            pop = _number(path, lineno, row, "pop")
        if pop < 0:
            raise IngestError(f"{path}:{lineno}: negative population")
        out.append((int(x), int(y), pop))
    return out


def read_cells(path: Path) -> List[Tuple[int, int]]:
    return [
        (_number(path, n, row, "cell_x", int), _number(path, n, row, "cell_y", int))
        for n, row in _read_csv(path, ["cell_x", "cell_y"])
    ]


def read_reference_profiles(path: Path) -> Dict[str, np.ndarray]:
    refs = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "label":
            raise IngestError(f"{path}: header must start with 'label'")
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} columns")
            try:
                refs[row[0]] = np.array([float(v) for v in row[1:]])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-numeric profile value") from None
    return refs


def read_zone_series(path: Path) -> Tuple[List[str], np.ndarray]:
    ids, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "zone_id":
            raise IngestError(f"{path}: header must start with 'zone_id'")
        for row in reader:
            ids.append(row[0])
            values.append([float(v) for v in row[1:]])
    return ids, np.array(values)


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    network: Network
    zones: Tuple[Zone, ...]

    @property
    def study_zones(self) -> List[Zone]:
        return [z for z in self.zones if z.in_study_area]

    @property
    def downtown(self) -> Tuple[float, float]:
        if self.config.downtown is not None:
            return self.config.downtown
        study = self.study_zones
        w = np.array([z.population for z in study], dtype=float)
        xy = np.array([(z.x, z.y) for z in study])
        if w.sum() <= 0:
            return tuple(xy.mean(axis=0))
        return tuple((xy * w[:, None]).sum(axis=0) / w.sum())


def load_network(config: ScenarioConfig) -> Network:
    for key in ("nodes", "links"):
        if getattr(config, key) is None:
            raise IngestError(f"config is missing {key!r}")
    nodes = read_nodes(config.nodes)
    profiles = read_profiles(config.profiles)
    links, rows = read_links(config.links, nodes, profiles)
    restrictions = read_restrictions(config.restrictions, links, rows)
    try:
        return Network(nodes, links, restrictions)
    except NetworkError as exc:
        raise IngestError(str(exc)) from None


def load_zones(config: ScenarioConfig) -> List[Zone]:
    if config.population is None:
        raise IngestError("config is missing 'population'")
    raster = read_population(config.population)
    if config.study_cells is not None:
        study = read_cells(config.study_cells)
    elif config.study_extent is not None:
        study = cells_in_extent(config.study_extent)
    else:
        study = None
    for x, y in study or ():
        if x % ZONE_SIZE_M or y % ZONE_SIZE_M:
            raise IngestError(f"study cell ({x}, {y}) is not aligned to the 2 km grid")
    try:
        return build_grid(config.grid_extent, raster, study)
    except GridError as exc:
        raise IngestError(f"{config.population}: {exc}") from None


def load_scenario(config) -> Scenario:
    """Read, validate and FIFO-repair a scenario from a config path or object."""
    if not isinstance(config, ScenarioConfig):
        config = ScenarioConfig.from_file(config)
    network = load_network(config)
    zones = load_zones(config)
    if not any(z.in_study_area for z in zones):
        raise IngestError("no zone lies inside the study area")
    if network.repair_report:
        logger.info("FIFO repair adjusted %d links", len(network.repair_report))
    return Scenario(config, network, tuple(zones))


# -- writers -------------------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def write_repair_report(network: Network, path: Path) -> Path:
    return write_csv(
        path,
        ["link_id", "points_changed", "max_reduction_min"],
        ([r.link_id, r.points_changed, fmt(r.max_reduction)] for r in network.repair_report),
    )


def write_reference_profiles(path: Path, refs: Mapping[str, np.ndarray], departures: Sequence[float]) -> Path:
    return write_csv(
        path,
        ["label"] + instant_columns(departures),
        ([label] + [fmt(v) for v in refs[label]] for label in sorted(refs)),
    )


def zones_geojson(zones: Sequence[Zone], metrics: Sequence, crs_name: str) -> dict:
    features = []
    for zone, m in zip(zones, metrics):
        xmin, ymin, xmax, ymax = zone.bounds
        props = {}
        for key, value in asdict(m).items():
            if key.endswith("_instant"):
                value = format_hhmm(value) if value is not None else None
            props[key] = value
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax], [xmin, ymin]]],
                },
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "crs_name": crs_name, "features": features}


def write_reports(results, outdir) -> List[Path]:
    """Write every report file for a finished run and return their paths."""
    from .accessibility import GlobalMetrics, ZoneMetrics, ZoneSummary

    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IngestError(f"cannot create output directory {outdir}: {exc}") from None
    deps = results.departures
    written = []

    prof = results.global_profile
    written.append(
        write_csv(
            outdir / "global_profile.csv",
            ["instant", "mpu", "relative"],
            ([format_hhmm(t), fmt(v), fmt(r)] for t, v, r in zip(deps, prof.values, prof.relative)),
        )
    )

    g: GlobalMetrics = results.global_metrics
    written.append(
        write_csv(
            outdir / "global_metrics.csv",
            [
                "max_global_access", "mean_global_access", "median_global_access",
                "pct_mean_of_max", "pct_median_of_max", "morning_peak", "afternoon_peak",
                "freeflow_global_access",
            ],
            [[
                fmt(g.max), fmt(g.mean), fmt(g.median),
                f"{g.pct_mean_of_max:.2f}", f"{g.pct_median_of_max:.2f}",
                format_hhmm(g.morning_peak), format_hhmm(g.afternoon_peak), fmt(g.freeflow),
            ]],
        )
    )

    written.append(
        write_csv(
            outdir / "zone_series.csv",
            ["zone_id"] + instant_columns(deps),
            ([z.id] + [fmt(v) for v in row] for z, row in zip(results.study_zones, results.series)),
        )
    )

    metric_fields = [f.name for f in fields(ZoneMetrics)]

    def metric_row(m):
        row = []
        for name in metric_fields:
            v = getattr(m, name)
            row.append(format_hhmm(v) if name.endswith("_instant") else fmt(v))
        return row

    written.append(write_csv(outdir / "zone_metrics.csv", metric_fields, (metric_row(m) for m in results.zone_metrics)))

    s: ZoneSummary = results.zone_summary
    written.append(
        write_csv(
            outdir / "zone_summary.csv",
            [f.name for f in fields(ZoneSummary)],
            [[fmt(getattr(s, f.name)) for f in fields(ZoneSummary)]],
        )
    )

    geo = zones_geojson(results.study_zones, results.zone_metrics, results.crs_name)
    path = outdir / "zones.geojson"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(geo, fh, indent=1)
        fh.write("\n")
    written.append(path)

    written.append(write_cumulative_curve(outdir / "cumulative_population.csv", results.curve))
    written.append(write_reference_profiles(outdir / "reference_profile.csv", {results.name: prof.relative}, deps))
    return written


def write_cumulative_curve(path: Path, rows) -> Path:
    return write_csv(
        path,
        ["radius_km", "cumulative_population", "ring_population", "populated_cells", "net_density"],
        ([fmt(r.radius_km), fmt(r.cumulative_population), fmt(r.ring_population), r.populated_cells, fmt(r.net_density)] for r in rows),
    )
