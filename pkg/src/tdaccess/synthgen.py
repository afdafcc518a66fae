"""Deterministic ring-radial test cities with morning and afternoon congestion waves.

Inbound radials slow down in the morning, outbound radials in the afternoon,
ring roads get a weaker share of both. Dips deepen linearly with distance from
downtown and population decays exponentially away from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .io import PROFILE_COLUMNS, ScenarioConfig, load_scenario, write_csv
from .network import PROFILE_END, PROFILE_START, PROFILE_STEP
from .zoning import RASTER_SIZE_M, ZONE_SIZE_M

MIN_FRACTION = 0.05
DIP_CUTOFF = 1e-3


@dataclass(frozen=True)
class Dip:
    depth: float  # fraction of free-flow speed lost at the centre
    center: float  # minute of day
    half_width: float  # minutes from centre to half depth

    def __post_init__(self):
        if not 0.0 <= self.depth < 1.0:
            raise ValueError("dip depth must lie in [0, 1)")
        if not self.half_width > 0:
            raise ValueError("dip half-width must be positive")

    def shape(self, t: np.ndarray) -> np.ndarray:
        g = np.exp(-math.log(2.0) * ((t - self.center) / self.half_width) ** 2)
        return np.where(g < DIP_CUTOFF, 0.0, g)


@dataclass(frozen=True)
class SynthSpec:
    rings: int = 30
    radials: int = 48
    ring_spacing_km: float = 1.0
    core_population: float = 5000.0  # inhabitants per km2 at downtown
    density_decay_per_km: float = 0.1
    morning: Dip = Dip(0.5, 480.0, 60.0)
    afternoon: Dip = Dip(0.5, 1050.0, 90.0)
    asymmetry: float = 0.8  # share of the off-direction dip that is removed
    ring_attenuation: float = 0.5
    depth_floor: float = 0.2  # relative dip depth at downtown
    radial_kmh: float = 70.0
    ring_kmh: float = 50.0
    study_radius_km: Optional[float] = None  # default: 2 km inside the outer ring
    margin_km: float = 6.0
    downtown: Tuple[float, float] = (3_600_000.0, 2_200_000.0)
    population_noise: float = 0.1
    ban_uturns: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.rings < 1 or self.radials < 3:
            raise ValueError("a city needs at least 1 ring and 3 radials")
        if self.ring_spacing_km <= 0:
            raise ValueError("ring spacing must be positive")
        if not 0.0 <= self.asymmetry <= 1.0:
            raise ValueError("asymmetry must lie in [0, 1]")
        if any(c % ZONE_SIZE_M for c in self.downtown):
            raise ValueError("downtown must sit on a 2 km grid corner")

    @property
    def outer_radius_km(self) -> float:
        return self.rings * self.ring_spacing_km

    @property
    def study_radius(self) -> float:
        if self.study_radius_km is not None:
            return self.study_radius_km
        return max(self.outer_radius_km - 2.0, self.ring_spacing_km)


@dataclass
class ScenarioTables:
    """Row-level scenario content, in the CSV layouts read by :mod:`tdaccess.io`."""

    nodes: List[tuple] = field(default_factory=list)
    links: List[tuple] = field(default_factory=list)
    profiles: Dict[str, np.ndarray] = field(default_factory=dict)
    restrictions: List[tuple] = field(default_factory=list)
    population: List[tuple] = field(default_factory=list)
    study_cells: List[tuple] = field(default_factory=list)
    downtown: Tuple[float, float] = (0.0, 0.0)


def _profile(morning: float, afternoon: float, spec: SynthSpec) -> np.ndarray:
    t = np.arange(PROFILE_START, PROFILE_END + 1, PROFILE_STEP, dtype=float)
    f = 1.0 - morning * spec.morning.shape(t) - afternoon * spec.afternoon.shape(t)
    return np.maximum(f, MIN_FRACTION)


def generate_tables(spec: SynthSpec) -> ScenarioTables:
    rng = np.random.default_rng(spec.seed)
    x0, y0 = spec.downtown
    tables = ScenarioTables(downtown=(x0, y0))
    step = spec.ring_spacing_km * 1000.0
    outer = spec.outer_radius_km

    def node_id(k: int, j: int) -> str:
        return "c" if k == 0 else f"n{k}_{j}"

    def xy(k: int, j: int) -> Tuple[float, float]:
        if k == 0:
            return x0, y0
        a = 2 * math.pi * (j + 0.5) / spec.radials
        return x0 + k * step * math.cos(a), y0 + k * step * math.sin(a)

    tables.nodes.append(("c", x0, y0))
    for k in range(1, spec.rings + 1):
        for j in range(spec.radials):
            tables.nodes.append((node_id(k, j), *xy(k, j)))

    def scale(r_km: float) -> float:
        return spec.depth_floor + (1 - spec.depth_floor) * min(r_km / outer, 1.0)

    off = 1.0 - spec.asymmetry
    m, a = spec.morning.depth, spec.afternoon.depth
    for k in range(1, spec.rings + 1):
        s = scale((k - 0.5) * spec.ring_spacing_km)
        tables.profiles[f"in{k}"] = _profile(m * s, a * s * off, spec)
        tables.profiles[f"out{k}"] = _profile(m * s * off, a * s, spec)
        s = scale(k * spec.ring_spacing_km) * spec.ring_attenuation
        tables.profiles[f"ring{k}"] = _profile(m * s, a * s, spec)

    for k in range(1, spec.rings + 1):
        for j in range(spec.radials):
            inner, outer_node = node_id(k - 1, j), node_id(k, j)
            (xa, ya), (xb, yb) = xy(k - 1, j), xy(k, j)
            length = math.hypot(xb - xa, yb - ya)
            frc = 1
            tables.links.append((f"i{k}_{j}", outer_node, inner, length, spec.radial_kmh, frc, 1, f"in{k}"))
            tables.links.append((f"o{k}_{j}", inner, outer_node, length, spec.radial_kmh, frc, 1, f"out{k}"))
            if spec.ban_uturns:
                tables.restrictions.append((inner, f"i{k}_{j}", f"o{k}_{j}"))
                tables.restrictions.append((outer_node, f"o{k}_{j}", f"i{k}_{j}"))
            nxt = (j + 1) % spec.radials
            (xc, yc) = xy(k, nxt)
            ring_len = math.hypot(xc - xb, yc - yb)
            tables.links.append((f"g{k}_{j}", outer_node, node_id(k, nxt), ring_len, spec.ring_kmh, 3, 0, f"ring{k}"))
            if spec.ban_uturns:
                tables.restrictions.append((outer_node, f"g{k}_{j}", f"g{k}_{j}"))
                tables.restrictions.append((node_id(k, nxt), f"g{k}_{j}", f"g{k}_{j}"))

    half = int(math.ceil((outer + spec.margin_km) / 2.0)) * 2 * 1000
    xmin, ymin = int(x0) - half, int(y0) - half
    for y in range(ymin, ymin + 2 * half, RASTER_SIZE_M):
        for x in range(xmin, xmin + 2 * half, RASTER_SIZE_M):
            d_km = math.hypot(x + 500 - x0, y + 500 - y0) / 1000.0
            noise = 1.0 + spec.population_noise * (2 * rng.random() - 1)
            tables.population.append((x, y, spec.core_population * math.exp(-spec.density_decay_per_km * d_km) * noise))
    for y in range(ymin, ymin + 2 * half, ZONE_SIZE_M):
        for x in range(xmin, xmin + 2 * half, ZONE_SIZE_M):
            if math.hypot(x + 1000 - x0, y + 1000 - y0) / 1000.0 <= spec.study_radius:
                tables.study_cells.append((x, y))
    return tables


def write_scenario(tables: ScenarioTables, outdir, **config) -> Path:
    """Write the scenario CSVs plus ``scenario.cfg`` and return the config path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "nodes.csv", ["id", "x", "y"], ((n, repr(x), repr(y)) for n, x, y in tables.nodes))
    write_csv(
        outdir / "links.csv",
        ["id", "from", "to", "length_m", "freeflow_kmh", "frc", "oneway", "profile_id"],
        ((lid, a, b, repr(float(l)), repr(float(v)), frc, ow, p) for lid, a, b, l, v, frc, ow, p in tables.links),
    )
    write_csv(
        outdir / "profiles.csv",
        ["id"] + PROFILE_COLUMNS,
        ([pid] + [repr(float(v)) for v in values] for pid, values in tables.profiles.items()),
    )
    write_csv(outdir / "restrictions.csv", ["via", "from_link", "to_link"], tables.restrictions)
    write_csv(outdir / "population.csv", ["cell_x", "cell_y", "pop"], ((x, y, repr(float(p))) for x, y, p in tables.population))
    write_csv(outdir / "study_cells.csv", ["cell_x", "cell_y"], tables.study_cells)
    cfg = ScenarioConfig(
        nodes=Path("nodes.csv"),
        links=Path("links.csv"),
        profiles=Path("profiles.csv"),
        restrictions=Path("restrictions.csv"),
        population=Path("population.csv"),
        study_cells=Path("study_cells.csv"),
        downtown=tables.downtown,
        output_dir=Path("out"),
    )
    if config:
        cfg = cfg.with_overrides({k: str(v) for k, v in config.items()})
    path = outdir / "scenario.cfg"
    path.write_text("\n".join(cfg.to_lines()) + "\n", encoding="utf-8")
    return path


def generate(spec: SynthSpec, workdir, **config):
    """Generate a city, write it in ingest format under ``workdir`` and load it back.

    Returns the loaded :class:`~tdaccess.io.Scenario`; its network carries the
    profiles, its zones the population raster and study-area flags, and its
    config the downtown point.
    """
    path = write_scenario(generate_tables(spec), workdir, **config)
    return load_scenario(path)
