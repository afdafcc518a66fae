"""Potential accessibility per zone and departure, and the congestion metrics derived from it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .zoning import ZONE_AREA_KM2, Zone, distance_to_downtown

DEFAULT_BETA = 0.065
MORNING_WINDOW = (300.0, 720.0)  # [05:00, 12:00)
AFTERNOON_WINDOW = (720.0, 1320.0)  # [12:00, 22:00)
NOON = 720.0
FLAT_TOL = 1e-9


@dataclass(frozen=True)
class DecayParams:
    beta: float = DEFAULT_BETA  # per minute

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def decay(c: float, params: DecayParams = DecayParams()) -> float:
    """Negative-exponential weight of a trip lasting ``c`` minutes; unreachable (inf) weighs 0."""
    if c < 0:
        raise ValueError(f"negative travel cost {c}")
    if math.isinf(c):
        return 0.0
    return math.exp(-params.beta * c)


def accessibility_from_costs(costs: np.ndarray, populations: np.ndarray, params: DecayParams = DecayParams()) -> np.ndarray:
    """Sum of destination populations weighted by decay, along the first axis of ``costs``.

    ``costs`` has shape (destinations, ...) and may hold ``inf`` for unreachable pairs.
    """
    costs = np.asarray(costs, dtype=float)
    if np.any(costs < 0):
        raise ValueError("negative travel cost")
    weights = np.exp(-params.beta * costs)
    pops = np.asarray(populations, dtype=float).reshape((-1,) + (1,) * (costs.ndim - 1))
    return np.sum(pops * weights, axis=0)


def zone_accessibility(i: int, t: int, tensor, populations: Sequence[float], params: DecayParams = DecayParams()) -> float:
    """Accessibility of origin row ``i`` at departure index ``t`` of a cost tensor.

    ``populations`` are aligned with the tensor's zone axis; zones that are not
    destinations should carry 0.
    """
    return float(sum(p * decay(c, params) for p, c in zip(populations, tensor.costs[i, :, t])))


@dataclass(frozen=True)
class AccessibilitySeries:
    zone_id: str
    values: np.ndarray

    @property
    def relative(self) -> np.ndarray:
        return relative(self.values)


def relative(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    peak = values.max()
    if peak <= 0:
        return np.ones_like(values)
    return values / peak


@dataclass(frozen=True)
class GlobalProfile:
    values: np.ndarray

    @property
    def relative(self) -> np.ndarray:
        return relative(self.values)


def global_profile(series, weights: Sequence[float]) -> GlobalProfile:
    """Weighted mean of zone series (rows) at every instant; weights are origin populations."""
    if isinstance(series, (list, tuple)) and series and isinstance(series[0], AccessibilitySeries):
        series = [s.values for s in series]
    values = np.atleast_2d(np.asarray(series, dtype=float))
    w = np.asarray(weights, dtype=float)
    if w.shape != (values.shape[0],):
        raise ValueError("one weight per zone series is required")
    total = w.sum()
    if total <= 0:
        raise ValueError("total origin weight is zero")
    return GlobalProfile(np.sum(values * (w / total)[:, None], axis=0))


def _window_min(rel: np.ndarray, departures: np.ndarray, window: Tuple[float, float]) -> Tuple[Optional[int], float]:
    idx = np.nonzero((departures >= window[0]) & (departures < window[1]))[0]
    if idx.size == 0:
        return None, 1.0
    k = idx[int(np.argmin(rel[idx]))]  # argmin returns the first of ties
    return int(k), float(rel[k])


def detect_peaks(
    rel: np.ndarray,
    departures: np.ndarray,
    windows: Tuple[Tuple[float, float], Tuple[float, float]] = (MORNING_WINDOW, AFTERNOON_WINDOW),
) -> Tuple[Optional[float], Optional[float]]:
    """Departure minute of the lowest relative value inside each window.

    A window whose minimum does not fall below the series maximum has no peak.
    """
    rel = np.asarray(rel, dtype=float)
    departures = np.asarray(departures, dtype=float)
    top = rel.max()
    out = []
    for window in windows:
        k, v = _window_min(rel, departures, window)
        out.append(None if k is None or v >= top - FLAT_TOL else float(departures[k]))
    return out[0], out[1]


def peak_gap(morning_ratio: float, afternoon_ratio: float) -> float:
    """Normalized difference between the better and the worse peak ratio."""
    for r in (morning_ratio, afternoon_ratio):
        if not 0.0 < r <= 1.0:
            raise ValueError(f"peak ratio {r} outside (0, 1]")
    best, worst = max(morning_ratio, afternoon_ratio), min(morning_ratio, afternoon_ratio)
    if worst == 1.0:
        return 0.0
    return (best - worst) / (1.0 - worst)


def percent_of_max(value: float, maximum: float) -> float:
    return 100.0 * value / maximum


@dataclass(frozen=True)
class GlobalMetrics:
    max: float
    mean: float
    median: float
    pct_mean_of_max: float
    pct_median_of_max: float
    morning_peak: Optional[float]
    afternoon_peak: Optional[float]
    freeflow: Optional[float] = None


def global_metrics(
    profile,
    departures: np.ndarray,
    windows=(MORNING_WINDOW, AFTERNOON_WINDOW),
    freeflow: Optional[float] = None,
) -> GlobalMetrics:
    values = np.asarray(getattr(profile, "values", profile), dtype=float)
    vmax = float(values.max())
    mean = float(values.mean())
    median = float(np.median(values))
    morning, afternoon = detect_peaks(relative(values), departures, windows)
    return GlobalMetrics(
        max=vmax,
        mean=mean,
        median=median,
        pct_mean_of_max=percent_of_max(mean, vmax),
        pct_median_of_max=percent_of_max(median, vmax),
        morning_peak=morning,
        afternoon_peak=afternoon,
        freeflow=freeflow,
    )


@dataclass(frozen=True)
class ZoneMetrics:
    zone_id: str
    freeflow_access: float
    morning_peak_instant: Optional[float]
    afternoon_peak_instant: Optional[float]
    morning_ratio: float
    afternoon_ratio: float
    worst_instant: Optional[float]
    worst_is_morning: bool
    peak_gap: float
    cluster_label: Optional[str] = None


def zone_metrics(
    series: AccessibilitySeries,
    departures: np.ndarray,
    freeflow_access: float,
    windows=(MORNING_WINDOW, AFTERNOON_WINDOW),
    cluster_label: Optional[str] = None,
) -> ZoneMetrics:
    rel = series.relative
    departures = np.asarray(departures, dtype=float)
    morning, afternoon = detect_peaks(rel, departures, windows)
    _, m_ratio = _window_min(rel, departures, windows[0])
    _, a_ratio = _window_min(rel, departures, windows[1])
    k = int(np.argmin(rel))
    worst = None if rel[k] >= 1.0 - FLAT_TOL else float(departures[k])
    return ZoneMetrics(
        zone_id=series.zone_id,
        freeflow_access=float(freeflow_access),
        morning_peak_instant=morning,
        afternoon_peak_instant=afternoon,
        morning_ratio=m_ratio,
        afternoon_ratio=a_ratio,
        worst_instant=worst,
        worst_is_morning=worst is not None and worst < NOON,
        peak_gap=peak_gap(m_ratio, a_ratio),
        cluster_label=cluster_label,
    )


@dataclass(frozen=True)
class ZoneSummary:
    """Study-wide shares over zone metrics."""

    max_cell_freeflow: float
    pct_cells_above_80pct_of_max: float
    pct_worst_morning: float
    pct_worst_afternoon: float


def zone_summary(metrics: Sequence[ZoneMetrics]) -> ZoneSummary:
    if not metrics:
        raise ValueError("no zone metrics")
    ff = np.array([m.freeflow_access for m in metrics])
    top = float(ff.max())
    congested = [m for m in metrics if m.worst_instant is not None]
    morning = sum(m.worst_is_morning for m in congested)
    n = len(congested)
    return ZoneSummary(
        max_cell_freeflow=top,
        pct_cells_above_80pct_of_max=100.0 * float(np.mean(ff > 0.8 * top)),
        pct_worst_morning=100.0 * morning / n if n else 0.0,
        pct_worst_afternoon=100.0 * (n - morning) / n if n else 0.0,
    )


@dataclass(frozen=True)
class CurveRow:
    radius_km: float
    cumulative_population: float
    ring_population: float
    populated_cells: int
    net_density: float  # inhabitants per km2 of populated cells in the ring


def cumulative_population_curve(
    zones: Sequence[Zone], downtown: Tuple[float, float], ring_width_km: float = 2.0
) -> List[CurveRow]:
    """Population within growing radii of downtown, with net density of each ring."""
    if ring_width_km <= 0:
        raise ValueError("ring width must be positive")
    if not zones:
        return []
    dist = np.array([distance_to_downtown(z, downtown) for z in zones])
    pops = np.array([z.population for z in zones], dtype=float)
    rings = np.maximum(np.ceil(dist / ring_width_km - 1e-12), 1).astype(int)
    rows = []
    cumulative = 0.0
    for k in range(1, int(rings.max()) + 1):
        in_ring = rings == k
        ring_pop = float(pops[in_ring].sum())
        populated = int(np.count_nonzero(pops[in_ring] > 0))
        cumulative += ring_pop
        density = ring_pop / (populated * ZONE_AREA_KM2) if populated else 0.0
        rows.append(CurveRow(k * ring_width_km, cumulative, ring_pop, populated, density))
    return rows
