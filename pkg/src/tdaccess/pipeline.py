"""End-to-end run: routing, accessibility, metrics, classification."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .accessibility import (
    AccessibilitySeries,
    DecayParams,
    GlobalMetrics,
    GlobalProfile,
    ZoneMetrics,
    ZoneSummary,
    accessibility_from_costs,
    cumulative_population_curve,
    global_metrics,
    global_profile,
    relative,
    zone_metrics,
    zone_summary,
)
from .clustering import classify, kmeans_longitudinal, reference_set
from .io import Scenario, read_reference_profiles
from .routing import SearchGraph, build_search_graph, map_origins, td_one_to_all
from .zoning import Zone, compute_border_buffer

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RunResults:
    name: str
    crs_name: str
    departures: np.ndarray
    study_zones: Tuple[Zone, ...]
    buffer_zones: Tuple[Zone, ...]
    series: np.ndarray  # study zones x departures
    freeflow: np.ndarray  # static free-flow accessibility per study zone
    global_profile: GlobalProfile
    global_metrics: GlobalMetrics
    zone_metrics: Tuple[ZoneMetrics, ...]
    zone_summary: ZoneSummary
    references: Dict[str, np.ndarray]
    curve: list


def _accessibility_row(graph: SearchGraph, z: int, departures, populations, beta) -> np.ndarray:
    params = DecayParams(beta)
    out = np.empty(len(departures))
    for k, t in enumerate(departures):
        costs = td_one_to_all(graph, z, float(t)).travel_times
        out[k] = accessibility_from_costs(costs, populations, params)
    return out


def accessibility_matrix(
    graph: SearchGraph,
    origins: Sequence[int],
    departures: Sequence[float],
    populations: np.ndarray,
    beta: float,
    workers: int = 1,
) -> np.ndarray:
    """Accessibility for each origin (row) and departure (column).

    Each row is reduced as soon as its searches finish, so the full cost tensor
    is never held in memory.
    """
    departures = np.asarray(departures, dtype=float)
    tasks = [(z, departures, populations, beta) for z in origins]
    rows = map_origins(graph, _accessibility_row, tasks, workers)
    return np.array(rows).reshape(len(origins), len(departures))


def destination_weights(zones: Sequence[Zone], buffer: Sequence[Zone], include_buffer: bool = True) -> np.ndarray:
    buffer_ids = {z.id for z in buffer} if include_buffer else set()
    return np.array(
        [z.population if (z.in_study_area or z.id in buffer_ids) else 0.0 for z in zones],
        dtype=float,
    )


def build_references(rel_series: np.ndarray, k: int, seed: int) -> Dict[str, np.ndarray]:
    """Reference profiles from k-means centroids, rescaled to maximum 1."""
    distinct = len(np.unique(rel_series, axis=0))
    k = max(1, min(k, distinct))
    result = kmeans_longitudinal(rel_series, k, seed=seed)
    return {f"P{j + 1}": c / c.max() for j, c in enumerate(result.centroids)}


def run_pipeline(scenario: Scenario, workers: Optional[int] = None) -> RunResults:
    cfg = scenario.config
    workers = cfg.workers if workers is None else workers
    zones = list(scenario.zones)
    departures = cfg.departures

    graph = build_search_graph(scenario.network, zones=zones, connector_kmh=cfg.connector_kmh, max_connector_m=cfg.max_connector_m)
    buffer = compute_border_buffer(graph.freeflow_graph(), zones, cfg.buffer_minutes)
    logger.info("%d study zones, %d buffer zones", sum(z.in_study_area for z in zones), len(buffer))

    populations = destination_weights(zones, buffer, cfg.buffer_destinations)
    study_idx = [k for k, z in enumerate(zones) if z.in_study_area]
    study = [zones[k] for k in study_idx]

    series = accessibility_matrix(graph, study_idx, departures, populations, cfg.beta, workers)
    freeflow = accessibility_matrix(graph.freeflow_graph(), study_idx, [0.0], populations, cfg.beta, workers)[:, 0]

    weights = np.array([z.population for z in study], dtype=float)
    profile = global_profile(series, weights)
    gm = global_metrics(profile, departures, cfg.windows, freeflow=float(np.sum(freeflow * weights) / weights.sum()))

    rel = np.array([relative(row) for row in series])
    if cfg.references is not None:
        refs = reference_set(read_reference_profiles(cfg.references))
    else:
        refs = build_references(rel, cfg.clusters, cfg.cluster_seed)

    metrics = []
    for zone, row, ff, r in zip(study, series, freeflow, rel):
        label, _ = classify(r, refs)
        metrics.append(zone_metrics(AccessibilitySeries(zone.id, row), departures, ff, cfg.windows, label))

    return RunResults(
        name=cfg.name,
        crs_name=cfg.crs_name,
        departures=departures,
        study_zones=tuple(study),
        buffer_zones=tuple(buffer),
        series=series,
        freeflow=freeflow,
        global_profile=profile,
        global_metrics=gm,
        zone_metrics=tuple(metrics),
        zone_summary=zone_summary(metrics),
        references=refs,
        curve=cumulative_population_curve(study, scenario.downtown, cfg.ring_width_km),
    )
