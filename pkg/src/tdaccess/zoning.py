"""2x2 km analysis grid built from a 1 km population raster."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Collection, Dict, Iterable, List, Optional, Sequence, Tuple

from .routing import SearchGraph, multi_source_arrivals

ZONE_SIZE_M = 2000
RASTER_SIZE_M = 1000
ZONE_AREA_KM2 = 4.0
DEFAULT_BUFFER_MINUTES = 15.0


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Zone:
    id: str
    row: int
    col: int
    x: float  # centroid, projected metres
    y: float
    population: float
    in_study_area: bool = True

    @property
    def lower_left(self) -> Tuple[int, int]:
        return int(self.x - ZONE_SIZE_M / 2), int(self.y - ZONE_SIZE_M / 2)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        h = ZONE_SIZE_M / 2
        return self.x - h, self.y - h, self.x + h, self.y + h


@dataclass(frozen=True)
class StudyArea:
    study: Tuple[Zone, ...]
    buffer: Tuple[Zone, ...]
    downtown: Tuple[float, float]

    def __post_init__(self):
        ids = {z.id for z in self.study}
        if any(z.id in ids for z in self.buffer):
            raise GridError("study and buffer zones must be disjoint")


def zone_id(x_ll: int, y_ll: int) -> str:
    return f"E{x_ll // 1000}N{y_ll // 1000}"


def _snap_extent(extent: Sequence[float]) -> Tuple[int, int, int, int]:
    xmin, ymin, xmax, ymax = extent
    if xmax <= xmin or ymax <= ymin:
        raise GridError("empty grid extent")
    s = ZONE_SIZE_M
    return (
        int(math.floor(xmin / s) * s),
        int(math.floor(ymin / s) * s),
        int(math.ceil(xmax / s) * s),
        int(math.ceil(ymax / s) * s),
    )


def raster_extent(raster: Iterable[Tuple[float, float, float]]) -> Tuple[int, int, int, int]:
    cells = list(raster)
    if not cells:
        raise GridError("empty population raster")
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    return _snap_extent((min(xs), min(ys), max(xs) + RASTER_SIZE_M, max(ys) + RASTER_SIZE_M))


def build_grid(
    extent: Optional[Sequence[float]],
    raster: Iterable[Tuple[float, float, float]],
    study_cells: Optional[Collection[Tuple[int, int]]] = None,
) -> List[Zone]:
    """Aggregate 1 km cells ``(x_ll, y_ll, count)`` into 2 km zones covering ``extent``.

    ``extent`` is snapped outward to the 2 km lattice; ``None`` means the raster's
    own bounding box. ``study_cells`` holds lower-left corners of the 2 km cells
    inside the study area; ``None`` marks every cell as study.
    Zones are ordered row-major from the south-west corner.
    """
    raster = list(raster)
    if extent is None:
        xmin, ymin, xmax, ymax = raster_extent(raster)
    else:
        xmin, ymin, xmax, ymax = _snap_extent(extent)
    ncols = (xmax - xmin) // ZONE_SIZE_M
    nrows = (ymax - ymin) // ZONE_SIZE_M
    pop: Dict[Tuple[int, int], float] = {}
    for x, y, count in raster:
        if x % RASTER_SIZE_M or y % RASTER_SIZE_M:
            raise GridError(f"raster cell ({x}, {y}) is not aligned to the 1 km grid")
        if count < 0:
            raise GridError(f"raster cell ({x}, {y}) has a negative count")
        if not (xmin <= x < xmax and ymin <= y < ymax):
            raise GridError(f"raster cell ({x}, {y}) lies outside the grid extent")
        key = (int((x - xmin) // ZONE_SIZE_M), int((y - ymin) // ZONE_SIZE_M))
        pop[key] = pop.get(key, 0) + count

    study = None if study_cells is None else {(int(x), int(y)) for x, y in study_cells}
    zones = []
    for row in range(nrows):
        for col in range(ncols):
            x_ll = xmin + col * ZONE_SIZE_M
            y_ll = ymin + row * ZONE_SIZE_M
            zones.append(
                Zone(
                    id=zone_id(x_ll, y_ll),
                    row=row,
                    col=col,
                    x=x_ll + ZONE_SIZE_M / 2,
                    y=y_ll + ZONE_SIZE_M / 2,
                    population=pop.get((col, row), 0),
                    in_study_area=study is None or (x_ll, y_ll) in study,
                )
            )
    return zones


def cells_in_extent(extent: Sequence[float]) -> List[Tuple[int, int]]:
    """Lower-left corners of the 2 km cells covering ``extent``."""
    xmin, ymin, xmax, ymax = _snap_extent(extent)
    return [
        (x, y)
        for y in range(ymin, ymax, ZONE_SIZE_M)
        for x in range(xmin, xmax, ZONE_SIZE_M)
    ]


def compute_border_buffer(
    graph: SearchGraph,
    zones: Sequence[Zone],
    threshold_minutes: float = DEFAULT_BUFFER_MINUTES,
) -> List[Zone]:
    """Outside zones reachable from some study zone within the threshold at midnight.

    ``graph`` must have been built over ``zones`` in the same order.
    """
    if tuple(str(z.id) for z in zones) != graph.zone_ids:
        raise GridError("graph zones do not match the zone list")
    origins = [k for k, z in enumerate(zones) if z.in_study_area and graph.attachments[k] is not None]
    if not origins:
        return []
    arrival = multi_source_arrivals(graph, origins, 0.0)
    return [z for k, z in enumerate(zones) if not z.in_study_area and arrival[k] <= threshold_minutes]


def study_area(zones: Sequence[Zone], buffer: Sequence[Zone], downtown: Tuple[float, float]) -> StudyArea:
    return StudyArea(tuple(z for z in zones if z.in_study_area), tuple(buffer), tuple(downtown))


def distance_to_downtown(zone: Zone, downtown: Tuple[float, float]) -> float:
    """Euclidean centroid distance in km."""
    return math.hypot(zone.x - downtown[0], zone.y - downtown[1]) / 1000.0


def with_population(zones: Sequence[Zone], factor: float) -> List[Zone]:
    return [replace(z, population=z.population * factor) for z in zones]
