"""Road network with entry-time-dependent link travel times.

Speed profiles store the fraction of free-flow speed every 5 minutes between
04:30 and 21:20. A link's traversal time is fixed by the speed in force when
the vehicle enters it. Travel-time functions are sampled on a one-minute
lattice over the day, interpolated linearly between lattice points, and
repaired so that later entry never yields an earlier exit (FIFO).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

PROFILE_START = 270  # 04:30
PROFILE_END = 1280  # 21:20
PROFILE_STEP = 5
PROFILE_LENGTH = (PROFILE_END - PROFILE_START) // PROFILE_STEP + 1  # 203
DAY_MINUTES = 1440
FIFO_TOL = 1e-9

# Outside [LATTICE_LO, LATTICE_HI] every travel-time function equals its
# free-flow value, before and after repair.
LATTICE_LO = PROFILE_START - 1
LATTICE_HI = PROFILE_END + 1

MAX_FRC = 6


class NetworkError(ValueError):
    """Raised when network elements violate their invariants."""


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise NetworkError(f"node {self.id}: coordinates must be finite")


@dataclass(frozen=True, eq=False)
class SpeedProfile:
    """Fractions of free-flow speed at each 5-minute mark from 04:30 to 21:20."""

    id: str
    breakpoints: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.breakpoints, dtype=float)
        if values.shape != (PROFILE_LENGTH,):
            raise NetworkError(
                f"profile {self.id}: profile length must be {PROFILE_LENGTH}, got {values.size}"
            )
        if not np.all((values > 0.0) & (values <= 1.0)):
            raise NetworkError(f"profile {self.id}: values must lie in (0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "breakpoints", values)

    def __eq__(self, other):
        if not isinstance(other, SpeedProfile):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.breakpoints, other.breakpoints)

    def __hash__(self):
        return hash(self.id)

    @property
    def is_free_flow(self) -> bool:
        return bool(np.all(self.breakpoints == 1.0))

    def scaled(self, factor: float) -> "SpeedProfile":
        if not 0.0 < factor <= 1.0:
            raise NetworkError("scale factor must lie in (0, 1]")
        return SpeedProfile(self.id, self.breakpoints * factor)


@dataclass(frozen=True)
class Link:
    """Directed road segment. ``profile`` of None means always free flow."""

    id: str
    from_node: str
    to_node: str
    length_m: float
    freeflow_kmh: float
    frc: int = 6
    profile: Optional[SpeedProfile] = None
    loop: bool = False

    def __post_init__(self):
        if not self.length_m > 0:
            raise NetworkError(f"link {self.id}: length must be positive")
        if not self.freeflow_kmh > 0:
            raise NetworkError(f"link {self.id}: free-flow speed must be positive")
        if not (isinstance(self.frc, (int, np.integer)) and 0 <= self.frc <= MAX_FRC):
            raise NetworkError(f"link {self.id}: FRC must be an integer in 0..{MAX_FRC}")
        if self.from_node == self.to_node and not self.loop:
            raise NetworkError(f"link {self.id}: from and to node are equal")

    @property
    def freeflow_minutes(self) -> float:
        return self.length_m / 1000.0 / self.freeflow_kmh * 60.0


@dataclass(frozen=True)
class TurnRestriction:
    """A banned manoeuvre from ``from_link`` onto ``to_link`` at ``via_node``."""

    via_node: str
    from_link: str
    to_link: str
    kind: str = "banned"


def profile_fraction(profile: Optional[SpeedProfile], t: float) -> float:
    """Fraction of free-flow speed in force at minute-of-day ``t``."""
    if profile is None or t < PROFILE_START or t > PROFILE_END:
        return 1.0
    x = (t - PROFILE_START) / PROFILE_STEP
    i = int(x)
    values = profile.breakpoints
    if i >= PROFILE_LENGTH - 1:
        return float(values[-1])
    w = x - i
    if w == 0.0:
        return float(values[i])
    return float(values[i] + (values[i + 1] - values[i]) * w)


def link_entry_travel_time(link: Link, t: float) -> float:
    """Minutes needed to traverse ``link`` when entering it at minute ``t``."""
    return link.length_m / 1000.0 / (link.freeflow_kmh * profile_fraction(link.profile, t)) * 60.0


def _fraction_lattice(profile: Optional[SpeedProfile]) -> np.ndarray:
    fractions = np.ones(DAY_MINUTES + 1)
    if profile is not None:
        minutes = np.arange(PROFILE_START, PROFILE_END + 1)
        marks = PROFILE_START + PROFILE_STEP * np.arange(PROFILE_LENGTH)
        fractions[PROFILE_START : PROFILE_END + 1] = np.interp(minutes, marks, profile.breakpoints)
        # keep breakpoint values exact
        fractions[marks] = profile.breakpoints
    return fractions


@dataclass(frozen=True, eq=False)
class TravelTimeFunction:
    """Piecewise-linear traversal time over entry minutes 0..1440.

    ``values[k]`` is the traversal time for entry at minute ``k``; entries at or
    after minute 1440 traverse at free flow.
    """

    link_id: str
    freeflow: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (DAY_MINUTES + 1,):
            raise NetworkError("travel-time lattice must have 1441 entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_link(cls, link: Link) -> "TravelTimeFunction":
        ff = link.freeflow_minutes
        if link.profile is None:
            return cls(link.id, ff, np.full(DAY_MINUTES + 1, ff))
        fractions = _fraction_lattice(link.profile)
        tt = link.length_m / 1000.0 / (link.freeflow_kmh * fractions) * 60.0
        return cls(link.id, ff, tt)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.freeflow))

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ValueError("entry time must be non-negative")
        if t >= DAY_MINUTES:
            return self.freeflow
        i = int(t)
        v0 = self.values[i]
        return float(v0 + (self.values[i + 1] - v0) * (t - i))

    def arrival(self, t: float) -> float:
        return t + self(t)

    def arrivals(self) -> np.ndarray:
        return np.arange(DAY_MINUTES + 1) + self.values


def fifo_check(f: TravelTimeFunction, tol: float = FIFO_TOL) -> List[Tuple[int, int]]:
    """All lattice pairs (t1, t2), t1 < t2, whose exits are out of order by more than ``tol``."""
    a = f.arrivals()
    # suffix minimum strictly after each point
    later_min = np.minimum.accumulate(a[::-1])[::-1]
    later_min = np.append(later_min[1:], np.inf)
    pairs = []
    for t1 in np.nonzero(a > later_min + tol)[0]:
        for t2 in np.nonzero(a[t1 + 1 :] < a[t1] - tol)[0] + t1 + 1:
            pairs.append((int(t1), int(t2)))
    return pairs


def is_fifo(f: TravelTimeFunction, tol: float = FIFO_TOL) -> bool:
    a = f.arrivals()
    return bool(np.all(np.diff(a) >= -tol))


def fifo_repair(f: TravelTimeFunction) -> TravelTimeFunction:
    """Lower envelope of exit times under free waiting before entering the link.

    The repaired exit time at lattice minute ``t`` is the earliest exit among all
    entries at or after ``t``.
    """
    a = f.arrivals()
    envelope = np.minimum.accumulate(a[::-1])[::-1]
    if np.array_equal(envelope, a):
        return f
    lowered = envelope < a
    values = np.where(lowered, envelope - np.arange(DAY_MINUTES + 1), f.values)
    return TravelTimeFunction(f.link_id, f.freeflow, values)


@dataclass(frozen=True)
class RepairRecord:
    link_id: str
    points_changed: int
    max_reduction: float


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable road network; travel-time functions are built and repaired on construction."""

    nodes: Mapping[str, Node]
    links: Sequence[Link]
    restrictions: Sequence[TurnRestriction] = ()
    ttfs: Dict[str, TravelTimeFunction] = field(init=False, repr=False)
    _by_id: Dict[str, Link] = field(init=False, repr=False)
    repair_report: Tuple[RepairRecord, ...] = field(init=False, repr=False)

    def __post_init__(self):
        nodes = dict(self.nodes)
        links = tuple(self.links)
        restrictions = tuple(self.restrictions)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "restrictions", restrictions)

        by_id: Dict[str, Link] = {}
        for link in links:
            if link.id in by_id:
                raise NetworkError(f"duplicate link id {link.id}")
            for end in (link.from_node, link.to_node):
                if end not in nodes:
                    raise NetworkError(f"link {link.id}: unknown node {end}")
            by_id[link.id] = link
        for r in restrictions:
            if r.from_link not in by_id:
                raise NetworkError(f"turn restriction at {r.via_node}: unknown link {r.from_link}")
            if r.to_link not in by_id:
                raise NetworkError(f"turn restriction at {r.via_node}: unknown link {r.to_link}")
            if by_id[r.from_link].to_node != r.via_node:
                raise NetworkError(f"turn restriction: link {r.from_link} does not enter {r.via_node}")
            if by_id[r.to_link].from_node != r.via_node:
                raise NetworkError(f"turn restriction: link {r.to_link} does not leave {r.via_node}")

        ttfs = {}
        report = []
        for link in links:
            raw = TravelTimeFunction.from_link(link)
            fixed = fifo_repair(raw)
            if fixed is not raw:
                diff = raw.values - fixed.values
                report.append(RepairRecord(link.id, int(np.count_nonzero(diff)), float(diff.max())))
            ttfs[link.id] = fixed
        object.__setattr__(self, "ttfs", ttfs)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "repair_report", tuple(report))

    def link(self, link_id: str) -> Link:
        return self._by_id[link_id]

    def out_links(self, node_id: str) -> List[Link]:
        return [link for link in self.links if link.from_node == node_id]

    def in_links(self, node_id: str) -> List[Link]:
        return [link for link in self.links if link.to_node == node_id]

    @property
    def profiles(self) -> Dict[str, SpeedProfile]:
        return {l.profile.id: l.profile for l in self.links if l.profile is not None}

    def freeflow(self) -> "Network":
        """Same network with every profile removed."""
        return Network(self.nodes, [replace(l, profile=None) for l in self.links], self.restrictions)

    def scaled(self, factor: float) -> "Network":
        """Same network with every profile fraction multiplied by ``factor``."""
        cache: Dict[str, SpeedProfile] = {}
        links = []
        for link in self.links:
            if link.profile is None:
                links.append(link)
                continue
            p = cache.get(link.profile.id)
            if p is None:
                p = cache[link.profile.id] = link.profile.scaled(factor)
            links.append(replace(link, profile=p))
        return Network(self.nodes, links, self.restrictions)


def scan_fifo_violations(ttfs: Iterable[TravelTimeFunction], tol: float = FIFO_TOL) -> int:
    """Count adjacent one-minute steps whose exit time decreases by more than ``tol``."""
    return sum(int(np.count_nonzero(np.diff(f.arrivals()) < -tol)) for f in ttfs)
