"""Time-dependent shortest paths on an edge-based expansion of the road network.

Search states are directed links, so a banned turn is simply a missing
transition. Each zone adds two virtual states: an origin state, whose label is
the instant the trip reaches the zone's attachment node, and a target state,
entered from any link arriving at that node (or from the origin state of a zone
sharing the node) after the connector time.
"""

from __future__ import annotations

import heapq
import logging
import math
import multiprocessing
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numba
import numpy as np

from .network import LATTICE_HI, LATTICE_LO, Network, TurnRestriction

logger = logging.getLogger(__name__)

UNREACHABLE = math.inf
DEFAULT_CONNECTOR_KMH = 20.0


class RoutingError(ValueError):
    pass


class DetachedZoneError(RoutingError):
    """Raised when a query starts from a zone with no network attachment."""


@dataclass(frozen=True)
class Attachment:
    node: str
    connector_minutes: float


def attach_zones(
    zones: Sequence,
    network: Network,
    connector_kmh: float = DEFAULT_CONNECTOR_KMH,
    max_connector_m: Optional[float] = None,
) -> List[Optional[Attachment]]:
    """Connect every zone centroid to its nearest network node.

    Ties go to the node listed first. A zone farther than ``max_connector_m``
    from every node stays detached (``None``).
    """
    if connector_kmh <= 0:
        raise RoutingError("connector speed must be positive")
    node_ids = list(network.nodes)
    if not node_ids:
        return [None] * len(zones)
    xy = np.array([(network.nodes[n].x, network.nodes[n].y) for n in node_ids])
    out: List[Optional[Attachment]] = []
    for zone in zones:
        d = np.hypot(xy[:, 0] - zone.x, xy[:, 1] - zone.y)
        k = int(np.argmin(d))
        if max_connector_m is not None and d[k] > max_connector_m:
            out.append(None)
            continue
        out.append(Attachment(node_ids[k], float(d[k]) / 1000.0 / connector_kmh * 60.0))
    return out


@dataclass(frozen=True, eq=False)
class SearchGraph:
    """Edge-based search graph in compressed sparse row form.

    States ``0 .. n_links-1`` are directed links in network order; zone ``z``
    owns origin state ``n_links + 2z`` and target state ``n_links + 2z + 1``.
    Entering state ``s`` at minute ``tau`` costs ``freeflow[s]`` when
    ``lattice_offset[s] < 0`` or ``tau`` lies outside the congested window,
    otherwise a linear interpolation of ``lattice`` starting at the offset.
    """

    link_ids: Tuple[str, ...]
    zone_ids: Tuple[str, ...]
    attachments: Tuple[Optional[Attachment], ...]
    succ_ptr: np.ndarray
    succ_idx: np.ndarray
    lattice_offset: np.ndarray
    freeflow: np.ndarray
    lattice: np.ndarray
    turn_count: int
    turns_at: Dict[str, int]

    @property
    def n_links(self) -> int:
        return len(self.link_ids)

    @property
    def n_states(self) -> int:
        return self.n_links + 2 * len(self.zone_ids)

    def zone_index(self, zone) -> int:
        if isinstance(zone, (int, np.integer)):
            if not 0 <= zone < len(self.zone_ids):
                raise RoutingError(f"zone index {zone} out of range")
            return int(zone)
        try:
            return self.zone_ids.index(zone)
        except ValueError:
            raise RoutingError(f"unknown zone {zone!r}") from None

    def origin_state(self, z: int) -> int:
        return self.n_links + 2 * z

    def target_state(self, z: int) -> int:
        return self.n_links + 2 * z + 1

    @property
    def target_states(self) -> np.ndarray:
        return self.n_links + 2 * np.arange(len(self.zone_ids)) + 1

    def freeflow_graph(self) -> "SearchGraph":
        """Same topology with every link at its free-flow time."""
        return replace(self, lattice_offset=np.full_like(self.lattice_offset, -1))


def build_search_graph(
    network: Network,
    restrictions: Optional[Sequence[TurnRestriction]] = None,
    zones: Sequence = (),
    connector_kmh: float = DEFAULT_CONNECTOR_KMH,
    max_connector_m: Optional[float] = None,
) -> SearchGraph:
    """Expand ``network`` into link states with every turn not banned by ``restrictions``."""
    if restrictions is None:
        restrictions = network.restrictions
    links = network.links
    index = {link.id: k for k, link in enumerate(links)}
    banned = set()
    for r in restrictions:
        if r.from_link not in index or r.to_link not in index:
            raise RoutingError(f"turn restriction at {r.via_node} references an unknown link")
        banned.add((index[r.from_link], r.via_node, index[r.to_link]))

    out_by_node: Dict[str, List[int]] = {n: [] for n in network.nodes}
    for k, link in enumerate(links):
        out_by_node[link.from_node].append(k)

    attachments = attach_zones(zones, network, connector_kmh, max_connector_m)
    zones_at_node: Dict[str, List[int]] = {}
    for z, att in enumerate(attachments):
        if att is not None:
            zones_at_node.setdefault(att.node, []).append(z)

    n_links = len(links)
    n_states = n_links + 2 * len(zones)
    successors: List[List[int]] = [[] for _ in range(n_states)]
    turn_count = 0
    turns_at: Dict[str, int] = {n: 0 for n in network.nodes}
    for k, link in enumerate(links):
        via = link.to_node
        for nxt in out_by_node[via]:
            if (k, via, nxt) in banned:
                continue
            successors[k].append(nxt)
            turn_count += 1
            turns_at[via] += 1
        successors[k].extend(n_links + 2 * z + 1 for z in zones_at_node.get(via, ()))
    for z, att in enumerate(attachments):
        if att is None:
            continue
        o = n_links + 2 * z
        successors[o].extend(out_by_node[att.node])
        successors[o].extend(n_links + 2 * j + 1 for j in zones_at_node[att.node] if j != z)

    succ_ptr = np.zeros(n_states + 1, dtype=np.int64)
    succ_ptr[1:] = np.cumsum([len(s) for s in successors])
    succ_idx = np.fromiter((s for row in successors for s in row), dtype=np.int64, count=int(succ_ptr[-1]))

    freeflow = np.zeros(n_states)
    offsets = np.full(n_states, -1, dtype=np.int64)
    width = LATTICE_HI - LATTICE_LO + 1
    chunks = []
    for k, link in enumerate(links):
        f = network.ttfs[link.id]
        freeflow[k] = f.freeflow
        if not f.is_constant:
            offsets[k] = len(chunks) * width
            chunks.append(f.values[LATTICE_LO : LATTICE_HI + 1])
    for z, att in enumerate(attachments):
        if att is not None:
            freeflow[n_links + 2 * z + 1] = att.connector_minutes
    lattice = np.concatenate(chunks) if chunks else np.zeros(0)

    return SearchGraph(
        link_ids=tuple(link.id for link in links),
        zone_ids=tuple(str(z.id) for z in zones),
        attachments=tuple(attachments),
        succ_ptr=succ_ptr,
        succ_idx=succ_idx,
        lattice_offset=offsets,
        freeflow=freeflow,
        lattice=lattice,
        turn_count=turn_count,
        turns_at=turns_at,
    )


@numba.njit(cache=True)
def _label_setting(succ_ptr, succ_idx, offsets, freeflow, lattice, lo, hi, sources, source_labels, stop):
    n = succ_ptr.shape[0] - 1
    labels = np.full(n, np.inf)
    settled = np.zeros(n, dtype=np.bool_)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for k in range(sources.shape[0]):
        s = sources[k]
        if source_labels[k] < labels[s]:
            labels[s] = source_labels[k]
            heapq.heappush(heap, (source_labels[k], s))
    while heap:
        tau, s = heapq.heappop(heap)
        if settled[s]:
            continue
        settled[s] = True
        if s == stop:
            break
        for k in range(succ_ptr[s], succ_ptr[s + 1]):
            nxt = succ_idx[k]
            if settled[nxt]:
                continue
            off = offsets[nxt]
            if off < 0 or tau < lo or tau >= hi:
                arrive = tau + freeflow[nxt]
            else:
                x = tau - lo
                i = int(x)
                v0 = lattice[off + i]
                arrive = tau + v0 + (lattice[off + i + 1] - v0) * (x - i)
            if arrive < labels[nxt]:
                labels[nxt] = arrive
                heapq.heappush(heap, (arrive, nxt))
    return labels


def state_labels(graph: SearchGraph, sources: Sequence[Tuple[int, float]], stop: int = -1) -> np.ndarray:
    """Earliest arrival at every state from (state, start minute) sources."""
    states = np.array([s for s, _ in sources], dtype=np.int64)
    starts = np.array([t for _, t in sources], dtype=np.float64)
    return _label_setting(
        graph.succ_ptr, graph.succ_idx, graph.lattice_offset, graph.freeflow, graph.lattice,
        float(LATTICE_LO), float(LATTICE_HI), states, starts, stop,
    )


@dataclass(frozen=True)
class ArrivalLabels:
    origin: str
    depart: float
    arrival: np.ndarray  # minute-of-day per zone, UNREACHABLE if not reached

    @property
    def travel_times(self) -> np.ndarray:
        return self.arrival - self.depart


def _origin_source(graph: SearchGraph, z: int, depart: float) -> Tuple[int, float]:
    if not 0 <= depart < 1440:
        raise RoutingError("departure must lie in [0, 1440)")
    att = graph.attachments[z]
    if att is None:
        raise DetachedZoneError(f"zone {graph.zone_ids[z]} is not attached to the network")
    return graph.origin_state(z), depart + att.connector_minutes


def td_one_to_all(graph: SearchGraph, origin, depart: float) -> ArrivalLabels:
    """Earliest arrival at every zone leaving ``origin`` at minute ``depart``."""
    z = graph.zone_index(origin)
    labels = state_labels(graph, [_origin_source(graph, z, depart)])
    arrival = labels[graph.target_states]
    arrival[z] = depart
    return ArrivalLabels(graph.zone_ids[z], depart, arrival)


def td_one_to_one(graph: SearchGraph, origin, target, depart: float) -> float:
    """Travel minutes from ``origin`` to ``target``; the search stops once the target settles."""
    z = graph.zone_index(origin)
    j = graph.zone_index(target)
    if z == j:
        return 0.0
    t_state = graph.target_state(j)
    labels = state_labels(graph, [_origin_source(graph, z, depart)], stop=t_state)
    return float(labels[t_state] - depart)


def multi_source_arrivals(graph: SearchGraph, origins: Sequence, depart: float) -> np.ndarray:
    """Per zone, the earliest arrival over trips leaving any of ``origins`` at ``depart``."""
    zs = [graph.zone_index(o) for o in origins]
    labels = state_labels(graph, [_origin_source(graph, z, depart) for z in zs])
    arrival = labels[graph.target_states]
    arrival[zs] = depart
    return arrival


def departure_schedule(start: float = 0.0, step: float = 15.0, count: int = 96) -> np.ndarray:
    if count < 1 or step <= 0:
        raise RoutingError("schedule needs count >= 1 and a positive step")
    sched = start + step * np.arange(count, dtype=float)
    if sched[0] < 0 or sched[-1] >= 1440:
        raise RoutingError("departures must lie within [0, 1440)")
    return sched


@dataclass(frozen=True)
class CostTensor:
    """Travel minutes ``costs[i, j, t]`` from origin ``i`` to zone ``j`` leaving at ``departures[t]``."""

    costs: np.ndarray
    origin_ids: Tuple[str, ...]
    zone_ids: Tuple[str, ...]
    departures: np.ndarray


# Worker processes inherit the graph through the pool initializer.
_worker_graph: Optional[SearchGraph] = None
_worker_fn: Optional[Callable] = None


def _init_worker(graph, fn):
    global _worker_graph, _worker_fn
    _worker_graph, _worker_fn = graph, fn


def _run_worker(args):
    return _worker_fn(_worker_graph, *args)


def map_origins(graph: SearchGraph, fn: Callable, tasks: Sequence[tuple], workers: int = 1) -> list:
    """Evaluate ``fn(graph, *task)`` for every task, preserving task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(graph, *task) for task in tasks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers, initializer=_init_worker, initargs=(graph, fn)) as pool:
        return pool.map(_run_worker, tasks, chunksize=max(1, len(tasks) // (4 * workers)))


def _cost_rows(graph: SearchGraph, z: int, departures: np.ndarray) -> np.ndarray:
    rows = np.empty((len(graph.zone_ids), len(departures)))
    for k, t in enumerate(departures):
        rows[:, k] = td_one_to_all(graph, z, float(t)).travel_times
    return rows


def od_cost_tensor(
    graph: SearchGraph,
    departures: Sequence[float],
    origins: Optional[Sequence] = None,
    workers: int = 1,
) -> CostTensor:
    """One time-dependent search per (origin, departure); intrazonal cost is zero."""
    departures = np.asarray(departures, dtype=float)
    if departures.size == 0 or np.any(np.diff(departures) <= 0):
        raise RoutingError("departure schedule must be non-empty and strictly increasing")
    if origins is None:
        zs = list(range(len(graph.zone_ids)))
    else:
        zs = [graph.zone_index(o) for o in origins]
    rows = map_origins(graph, _cost_rows, [(z, departures) for z in zs], workers)
    costs = np.stack(rows) if rows else np.empty((0, len(graph.zone_ids), departures.size))
    return CostTensor(costs, tuple(graph.zone_ids[z] for z in zs), graph.zone_ids, departures)
