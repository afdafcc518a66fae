"""Congestion-aware automobile accessibility on a gridded metropolitan area."""

from .accessibility import (
    DecayParams,
    decay,
    detect_peaks,
    global_metrics,
    global_profile,
    peak_gap,
    zone_accessibility,
    zone_metrics,
)
from .network import Link, Network, Node, SpeedProfile, TurnRestriction, fifo_check, fifo_repair
from .routing import build_search_graph, od_cost_tensor, td_one_to_all

__version__ = "0.1.0"

__all__ = [
    "DecayParams",
    "decay",
    "detect_peaks",
    "global_metrics",
    "global_profile",
    "peak_gap",
    "zone_accessibility",
    "zone_metrics",
    "Link",
    "Network",
    "Node",
    "SpeedProfile",
    "TurnRestriction",
    "fifo_check",
    "fifo_repair",
    "build_search_graph",
    "od_cost_tensor",
    "td_one_to_all",
]
