"""Congested segment speeds and travel times.

Speed falls quadratically with the flow per metre of working lane width:

    v = max(v_f - alpha * (q / (L_u * n))**2, floor)

with q in veh/h, L_u in metres and n lanes. The quotient is kept exactly as
calibrated (alpha = 1e-4), not re-derived into consistent units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import NetworkError, TemplanError
from .netmodel import DEFAULT_LANE_WIDTH_M, Network


@dataclass(frozen=True)
class SpeedFlowParams:
    alpha: float = 1e-4
    lane_width_m: float = DEFAULT_LANE_WIDTH_M
    floor_speed_kmh: float = 5.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise TemplanError("alpha must be > 0")
        if not self.floor_speed_kmh > 0:
            raise TemplanError("floor_speed_kmh must be > 0")
        if not self.lane_width_m > 0:
            raise TemplanError("lane_width_m must be > 0")


DEFAULT_PARAMS = SpeedFlowParams()


def segment_speed(q: float, v_f: float, n: int, p: SpeedFlowParams = DEFAULT_PARAMS) -> float:
    """Congested speed in km/h, never below ``p.floor_speed_kmh``."""
    if q < 0 or v_f <= 0 or n < 1:
        raise TemplanError(f"invalid segment state q={q}, v_f={v_f}, n={n}")
    x = q / (p.lane_width_m * n)
    return max(v_f - p.alpha * x * x, p.floor_speed_kmh)


def segment_time(length_km: float, q: float, v_f: float, n: int,
                 p: SpeedFlowParams = DEFAULT_PARAMS) -> float:
    """Travel time in minutes."""
    if length_km <= 0:
        raise TemplanError(f"segment length must be > 0, got {length_km}")
    return 60.0 * length_km / segment_speed(q, v_f, n, p)


def route_time(net: Network, link_ids: Sequence[str],
               background: Optional[Mapping[str, float]] = None,
               added: Optional[Mapping[str, float]] = None,
               p: Optional[SpeedFlowParams] = None) -> float:
    """Sum of segment times along ``link_ids`` with q = background + added.

    Links absent from a flow map carry zero flow there. When ``p`` is None the
    lane width of each link is used.
    """
    link_ids = getattr(link_ids, "links", link_ids)
    background = background or {}
    added = added or {}
    total = 0.0
    for lid in link_ids:
        try:
            link = net.links[lid]
        except KeyError:
            raise NetworkError(f"itinerary link {lid!r} not in network") from None
        params = p or SpeedFlowParams(lane_width_m=link.lane_width_m)
        q = background.get(lid, 0.0) + added.get(lid, 0.0)
        total += segment_time(link.length_km, q, link.free_flow_kmh, link.lanes, params)
    return total


def write_route_times(rows: Sequence[tuple], path) -> None:
    """Write ``(itinerary, travel_time_min, length_km)`` rows."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["itinerary", "travel_time_min", "length_km"])
        for name, t, length in rows:
            w.writerow([name, f"{t:.1f}", f"{length:.1f}"])
