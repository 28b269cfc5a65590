"""Shortest paths, all-or-nothing loading, and closure flow differences."""

from __future__ import annotations

import csv
import heapq
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .errors import NetworkError, NoPathError
from .netmodel import ClosureScenario, Network, ODMatrix, apply_closure

ITINERARY_KINDS = ("macro_left", "macro_right", "micro", "hybrid", "main")

# class filter implied by each itinerary kind; None means any class
KIND_FILTER = {
    "macro_left": frozenset({"highway"}),
    "macro_right": frozenset({"highway"}),
    "micro": frozenset({"local"}),
    "hybrid": None,
    "main": None,
}

LinkFlows = dict  # link id -> veh/h


@dataclass(frozen=True)
class Itinerary:
    links: tuple
    kind: str
    length_km: float
    free_flow_min: float

    def nodes(self, net: Network) -> list:
        seq = [net.links[self.links[0]].from_node]
        seq.extend(net.links[l].to_node for l in self.links)
        return seq


def make_itinerary(net: Network, link_ids: Iterable[str], kind: str = "main") -> Itinerary:
    """Validate a link sequence as an itinerary of the given kind."""
    link_ids = tuple(link_ids)
    if kind not in ITINERARY_KINDS:
        raise NetworkError(f"unknown itinerary kind {kind!r}")
    if not link_ids:
        raise NetworkError("itinerary must contain at least one link")
    if len(set(link_ids)) != len(link_ids):
        raise NetworkError("itinerary repeats a link")
    for lid in link_ids:
        if lid not in net.links:
            raise NetworkError(f"itinerary link {lid!r} not in network")
    for a, b in zip(link_ids[:-1], link_ids[1:]):
        if net.links[a].to_node != net.links[b].from_node:
            raise NetworkError(f"itinerary links {a} and {b} are not consecutive")
    allowed = KIND_FILTER[kind]
    if allowed is not None:
        bad = [l for l in link_ids if net.links[l].road_class not in allowed]
        if bad:
            raise NetworkError(f"{kind} itinerary contains links of other road classes: {bad}")
    length = 0.0
    cost = 0.0
    for lid in link_ids:
        length += net.links[lid].length_km
        cost += net.links[lid].free_flow_min
    return Itinerary(links=link_ids, kind=kind, length_km=length, free_flow_min=cost)


def shortest_path(net: Network, origin: str, destination: str,
                  class_filter: Optional[Iterable[str]] = None,
                  kind: str = "main") -> Itinerary:
    """Minimum free-flow-time path over open links.

    Among equal-cost paths the lexicographically smallest link-id sequence
    wins. Labels are ``(cost, path)`` tuples, which keeps Dijkstra exact for
    this combined order because extending two paths to the same node by the
    same link preserves their ordering.
    """
    for n in (origin, destination):
        if n not in net.nodes:
            raise NetworkError(f"unknown node {n!r}")
    if origin == destination:
        raise NetworkError("origin and destination must differ")
    allowed = frozenset(class_filter) if class_filter is not None else None
    if origin in net.barrier_nodes or destination in net.barrier_nodes:
        raise NoPathError(f"no path from {origin} to {destination}: endpoint is a barrier")

    heap = [(0.0, (), origin)]
    done = set()
    while heap:
        cost, path, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == destination:
            return make_itinerary(net, path, kind)
        for lid in net.out_links(node):
            link = net.links[lid]
            if not net.is_open(lid) or link.to_node in done:
                continue
            if allowed is not None and link.road_class not in allowed:
                continue
            heapq.heappush(heap, (cost + link.free_flow_min, path + (lid,), link.to_node))
    flt = f" with classes {sorted(allowed)}" if allowed is not None else ""
    raise NoPathError(f"no open path from {origin} to {destination}{flt}")


def aon_assign(net: Network, od: ODMatrix, class_filter: Optional[Iterable[str]] = None) -> LinkFlows:
    """Load every OD pair's demand onto its single shortest path."""
    flows = {lid: 0.0 for lid in sorted(net.links)}
    for o, d in od.pairs():
        demand = od.entries[(o, d)]
        if demand == 0:
            continue
        try:
            path = shortest_path(net, o, d, class_filter)
        except NoPathError as exc:
            raise NoPathError(f"OD pair ({o}, {d}) is unroutable: {exc}") from None
        for lid in path.links:
            flows[lid] += demand
    return flows


def disruption_diff(base: Mapping[str, float], closed: Mapping[str, float]) -> tuple[LinkFlows, LinkFlows]:
    """Split the change in link flows into ``(disrupted, diverted)``."""
    if set(base) != set(closed):
        only = sorted(set(base) ^ set(closed))
        raise NetworkError(f"flow maps cover different links: {only[:10]}")
    disrupted, diverted = {}, {}
    for lid in sorted(base):
        delta = base[lid] - closed[lid]
        disrupted[lid] = delta if delta > 0 else 0.0
        diverted[lid] = -delta if delta < 0 else 0.0
    return disrupted, diverted


def extract_itinerary(net: Network, closure: ClosureScenario, start: str, end: str,
                      kind: str) -> Itinerary:
    """Alternative route around a closure, restricted to the road classes of ``kind``."""
    if kind not in KIND_FILTER:
        raise NetworkError(f"unknown itinerary kind {kind!r}")
    closed = apply_closure(net, closure)
    return shortest_path(closed, start, end, KIND_FILTER[kind], kind=kind)


def write_link_flows(flows: Mapping[str, float], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link_id", "flow_vph"])
        for lid in sorted(flows):
            w.writerow([lid, repr(float(flows[lid]))])


def read_link_flows(path) -> LinkFlows:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return {row["link_id"]: float(row["flow_vph"]) for row in csv.DictReader(fh)}


def write_itinerary(net: Network, itin: Itinerary, csv_path, json_path=None) -> None:
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seq", "link_id", "length_km"])
        for i, lid in enumerate(itin.links, start=1):
            w.writerow([i, lid, repr(net.links[lid].length_km)])
    if json_path is not None:
        nodes = itin.nodes(net)
        summary = {"kind": itin.kind, "origin": nodes[0], "destination": nodes[-1],
                   "n_links": len(itin.links), "length_km": itin.length_km,
                   "free_flow_min": itin.free_flow_min, "links": list(itin.links)}
        Path(json_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")
