"""Road network, closures, zones and OD demand; GeoJSON / CSV ingestion.

Links are directed: a two-way road is stored as two link records. Every
object here is immutable; closures return new network snapshots.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

from .errors import NetworkError

DEFAULT_LANE_WIDTH_M = 3.5
EARTH_RADIUS_KM = 6371.0088
LENGTH_MISMATCH_TOL = 0.10
ROAD_CLASSES = ("highway", "local")


class LengthMismatchWarning(UserWarning):
    """Declared link length differs from the geometry length by more than 10%."""


@dataclass(frozen=True)
class Link:
    id: str
    from_node: str
    to_node: str
    length_km: float
    lanes: int
    free_flow_kmh: float
    capacity_vph: float
    road_class: str = "highway"
    lane_width_m: float = DEFAULT_LANE_WIDTH_M
    closed: bool = False
    geometry: Optional[tuple] = None

    def __post_init__(self):
        if not self.length_km > 0:
            raise NetworkError(f"link {self.id}: length_km must be > 0, got {self.length_km}")
        if int(self.lanes) != self.lanes or self.lanes < 1:
            raise NetworkError(f"link {self.id}: lanes must be an integer >= 1, got {self.lanes}")
        # the 5 km/h speed floor must be a reduction, not an increase
        if not self.free_flow_kmh > 5:
            raise NetworkError(f"link {self.id}: free_flow_kmh must be > 5, got {self.free_flow_kmh}")
        if not self.capacity_vph > 0:
            raise NetworkError(f"link {self.id}: capacity_vph must be > 0, got {self.capacity_vph}")
        if not self.lane_width_m > 0:
            raise NetworkError(f"link {self.id}: lane_width_m must be > 0, got {self.lane_width_m}")
        if self.road_class not in ROAD_CLASSES:
            raise NetworkError(f"link {self.id}: road_class must be one of {ROAD_CLASSES}, got {self.road_class!r}")

    @property
    def free_flow_min(self) -> float:
        return 60.0 * self.length_km / self.free_flow_kmh


@dataclass(frozen=True)
class Network:
    """Directed road graph.

    ``nodes`` maps node id to ``(lon, lat)`` or ``None``; ``links`` maps link id
    to :class:`Link`. ``barrier_nodes`` are impassable: no open link may enter
    or leave them.
    """

    nodes: Mapping[str, Optional[tuple]]
    links: Mapping[str, Link]
    barrier_nodes: frozenset = frozenset()
    _out: Mapping[str, tuple] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = dict(self.nodes)
        links = dict(self.links)
        for lid, link in links.items():
            if lid != link.id:
                raise NetworkError(f"link key {lid!r} does not match link id {link.id!r}")
            for end in (link.from_node, link.to_node):
                if end not in nodes:
                    raise NetworkError(f"link {lid}: dangling endpoint {end!r}")
        unknown = set(self.barrier_nodes) - set(nodes)
        if unknown:
            raise NetworkError(f"unknown barrier node(s): {sorted(unknown)}")
        out: dict[str, list] = {n: [] for n in nodes}
        for lid in sorted(links):
            out[links[lid].from_node].append(lid)
        object.__setattr__(self, "nodes", MappingProxyType(nodes))
        object.__setattr__(self, "links", MappingProxyType(links))
        object.__setattr__(self, "barrier_nodes", frozenset(self.barrier_nodes))
        object.__setattr__(self, "_out", MappingProxyType({n: tuple(v) for n, v in out.items()}))

    @classmethod
    def from_links(cls, links: Iterable[Link], nodes: Optional[Mapping] = None) -> "Network":
        """Build a network, creating coordinate-less nodes for unseen endpoints."""
        links = list(links)
        ids = [l.id for l in links]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise NetworkError(f"duplicate link id(s): {dupes}")
        all_nodes = dict(nodes or {})
        for l in links:
            all_nodes.setdefault(l.from_node, None)
            all_nodes.setdefault(l.to_node, None)
        return cls(nodes=all_nodes, links={l.id: l for l in links})

    def out_links(self, node: str) -> tuple:
        """Ids of all links leaving ``node`` (open or not), sorted."""
        return self._out[node]

    def is_open(self, link_id: str) -> bool:
        link = self.links[link_id]
        return not (link.closed or link.from_node in self.barrier_nodes
                    or link.to_node in self.barrier_nodes)

    def adjacency(self, open_only: bool = True) -> dict:
        """``{node: [successor, ...]}`` over (open) links."""
        adj: dict = {n: [] for n in self.nodes}
        for lid in sorted(self.links):
            if open_only and not self.is_open(lid):
                continue
            l = self.links[lid]
            adj[l.from_node].append(l.to_node)
        return adj


@dataclass(frozen=True)
class ClosureScenario:
    closed_link_ids: tuple
    duration_hr: float
    start_clock: float = 12.0
    barrier_node_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "closed_link_ids", tuple(self.closed_link_ids))
        object.__setattr__(self, "barrier_node_ids", tuple(self.barrier_node_ids))
        if not self.closed_link_ids:
            raise NetworkError("closure must list at least one link")
        if not self.duration_hr > 0:
            raise NetworkError(f"closure duration must be > 0, got {self.duration_hr}")


@dataclass(frozen=True)
class ODMatrix:
    entries: Mapping[tuple, float]
    time_label: str = "static"

    def __post_init__(self):
        for (o, d), v in self.entries.items():
            if v < 0 or math.isnan(v):
                raise NetworkError(f"negative demand {v} for pair ({o}, {d})")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @property
    def total(self) -> float:
        return sum(self.entries.values())

    def pairs(self) -> list:
        """OD pairs in deterministic (sorted) order."""
        return sorted(self.entries)

    def validate_against(self, net: Network) -> None:
        for o, d in self.pairs():
            for n in (o, d):
                if n not in net.nodes:
                    raise NetworkError(f"OD pair ({o}, {d}): unknown node {n!r}")


@dataclass(frozen=True)
class Zone:
    id: str
    node: str
    vehicles: int

    def __post_init__(self):
        if int(self.vehicles) != self.vehicles or self.vehicles < 0:
            raise NetworkError(f"zone {self.id}: vehicle count must be an integer >= 0")


@dataclass(frozen=True)
class ExitPoint:
    id: str
    node: str


def apply_closure(net: Network, closure: ClosureScenario) -> Network:
    """Copy of ``net`` with the closure's links closed and barrier nodes impassable."""
    for lid in closure.closed_link_ids:
        if lid not in net.links:
            raise NetworkError(f"closure references unknown link {lid!r}")
    for nid in closure.barrier_node_ids:
        if nid not in net.nodes:
            raise NetworkError(f"closure references unknown node {nid!r}")
    links = dict(net.links)
    for lid in closure.closed_link_ids:
        links[lid] = replace(links[lid], closed=True)
    return Network(nodes=dict(net.nodes), links=links,
                   barrier_nodes=net.barrier_nodes | set(closure.barrier_node_ids))


def haversine_km(p: Sequence[float], q: Sequence[float]) -> float:
    lon1, lat1, lon2, lat2 = map(math.radians, (p[0], p[1], q[0], q[1]))
    a = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def polyline_length_km(coords: Sequence[Sequence[float]]) -> float:
    """Great-circle length of a WGS84 ``[(lon, lat), ...]`` polyline."""
    return sum(haversine_km(a, b) for a, b in zip(coords[:-1], coords[1:]))


_REQUIRED = ("lanes", "free_flow_kmh", "road_class", "capacity_vph")


def _link_from_feature(feat: dict, point_ids: dict) -> Link:
    props = feat.get("properties") or {}
    lid = props.get("id", feat.get("id"))
    if lid is None:
        raise NetworkError("line feature without an id")
    lid = str(lid)
    missing = [k for k in _REQUIRED if props.get(k) is None]
    if missing:
        raise NetworkError(f"link {lid}: missing required propert{'y' if len(missing) == 1 else 'ies'} {missing}")
    geom = feat.get("geometry")
    coords = None
    if geom is not None:
        if geom.get("type") != "LineString":
            raise NetworkError(f"link {lid}: geometry must be a LineString")
        coords = tuple(tuple(float(c) for c in xy[:2]) for xy in geom["coordinates"])
        if len(coords) < 2:
            raise NetworkError(f"link {lid}: LineString needs at least 2 vertices")

    ends = []
    for key, idx in (("from_node", 0), ("to_node", -1)):
        node = props.get(key)
        if node is None:
            if coords is None or coords[idx] not in point_ids:
                raise NetworkError(f"link {lid}: {key} not given and endpoint matches no node")
            node = point_ids[coords[idx]]
        ends.append(str(node))

    declared = props.get("length_km")
    computed = polyline_length_km(coords) if coords is not None else None
    if declared is None:
        if computed is None:
            raise NetworkError(f"link {lid}: no length_km and no geometry to compute it from")
        length = computed
    else:
        length = float(declared)
        if computed is not None and length > 0 and abs(computed - length) / length > LENGTH_MISMATCH_TOL:
            warnings.warn(
                f"link {lid}: declared length {length:.3f} km differs from geometry "
                f"length {computed:.3f} km by more than {LENGTH_MISMATCH_TOL:.0%}",
                LengthMismatchWarning, stacklevel=3)

    try:
        lanes = props["lanes"]
        if isinstance(lanes, float) and lanes.is_integer():
            lanes = int(lanes)
        return Link(
            id=lid, from_node=ends[0], to_node=ends[1], length_km=length,
            lanes=lanes, free_flow_kmh=float(props["free_flow_kmh"]),
            capacity_vph=float(props["capacity_vph"]), road_class=props["road_class"],
            lane_width_m=float(props.get("lane_width_m", DEFAULT_LANE_WIDTH_M)),
            closed=bool(props.get("closed", False)), geometry=coords,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, NetworkError):
            raise
        raise NetworkError(f"link {lid}: {exc}") from exc


def load_network(path, format: str = "geojson") -> Network:
    """Read a GeoJSON FeatureCollection of LineString links (and optional Point nodes).

    Point features define nodes (``properties.id``). When any are present,
    every link endpoint must name one of them; otherwise nodes are implied by
    link endpoints. ``from_node``/``to_node`` may be omitted when the line's
    end vertices coincide with Point nodes.
    """
    if format != "geojson":
        raise NetworkError(f"unsupported network format {format!r}")
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise NetworkError(f"network file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("type") != "FeatureCollection":
        raise NetworkError(f"{path}: expected a GeoJSON FeatureCollection")

    nodes: dict = {}
    point_ids: dict = {}
    lines = []
    for feat in doc.get("features", []):
        geom = feat.get("geometry") or {}
        if geom.get("type") == "Point":
            nid = (feat.get("properties") or {}).get("id", feat.get("id"))
            if nid is None:
                raise NetworkError(f"{path}: point feature without an id")
            nid = str(nid)
            if nid in nodes:
                raise NetworkError(f"duplicate node id {nid!r}")
            xy = tuple(float(c) for c in geom["coordinates"][:2])
            nodes[nid] = xy
            point_ids[xy] = nid
        else:
            lines.append(feat)

    has_points = bool(nodes)
    links: dict = {}
    for feat in lines:
        link = _link_from_feature(feat, point_ids)
        if link.id in links:
            raise NetworkError(f"duplicate link id {link.id!r}")
        for node, idx in ((link.from_node, 0), (link.to_node, -1)):
            if node not in nodes:
                if has_points:
                    raise NetworkError(f"link {link.id}: dangling endpoint {node!r}")
                nodes[node] = link.geometry[idx] if link.geometry else None
        links[link.id] = link
    return Network(nodes=nodes, links=links)


def save_network(net: Network, path) -> None:
    """Write ``net`` as GeoJSON readable by :func:`load_network`.

    Floats are serialized with ``repr`` precision so a reload is bit-exact.
    """
    features = []
    for nid in sorted(net.nodes):
        xy = net.nodes[nid]
        if xy is not None:
            features.append({"type": "Feature", "properties": {"id": nid},
                             "geometry": {"type": "Point", "coordinates": list(xy)}})
    for lid in sorted(net.links):
        l = net.links[lid]
        props = {"id": l.id, "from_node": l.from_node, "to_node": l.to_node,
                 "length_km": l.length_km, "lanes": l.lanes,
                 "free_flow_kmh": l.free_flow_kmh, "capacity_vph": l.capacity_vph,
                 "road_class": l.road_class, "lane_width_m": l.lane_width_m}
        if l.closed:
            props["closed"] = True
        geom = None
        if l.geometry is not None:
            geom = {"type": "LineString", "coordinates": [list(c) for c in l.geometry]}
        features.append({"type": "Feature", "properties": props, "geometry": geom})
    Path(path).write_text(json.dumps({"type": "FeatureCollection", "features": features}, indent=1),
                          encoding="utf-8")


def load_od(path, net: Optional[Network] = None) -> ODMatrix:
    """Read ``origin,destination,demand[,time_label]`` rows; duplicate pairs are summed.

    Errors name the offending line number (the header is line 1).
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except FileNotFoundError:
        raise NetworkError(f"OD file not found: {path}") from None
    entries: dict = {}
    labels = set()
    with fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        if not {"origin", "destination", "demand"} <= cols:
            raise NetworkError(f"{path}: header must contain origin,destination,demand")
        for lineno, row in enumerate(reader, start=2):
            o, d = row["origin"].strip(), row["destination"].strip()
            try:
                demand = float(row["demand"])
            except (TypeError, ValueError):
                raise NetworkError(f"{path}, row {lineno}: demand {row['demand']!r} is not a number") from None
            if demand < 0:
                raise NetworkError(f"{path}, row {lineno}: negative demand {demand}")
            if net is not None:
                for n in (o, d):
                    if n not in net.nodes:
                        raise NetworkError(f"{path}, row {lineno}: unknown node {n!r}")
            if row.get("time_label"):
                labels.add(row["time_label"].strip())
            entries[(o, d)] = entries.get((o, d), 0.0) + demand
    if len(labels) > 1:
        raise NetworkError(f"{path}: mixed time labels {sorted(labels)}")
    return ODMatrix(entries=entries, time_label=labels.pop() if labels else "static")
