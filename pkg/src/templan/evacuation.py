"""Staged-departure evacuation of zones to exit points.

Loading is a point-queue (vertical queue) model on a one-minute clock. A
vehicle entering a link gets a travel time from the speed-flow relation at
the link's current moving occupancy; on reaching the link end it waits FIFO
and each link discharges at most ``capacity_vph * step`` vehicles per step.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .assignment import shortest_path
from .errors import HorizonError, NetworkError, NoPathError, TemplanError
from .flowtime import SpeedFlowParams, segment_speed
from .netmodel import ExitPoint, Network, ODMatrix, Zone

PROFILE_LATE_PEAK = (0.20, 0.50, 0.20, 0.10)
PROFILE_PREPARED = (0.40, 0.10, 0.30, 0.20)
STRATEGIES = ("nearest", "balanced", "override")


@dataclass(frozen=True)
class DepartureProfile:
    fractions: tuple = PROFILE_LATE_PEAK
    slot_minutes: float = 15.0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        object.__setattr__(self, "fractions", fr)
        if not fr or any(f < 0 for f in fr):
            raise TemplanError("departure fractions must be nonnegative")
        if abs(math.fsum(fr) - 1.0) > 1e-9:
            raise TemplanError(f"departure fractions must sum to 1, got {math.fsum(fr):.6g}")
        if not self.slot_minutes > 0:
            raise TemplanError("slot length must be > 0")


@dataclass(frozen=True)
class DepartureSlice:
    offset_min: float
    od: ODMatrix
    by_zone: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class EvacResult:
    clearance_time_min: int
    last_exit_min: float
    total_vehicles: int
    per_exit: Mapping[str, int]
    series: tuple = field(repr=False, default=())
    exit_ids: tuple = ()

    @property
    def clearance_hhmm(self) -> str:
        h, m = divmod(int(self.clearance_time_min), 60)
        return f"{h}:{m:02d}"


def derive_fleet(population: int, in_town_fraction: float, households: int,
                 registered_vehicles: int) -> int:
    """One car per household, capped by the registered fleet."""
    if not 0 <= in_town_fraction <= 1:
        raise TemplanError("in_town_fraction must be in [0, 1]")
    if min(population, households, registered_vehicles) < 0:
        raise TemplanError("counts must be >= 0")
    return int(min(households, registered_vehicles))


def _exit_times(net: Network, zone: Zone, exits: Sequence[ExitPoint]) -> list:
    out = []
    for ex in exits:
        if ex.node == zone.node:
            out.append((0.0, ex.id))
            continue
        try:
            out.append((shortest_path(net, zone.node, ex.node).free_flow_min, ex.id))
        except NoPathError:
            pass
    if not out:
        raise NoPathError(f"zone {zone.id} cannot reach any exit")
    return out


def _check(net: Network, zones: Sequence[Zone], exits: Sequence[ExitPoint]) -> None:
    for z in zones:
        if z.node not in net.nodes:
            raise NetworkError(f"zone {z.id}: unknown node {z.node!r}")
    for e in exits:
        if e.node not in net.nodes:
            raise NetworkError(f"exit {e.id}: unknown node {e.node!r}")
    if not exits:
        raise TemplanError("no exit points")


def allocate_nearest(net: Network, zones: Sequence[Zone], exits: Sequence[ExitPoint]) -> dict:
    """Each zone to its minimum free-flow-time exit; ties go to the smallest exit id."""
    _check(net, zones, exits)
    return {z.id: min(_exit_times(net, z, exits))[1] for z in zones}


def allocate_balanced(net: Network, zones: Sequence[Zone], exits: Sequence[ExitPoint]) -> dict:
    """Greedy whole-zone balancing.

    Zones in descending vehicle count (then id) go to the currently least
    loaded exit they can reach; load ties go to the smallest exit id.
    """
    _check(net, zones, exits)
    load = {e.id: 0 for e in exits}
    out = {}
    for z in sorted(zones, key=lambda z: (-z.vehicles, z.id)):
        reachable = [eid for _, eid in _exit_times(net, z, exits)]
        best = min(reachable, key=lambda eid: (load[eid], eid))
        out[z.id] = best
        load[best] += z.vehicles
    return {z.id: out[z.id] for z in zones}


def allocate_override(base: Mapping[str, str], overrides: Mapping[str, str],
                      exits: Optional[Sequence[ExitPoint]] = None) -> dict:
    out = dict(base)
    exit_ids = {e.id for e in exits} if exits is not None else set(base.values())
    for zid, eid in overrides.items():
        if zid not in out:
            raise TemplanError(f"override names unknown zone {zid!r}")
        if eid not in exit_ids:
            raise TemplanError(f"override names unknown exit {eid!r}")
        out[zid] = eid
    return out


def exit_loads(assignment: Mapping[str, str], zones: Sequence[Zone]) -> dict:
    load: dict = {}
    for z in zones:
        load[assignment[z.id]] = load.get(assignment[z.id], 0) + z.vehicles
    return dict(sorted(load.items()))


def split_integer(total: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``total`` over ``fractions``."""
    raw = [total * f for f in fractions]
    # nudge before flooring so 0.3 * 10 = 3.0000000000000004 stays 3
    base = [int(math.floor(x + 1e-9)) for x in raw]
    short = total - sum(base)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:max(short, 0)]:
        base[i] += 1
    # the nudge can overshoot when several shares sit just below an integer
    for i in reversed(order[len(order) + short:] if short < 0 else []):
        base[i] -= 1
    return base


def staged_od(assignment: Mapping[str, str], zones: Sequence[Zone], exits: Sequence[ExitPoint],
              profile: DepartureProfile = DepartureProfile()) -> list[DepartureSlice]:
    """Split each zone's fleet into timed slices, exactly preserving totals."""
    exit_node = {e.id: e.node for e in exits}
    per_slot = [dict() for _ in profile.fractions]
    zone_counts = [dict() for _ in profile.fractions]
    for z in zones:
        try:
            dest = exit_node[assignment[z.id]]
        except KeyError:
            raise TemplanError(f"zone {z.id} has no valid exit assignment") from None
        for k, n in enumerate(split_integer(z.vehicles, profile.fractions)):
            zone_counts[k][z.id] = n
            if n:
                key = (z.node, dest)
                per_slot[k][key] = per_slot[k].get(key, 0) + n
    return [DepartureSlice(offset_min=k * profile.slot_minutes,
                           od=ODMatrix(per_slot[k], time_label=f"+{k * profile.slot_minutes:g}min"),
                           by_zone=zone_counts[k])
            for k in range(len(profile.fractions))]


class _Packet:
    __slots__ = ("ready", "n", "route", "pos")

    def __init__(self, ready, n, route, pos):
        self.ready, self.n, self.route, self.pos = ready, n, route, pos


def simulate_evacuation(net: Network, slices: Sequence[DepartureSlice],
                        exits: Optional[Sequence[ExitPoint]] = None, step_min: float = 1.0,
                        horizon_hr: float = 12.0,
                        params: Optional[SpeedFlowParams] = None) -> EvacResult:
    """Point-queue loading of the staged slices until the network is empty.

    The clock samples whole steps; ``clearance_time_min`` is the first sample
    with no vehicle left in the network. Raises :class:`HorizonError` if that
    does not happen within ``horizon_hr``.
    """
    exit_of_node = {e.node: e.id for e in exits} if exits is not None else {}
    routes: dict = {}
    pending = []  # (offset, seq, origin, dest, n)
    for seq, sl in enumerate(sorted(slices, key=lambda s: s.offset_min)):
        for (o, d) in sl.od.pairs():
            n = int(round(sl.od.entries[(o, d)]))
            if n <= 0:
                continue
            if (o, d) not in routes and o != d:
                routes[(o, d)] = shortest_path(net, o, d).links
            pending.append((float(sl.offset_min), seq, o, d, n))
    pending.sort()
    pending = deque(pending)
    total = sum(p[4] for p in pending)

    exit_keys = sorted({exit_of_node.get(d, d) for (_, _, _, d, _) in pending}
                       | set(exit_of_node.values()))
    per_exit = {k: 0 for k in exit_keys}
    link_ids = sorted({l for r in routes.values() for l in r})
    queues = {lid: deque() for lid in link_ids}
    carry = {lid: 0.0 for lid in link_ids}
    links = {lid: net.links[lid] for lid in link_ids}

    def travel_min(lid: str, occupancy: int) -> float:
        link = links[lid]
        q = occupancy * link.free_flow_kmh / link.length_km
        p = params or SpeedFlowParams(lane_width_m=link.lane_width_m)
        return 60.0 * link.length_km / segment_speed(q, link.free_flow_kmh, link.lanes, p)

    injected = exited = 0
    last_exit = 0.0
    series = []
    t = 0
    max_steps = int(math.ceil(horizon_hr * 60.0 / step_min))
    step = 0
    while True:
        t = step * step_min
        occ = {lid: sum(p.n for p in queues[lid] if p.ready > t) for lid in link_ids}
        while pending and pending[0][0] <= t + 1e-9:
            off, _, o, d, n = pending.popleft()
            injected += n
            if o == d:
                exited += n
                per_exit[exit_of_node.get(d, d)] += n
                last_exit = max(last_exit, off)
                continue
            route = routes[(o, d)]
            queues[route[0]].append(_Packet(off + travel_min(route[0], occ[route[0]]), n, route, 0))
            occ[route[0]] += n
        in_net = injected - exited
        series.append((t, in_net, exited, tuple(per_exit[k] for k in exit_keys)))
        if not pending and in_net == 0:
            break
        if step >= max_steps:
            raise HorizonError(f"evacuation not finished within {horizon_hr} h "
                               f"({in_net} vehicles still in the network)")

        moved = []
        for lid in link_ids:
            qd = queues[lid]
            if not qd:
                carry[lid] = 0.0
                continue
            cap = links[lid].capacity_vph * step_min / 60.0
            credit = carry[lid] + cap
            sent = 0
            while qd and qd[0].ready < t + step_min and credit - sent >= 1.0:
                head = qd[0]
                m = min(head.n, int(math.floor(credit - sent + 1e-12)))
                sent += m
                cross = max(head.ready, min(t + step_min * sent / cap, t + step_min))
                if m == head.n:
                    qd.popleft()
                else:
                    head.n -= m
                moved.append((cross, m, head.route, head.pos))
            blocked = bool(qd) and qd[0].ready < t + step_min
            carry[lid] = (credit - sent) if blocked else 0.0

        for cross, m, route, pos in moved:
            if pos + 1 == len(route):
                exited += m
                dest = net.links[route[-1]].to_node
                per_exit[exit_of_node.get(dest, dest)] += m
                last_exit = max(last_exit, cross)
            else:
                nxt = route[pos + 1]
                queues[nxt].append(_Packet(cross + travel_min(nxt, occ[nxt]), m, route, pos + 1))
                occ[nxt] += m
        step += 1

    return EvacResult(clearance_time_min=int(round(t)) if step_min == 1.0 else t,
                      last_exit_min=last_exit, total_vehicles=total,
                      per_exit=dict(per_exit), series=tuple(series), exit_ids=tuple(exit_keys))


def write_series_csv(res: EvacResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_min", "in_network", "exited_total",
                    *[f"exited_{k}" for k in res.exit_ids]])
        for t, inn, ex, per in res.series:
            w.writerow([f"{t:g}", inn, ex, *per])


@dataclass(frozen=True)
class EvacScenarioFile:
    zones: tuple
    exits: tuple
    strategies: tuple
    overrides: Mapping[str, str]
    override_base: str
    profiles: tuple
    network_path: Optional[str] = None
    horizon_hr: float = 12.0
    reference: Mapping = field(default_factory=dict)


def load_scenario(path) -> EvacScenarioFile:
    """Read an evacuation scenario JSON document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise TemplanError(f"evacuation scenario not found: {path}") from None
    return scenario_from_dict(doc, base_dir=path.parent)


def scenario_from_dict(doc: Mapping, base_dir=None) -> EvacScenarioFile:
    zones = tuple(Zone(str(z["id"]), str(z["node"]), int(z["vehicles"])) for z in doc["zones"])
    exits = tuple(ExitPoint(str(e["id"]), str(e["node"])) for e in doc["exits"])
    if len({z.id for z in zones}) != len(zones):
        raise TemplanError("duplicate zone id in scenario")
    if len({e.id for e in exits}) != len(exits):
        raise TemplanError("duplicate exit id in scenario")
    if "strategies" in doc:
        strategies = tuple(doc["strategies"])
    elif "strategy" in doc:
        strategies = (doc["strategy"],)
    else:
        strategies = STRATEGIES
    bad = [s for s in strategies if s not in STRATEGIES]
    if bad:
        raise TemplanError(f"unknown strategy {bad}; choose from {STRATEGIES}")
    raw_profiles = doc.get("profiles") or [doc.get("profile", PROFILE_LATE_PEAK)]
    profiles = tuple(DepartureProfile(tuple(p), float(doc.get("slot_minutes", 15.0)))
                     for p in raw_profiles)
    net_path = doc.get("network")
    if net_path is not None and base_dir is not None:
        net_path = str((Path(base_dir) / net_path).resolve())
    return EvacScenarioFile(zones=zones, exits=exits, strategies=strategies,
                            overrides={str(k): str(v) for k, v in doc.get("overrides", {}).items()},
                            override_base=doc.get("override_base", "balanced"),
                            profiles=profiles, network_path=net_path,
                            horizon_hr=float(doc.get("horizon_hr", 12.0)),
                            reference=doc.get("reference", {}))


def assignment_for(strategy: str, net: Network, sc: EvacScenarioFile) -> dict:
    if strategy == "nearest":
        return allocate_nearest(net, sc.zones, sc.exits)
    if strategy == "balanced":
        return allocate_balanced(net, sc.zones, sc.exits)
    if strategy == "override":
        base = assignment_for(sc.override_base, net, sc)
        return allocate_override(base, sc.overrides, sc.exits)
    raise TemplanError(f"unknown strategy {strategy!r}")


def run_scenarios(net: Network, sc: EvacScenarioFile) -> list[dict]:
    """Every strategy under every departure profile, in file order."""
    rows = []
    for strategy in sc.strategies:
        amap = assignment_for(strategy, net, sc)
        for k, prof in enumerate(sc.profiles, start=1):
            res = simulate_evacuation(net, staged_od(amap, sc.zones, sc.exits, prof),
                                      sc.exits, horizon_hr=sc.horizon_hr)
            rows.append({"strategy": strategy, "profile": k, "fractions": list(prof.fractions),
                         "assignment": amap, "loads": exit_loads(amap, sc.zones), "result": res})
    return rows
