"""When to open alternative itineraries during a closure.

An alternative route is opened when its travel time does not exceed the main
route's upstream + downstream time plus the bottleneck delay. Inputs come
from an :class:`ActivationFixture`, which holds either tabulated values or
values computed live from the flowtime and queueing modules.
"""

from __future__ import annotations

import bisect
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .errors import FixtureError, TemplanError

# evaluation order; micro_after_macro is the micro route once macros are open
ITINERARIES = ("micro", "macro_left", "macro_right", "micro_after_macro")
MACROS = ("macro_left", "macro_right")

HOLD = "hold"
ACTIVATE = "activate"


def main_route_total(upstream_min: float, downstream_min: float, delay_min: float) -> float:
    if min(upstream_min, downstream_min, delay_min) < 0:
        raise TemplanError("travel times and delay must be >= 0")
    return upstream_min + downstream_min + delay_min


def should_activate(t_alternative_min: float, t_main_total_min: float) -> str:
    """``"activate"`` iff the alternative is no slower than the main route (ties activate)."""
    if t_alternative_min < 0 or t_main_total_min < 0:
        raise TemplanError("travel times must be >= 0")
    return ACTIVATE if t_alternative_min <= t_main_total_min else HOLD


@dataclass(frozen=True)
class RouteComparison:
    kind: str
    duration_hr: float
    t_alternative_min: float
    t_main_upstream_min: float
    t_main_downstream_min: float
    t_delay_min: float
    decision: str

    @property
    def t_main_total_min(self) -> float:
        return main_route_total(self.t_main_upstream_min, self.t_main_downstream_min,
                                self.t_delay_min)


@dataclass(frozen=True)
class BracketDelay:
    """Step delay function: ``delay_min[i]`` for durations in (edge[i-1], edge[i]]."""

    upper_edges_hr: tuple
    delay_min: tuple

    def __post_init__(self):
        object.__setattr__(self, "upper_edges_hr", tuple(float(e) for e in self.upper_edges_hr))
        object.__setattr__(self, "delay_min", tuple(float(d) for d in self.delay_min))
        if len(self.upper_edges_hr) != len(self.delay_min) or not self.delay_min:
            raise TemplanError("bracket edges and delays must be nonempty and equal in length")
        if list(self.upper_edges_hr) != sorted(set(self.upper_edges_hr)):
            raise TemplanError("bracket edges must be strictly increasing")

    def __call__(self, duration_hr: float) -> float:
        if duration_hr <= 0:
            raise FixtureError(f"no delay bracket for duration {duration_hr} h")
        i = bisect.bisect_left(self.upper_edges_hr, duration_hr - 1e-12)
        if i >= len(self.delay_min):
            raise FixtureError(
                f"duration {duration_hr} h is beyond the last delay bracket "
                f"({self.upper_edges_hr[-1]} h)")
        return self.delay_min[i]


@dataclass(frozen=True)
class ItineraryTimes:
    t_alternative_min: float
    t_downstream_min: float
    t_upstream_min: float = 0.0


@dataclass(frozen=True)
class ActivationFixture:
    """Everything the criterion needs at one response rate.

    ``delay`` maps a closure duration to the bottleneck delay with the full
    flow on the main route; ``delay_after_macro`` does the same once the macro
    itineraries have drawn off the responding share.
    """

    response_rate: float
    times: Mapping[str, ItineraryTimes]
    delay: Callable[[float], float]
    delay_after_macro: Callable[[float], float]
    source: str = "user"

    def __post_init__(self):
        missing = [k for k in ITINERARIES if k not in self.times]
        if missing:
            raise FixtureError(f"fixture for rate {self.response_rate} lacks {missing}")
        if not 0 <= self.response_rate <= 1:
            raise TemplanError(f"response rate must be in [0, 1], got {self.response_rate}")


@dataclass(frozen=True)
class ActivationPlan:
    response_rate: float
    durations_hr: tuple
    rows: tuple
    thresholds_hr: Mapping[str, Optional[float]]
    stages: tuple

    def decision(self, duration_hr: float, kind: str) -> str:
        for r in self.rows:
            if r.kind == kind and r.duration_hr == duration_hr:
                return r.decision
        raise KeyError((duration_hr, kind))

    def table(self, kind: str) -> list:
        return [r for r in self.rows if r.kind == kind]

    def open_routes(self, duration_hr: float) -> list:
        for st in self.stages:
            if duration_hr in st["durations_hr"]:
                return list(st["open"])
        raise KeyError(duration_hr)

    def narrative(self) -> list[str]:
        """Plain-language activation summary, one line per route group."""
        first = self.durations_hr[0]

        def when(t):
            return "right away" if t == first else f"after {t:g} hours"

        lines = []
        left, right = self.thresholds_hr["macro_left"], self.thresholds_hr["macro_right"]
        if left is not None and left == right:
            lines.append(f"Activating the left and right macro routes {when(left)}")
        elif left is None and right is None:
            lines.append("No activation of the macro routes")
        else:
            for side, t in sorted((("left", left), ("right", right)),
                                  key=lambda p: (p[1] is None, p[1] or 0.0)):
                lines.append(f"Activating the {side} macro route {when(t)}" if t is not None
                             else f"No activation of the {side} macro route")
        micro = self.micro_threshold_hr
        lines.append(f"Activating the micro route {when(micro)}" if micro is not None
                     else "No activation of the micro route")
        return lines

    @property
    def micro_threshold_hr(self) -> Optional[float]:
        for d in self.durations_hr:
            if "micro" in self.open_routes(d):
                return d
        return None

    def strategy(self) -> dict:
        return {
            "response_rate": self.response_rate,
            "thresholds_hr": dict(self.thresholds_hr),
            "stages": [dict(s) for s in self.stages],
            "narrative": self.narrative(),
        }


def activation_plan(durations: Sequence[float], fixture: ActivationFixture) -> ActivationPlan:
    """Evaluate every itinerary at every duration and derive the staged strategy.

    The micro route after macro activation is only opened at durations where
    both macro itineraries are already open; elsewhere it is held.
    """
    durations = [float(d) for d in durations]
    if not durations:
        raise TemplanError("durations list is empty")
    if durations != sorted(durations) or len(set(durations)) != len(durations):
        raise TemplanError("durations must be strictly ascending")
    if durations[0] <= 0:
        raise TemplanError("durations must be > 0")

    rows = []
    for d in durations:
        decided = {}
        for kind in ITINERARIES:
            tt = fixture.times[kind]
            delay = fixture.delay_after_macro(d) if kind == "micro_after_macro" else fixture.delay(d)
            total = main_route_total(tt.t_upstream_min, tt.t_downstream_min, delay)
            dec = should_activate(tt.t_alternative_min, total)
            if kind == "micro_after_macro" and not all(decided[m] == ACTIVATE for m in MACROS):
                dec = HOLD
            decided[kind] = dec
            rows.append(RouteComparison(kind, d, tt.t_alternative_min, tt.t_upstream_min,
                                        tt.t_downstream_min, delay, dec))

    thresholds = {}
    for kind in ITINERARIES:
        on = [r.duration_hr for r in rows if r.kind == kind and r.decision == ACTIVATE]
        thresholds[kind] = on[0] if on else None

    stages = []
    for d in durations:
        dec = {r.kind: r.decision for r in rows if r.duration_hr == d}
        open_ = [m for m in MACROS if dec[m] == ACTIVATE]
        if dec["micro"] == ACTIVATE or dec["micro_after_macro"] == ACTIVATE:
            open_.append("micro")
        if stages and stages[-1]["open"] == open_:
            stages[-1]["durations_hr"].append(d)
            stages[-1]["to_hr"] = d
        else:
            stages.append({"from_hr": d, "to_hr": d, "durations_hr": [d], "open": open_})

    return ActivationPlan(response_rate=fixture.response_rate, durations_hr=tuple(durations),
                          rows=tuple(rows), thresholds_hr=thresholds, stages=tuple(stages))


@dataclass(frozen=True)
class SweepRow:
    response_rate: float
    plan: ActivationPlan
    source: str
    lines: tuple = field(default=())


def response_sweep(rates: Sequence[float], fixtures, durations: Sequence[float]) -> list[SweepRow]:
    """Activation summary per response rate, in input order.

    ``fixtures`` is a mapping from rate to :class:`ActivationFixture` or a
    callable building one for a rate.
    """
    out = []
    for r in rates:
        if not 0 <= r <= 1:
            raise TemplanError(f"response rate must be in [0, 1], got {r}")
        if callable(fixtures):
            fx = fixtures(r)
        else:
            fx = _lookup_rate(fixtures, r)
        plan = activation_plan(durations, fx)
        out.append(SweepRow(r, plan, fx.source, tuple(plan.narrative())))
    return out


def _lookup_rate(fixtures: Mapping, rate: float) -> ActivationFixture:
    for k, fx in fixtures.items():
        if abs(float(k) - rate) < 1e-9:
            return fx
    raise FixtureError(f"no activation fixture for response rate {rate}")


def fixtures_from_dict(doc: Mapping) -> dict:
    """Parse the ``activation`` section of a profile or config into fixtures by rate.

    Delays are either bracket tables shared across rates (``delay_brackets``)
    or given per rate (``delay_min`` / ``delay_after_macro_min`` with the
    shared ``upper_edges_hr``).
    """
    brackets = doc["delay_brackets"]
    edges = tuple(brackets["upper_edges_hr"])
    full_delay = tuple(brackets["delay_min"])
    out = {}
    for key, spec in doc["rates"].items():
        rate = float(key)
        times = {}
        for kind in ITINERARIES:
            try:
                t = spec[kind]
            except KeyError:
                raise FixtureError(f"activation fixture for rate {key} lacks {kind}") from None
            times[kind] = ItineraryTimes(float(t["t_alternative_min"]), float(t["t_downstream_min"]),
                                         float(t.get("t_upstream_min", 0.0)))
        out[rate] = ActivationFixture(
            response_rate=rate, times=times,
            delay=BracketDelay(edges, tuple(spec.get("delay_min", full_delay))),
            delay_after_macro=BracketDelay(edges, tuple(spec["delay_after_macro_min"])),
            source=spec.get("source", "user"))
    return out


def live_fixture(net, itineraries: Mapping, main_routes: Mapping, background: Mapping,
                 interrupted_vph: float, branch_weights: Sequence[float], response_rate: float,
                 arrivals_vph: Sequence[float], queue_params=None,
                 statistic: str = "maximum", flow_params=None) -> ActivationFixture:
    """Build a fixture from network flows instead of tabulated times.

    ``itineraries`` maps ``micro``, ``macro_left`` and ``macro_right`` to
    alternative :class:`~templan.assignment.Itinerary` objects and
    ``main_routes`` maps the same keys to the main-route section each one
    bypasses. The responding share of ``interrupted_vph`` is split over the
    macros by ``branch_weights``; the micro route alone carries the whole
    responding share, and after macro activation the responding share of the
    residual main-route flow. Delays come from the input-output diagram with
    arrivals scaled by the share left on the main route.
    """
    from .demand import branch_split, split_by_response
    from .flowtime import route_time
    from .queueing import QueueParams, build_arrivals, io_delay

    qp = queue_params or QueueParams()
    diverted, remaining = split_by_response(interrupted_vph, response_rate)
    left_q, right_q = branch_split(diverted, branch_weights)
    micro_after_q = split_by_response(remaining, response_rate)[0]

    def alt(kind, q):
        itin = itineraries[kind]
        return route_time(net, itin, background, {l: q for l in itin.links}, flow_params)

    def main(kind):
        return route_time(net, main_routes[kind], background, None, flow_params)

    times = {
        "micro": ItineraryTimes(alt("micro", diverted), main("micro")),
        "macro_left": ItineraryTimes(alt("macro_left", left_q), main("macro_left")),
        "macro_right": ItineraryTimes(alt("macro_right", right_q), main("macro_right")),
        "micro_after_macro": ItineraryTimes(alt("micro", micro_after_q), main("micro")),
    }
    horizon = 24.0

    def delay_fn(scale):
        arr = build_arrivals([f * scale for f in arrivals_vph], horizon_hr=horizon)

        def f(duration_hr):
            return io_delay(arr, duration_hr, qp).statistic(statistic)
        return f

    return ActivationFixture(response_rate=response_rate, times=times,
                             delay=delay_fn(1.0), delay_after_macro=delay_fn(1.0 - response_rate),
                             source="live")


def write_plan_csv(plan: ActivationPlan, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["duration_hr", "itinerary", "t_alternative_min", "t_main_total_min", "decision"])
        for kind in ITINERARIES:
            for r in plan.table(kind):
                w.writerow([f"{r.duration_hr:g}", kind, f"{r.t_alternative_min:.1f}",
                            f"{r.t_main_total_min:.1f}", r.decision])


def write_plan_json(plan: ActivationPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.strategy(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["response_rate", "fixture_source", "left_macro_hr", "right_macro_hr",
                    "micro_hr", "alternative_routes_activation"])
        for row in rows:
            th = row.plan.thresholds_hr
            cells = [_fmt_hr(th["macro_left"]), _fmt_hr(th["macro_right"]),
                     _fmt_hr(row.plan.micro_threshold_hr)]
            for line in row.lines:
                w.writerow([f"{row.response_rate:g}", row.source, *cells, line])


def _fmt_hr(t: Optional[float]) -> str:
    return "" if t is None else f"{t:g}"
