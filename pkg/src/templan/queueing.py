"""Input-output (cumulative count) diagram at a closed bottleneck.

Arrivals N(t) are piecewise linear with hourly slopes. Departures D(t) leave
at ``mu1`` while the road is closed and at ``mu2`` afterwards, never ahead of
arrivals. Time is measured in hours from the start of the closure.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import HorizonError, TemplanError

A1_ARRIVALS_VPH = (3750.84, 3694.65, 4045.85)
A1_START_CLOCK = 12.0

_EPS = 1e-9


class DelayStatistic(str, enum.Enum):
    AVERAGE_OVER_DELAYED = "average_over_delayed"
    MAXIMUM = "maximum"
    PERCENTILE = "percentile"


@dataclass(frozen=True)
class QueueParams:
    """Bottleneck parameters; defaults are the A1 flood values.

    ``t_f`` is carried with the other diagram parameters but does not enter
    any computed quantity.
    """

    q_max: float = 6000.0      # veh/h
    k_j: float = 600.0         # veh/km
    v_f: float = 120.0         # km/h
    k_c: float = 50.0          # veh/km
    mu1: float = 1.0           # veh/h, discharge while closed
    mu2: float = 6000.0        # veh/h, discharge after reopening
    v_mu1: float = 0.5         # km/h
    d: float = 1.0             # km
    t_f: float = 0.01          # h
    include_bottleneck_traversal: bool = False
    per_lane_jam_density: bool = False

    def __post_init__(self):
        for name in ("q_max", "k_j", "v_f", "k_c", "mu2", "v_mu1", "d", "t_f"):
            if not getattr(self, name) > 0:
                raise TemplanError(f"queue parameter {name} must be > 0")
        if self.mu1 < 0:
            raise TemplanError("mu1 must be >= 0")
        if not self.mu1 < self.mu2:
            raise TemplanError("mu1 must be < mu2")
        if self.mu2 > self.q_max:
            raise TemplanError("mu2 must not exceed q_max")
        if not self.k_c < self.k_j:
            raise TemplanError("k_c must be < k_j")

    @property
    def bottleneck_traversal_min(self) -> float:
        return 60.0 * self.d / self.v_mu1


@dataclass(frozen=True)
class ArrivalCurve:
    """Hourly-constant arrival rates from ``start_clock`` out to ``horizon_hr``."""

    flows: tuple
    start_clock: float
    horizon_hr: float
    n_data_hours: int

    @property
    def times(self) -> np.ndarray:
        n = len(self.flows)
        t = np.arange(n + 1, dtype=float)
        t[-1] = min(t[-1], self.horizon_hr)
        return t

    @property
    def counts(self) -> np.ndarray:
        t = self.times
        return np.concatenate([[0.0], np.cumsum(np.asarray(self.flows) * np.diff(t))])

    def rate(self, t: float) -> float:
        k = min(int(math.floor(t)), len(self.flows) - 1)
        return self.flows[max(k, 0)]

    def cumulative(self, t) -> np.ndarray | float:
        return np.interp(t, self.times, self.counts)

    def boundary_counts(self) -> list[int]:
        """Whole-vehicle running totals at each data-hour boundary.

        Each slot's arrivals are rounded to whole vehicles before summing,
        which is how 3750.84 + 3694.65 veh becomes 3751 + 3695 = 7446.
        """
        out, total = [], 0
        for f in self.flows[:self.n_data_hours]:
            total += int(math.floor(f + 0.5))
            out.append(total)
        return out


def build_arrivals(flows: Sequence[float], start_clock: float = A1_START_CLOCK,
                   horizon_hr: Optional[float] = None) -> ArrivalCurve:
    """Arrival curve over ``horizon_hr`` hours, holding the last rate past the data."""
    flows = [float(f) for f in flows]
    if not flows:
        raise TemplanError("arrival flow list is empty")
    if any(f < 0 for f in flows):
        raise TemplanError("arrival flows must be >= 0")
    horizon = float(len(flows) if horizon_hr is None else horizon_hr)
    if horizon <= 0:
        raise TemplanError("horizon must be > 0")
    n_slots = max(int(math.ceil(horizon - _EPS)), 1)
    ext = flows[:n_slots] + [flows[-1]] * (n_slots - len(flows))
    return ArrivalCurve(flows=tuple(ext), start_clock=start_clock, horizon_hr=horizon,
                        n_data_hours=min(len(flows), n_slots))


@dataclass(frozen=True)
class DelayResult:
    total_delay_veh_hr: float
    avg_delay_min: float
    max_delay_min: float
    clearance_hr: float
    clearance_clock: float
    max_queue_veh: float
    max_queue_km: float
    delayed_vehicles: float
    bottleneck_traversal_min: float
    closure_duration_hr: float
    traversal_included: bool = False
    arrival_points: tuple = field(repr=False, default=())
    departure_points: tuple = field(repr=False, default=())

    def vehicle_delays_min(self, n_samples: int = 10_000) -> np.ndarray:
        """Delay of ``n_samples`` evenly spaced vehicles among those delayed."""
        if self.delayed_vehicles <= 0:
            return np.zeros(0)
        n = (np.arange(n_samples) + 0.5) / n_samples * self.delayed_vehicles
        ta, na = np.array(self.arrival_points).T
        td, nd = np.array(self.departure_points).T
        w = 60.0 * (_inverse(td, nd, n, strict=True) - _inverse(ta, na, n, strict=True))
        extra = self.bottleneck_traversal_min if self.traversal_included else 0.0
        return np.maximum(w, 0.0) + extra

    def statistic(self, which: DelayStatistic | str, percentile: float = 50.0) -> float:
        which = DelayStatistic(which)
        if which is DelayStatistic.AVERAGE_OVER_DELAYED:
            return self.avg_delay_min
        if which is DelayStatistic.MAXIMUM:
            return self.max_delay_min
        w = self.vehicle_delays_min()
        return float(np.percentile(w, percentile)) if w.size else 0.0

    def as_dict(self) -> dict:
        return {
            "closure_duration_hr": self.closure_duration_hr,
            "total_delay_veh_hr": round(self.total_delay_veh_hr, 6),
            "avg_delay_min": round(self.avg_delay_min, 6),
            "max_delay_min": round(self.max_delay_min, 6),
            "clearance_hr": round(self.clearance_hr, 6),
            "clearance_clock": round(self.clearance_clock, 6),
            "max_queue_veh": round(self.max_queue_veh, 6),
            "max_queue_km": round(self.max_queue_km, 6),
            "delayed_vehicles": round(self.delayed_vehicles, 6),
            "bottleneck_traversal_min": self.bottleneck_traversal_min,
            "bottleneck_traversal_included": self.traversal_included,
        }


def _inverse(t: np.ndarray, x: np.ndarray, n, strict: bool):
    """Generalized inverse of a non-decreasing piecewise-linear curve.

    ``strict`` gives inf{t: x(t) > n}, otherwise inf{t: x(t) >= n}.
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    idx = np.searchsorted(x, n, side="right" if strict else "left")
    if np.any(idx >= len(x)):
        raise TemplanError("vehicle index beyond the end of the curve")
    out = np.empty_like(n)
    first = idx == 0
    out[first] = t[0]
    i = idx[~first]
    x0, x1, t0, t1 = x[i - 1], x[i], t[i - 1], t[i]
    out[~first] = t0 + (n[~first] - x0) / (x1 - x0) * (t1 - t0)
    return out


def _departures(arr: ArrivalCurve, duration: float, p: QueueParams) -> list[tuple]:
    """Breakpoints ``(t, D)`` of the departure curve over the arrival horizon."""
    ta = arr.times
    bps = sorted(set(ta.tolist()) | ({duration} if 0 < duration < ta[-1] else set()))
    pts = [(0.0, 0.0)]
    dep = 0.0
    for t0, t1 in zip(bps[:-1], bps[1:]):
        a = arr.rate(t0)
        s = p.mu1 if t0 < duration else p.mu2
        n0 = float(arr.cumulative(t0))
        queue = n0 - dep
        if queue <= _EPS * max(1.0, n0):
            queue = 0.0
            dep = n0
        if queue > 0:
            if s > a and t0 + queue / (s - a) < t1:
                tm = t0 + queue / (s - a)
                dep = float(arr.cumulative(tm))
                pts.append((tm, dep))
                dep += min(a, s) * (t1 - tm)
            else:
                dep += s * (t1 - t0)
        else:
            dep += min(a, s) * (t1 - t0)
        pts.append((t1, dep))
    return pts


def io_delay(arr: ArrivalCurve, closure_duration_hr: float,
             p: QueueParams = QueueParams()) -> DelayResult:
    """Delay statistics of a closure lasting ``closure_duration_hr`` hours.

    Raises :class:`HorizonError` when the queue has not cleared by the end of
    the arrival horizon.
    """
    T = float(closure_duration_hr)
    if T < 0:
        raise TemplanError("closure duration must be >= 0")
    if T > arr.horizon_hr:
        raise HorizonError(f"closure of {T} h exceeds arrival horizon {arr.horizon_hr} h")
    dep_pts = _departures(arr, T, p)
    td = np.array([q[0] for q in dep_pts])
    nd = np.array([q[1] for q in dep_pts])
    na_at_d = arr.cumulative(td)
    queue = na_at_d - nd
    tol = 1e-7 * max(1.0, float(na_at_d[-1]))
    queue[np.abs(queue) < tol] = 0.0

    if queue[-1] > 0:
        raise HorizonError(
            f"queue of {queue[-1]:.1f} veh has not cleared within the {arr.horizon_hr} h "
            "horizon; extend the horizon")

    positive = np.nonzero(queue > 0)[0]
    if positive.size == 0:
        t_clear = T
    else:
        t_clear = float(td[positive[-1] + 1])

    # both curves are linear between merged breakpoints, so the trapezoid is exact
    grid = np.union1d(td, arr.times)
    grid = grid[grid <= t_clear + _EPS]
    if grid[-1] < t_clear:
        grid = np.append(grid, t_clear)
    gap = arr.cumulative(grid) - np.interp(grid, td, nd)
    gap[gap < 0] = 0.0
    total = float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(grid)))
    n_clear = float(arr.cumulative(t_clear)) if positive.size else 0.0

    ta, na = arr.times, arr.counts
    if positive.size and n_clear > 0:
        n_pts = np.union1d(na[na <= n_clear], nd[nd <= n_clear])
        inner = n_pts[n_pts < min(na[-1], nd[-1])]
        w = np.concatenate([
            _inverse(td, nd, inner, strict=True) - _inverse(ta, na, inner, strict=True),
            _inverse(td, nd, n_pts, strict=False) - _inverse(ta, na, n_pts, strict=False),
        ])
        max_delay = 60.0 * max(float(w.max()), 0.0)
        avg_delay = 60.0 * total / n_clear
    else:
        max_delay = avg_delay = 0.0
        total = 0.0

    extra = p.bottleneck_traversal_min if (p.include_bottleneck_traversal and n_clear > 0) else 0.0
    max_q = float(queue.max()) if queue.size else 0.0
    return DelayResult(
        total_delay_veh_hr=total + n_clear * extra / 60.0,
        avg_delay_min=avg_delay + extra,
        max_delay_min=max_delay + extra,
        clearance_hr=t_clear,
        clearance_clock=arr.start_clock + t_clear,
        max_queue_veh=max_q,
        max_queue_km=max_q / p.k_j,
        delayed_vehicles=n_clear,
        bottleneck_traversal_min=p.bottleneck_traversal_min,
        closure_duration_hr=T,
        traversal_included=bool(extra),
        arrival_points=tuple(zip(ta.tolist(), na.tolist())),
        departure_points=tuple(zip(td.tolist(), nd.tolist())),
    )


def queue_extent(res: DelayResult, lanes: int = 1, p: QueueParams = QueueParams()) -> float:
    """Back-of-queue distance in km.

    Jam density is taken as the roadway total unless ``p.per_lane_jam_density``.
    """
    density = p.k_j * lanes if p.per_lane_jam_density else p.k_j
    return res.max_queue_veh / density


def curve_samples(res: DelayResult, step_min: float = 1.0,
                  until_hr: Optional[float] = None) -> list[tuple]:
    """``(t_hr, N, D, queue)`` at every breakpoint plus a uniform time grid."""
    ta, na = np.array(res.arrival_points).T
    td, nd = np.array(res.departure_points).T
    end = until_hr if until_hr is not None else max(math.ceil(res.clearance_hr + _EPS), 1.0)
    end = min(end, float(ta[-1]))
    n_steps = int(round(end * 60.0 / step_min))
    uniform = np.arange(n_steps + 1) * step_min / 60.0
    grid = np.union1d(np.union1d(ta, td), uniform)
    grid = grid[grid <= end + _EPS]
    # collapse float near-duplicates from the two grids
    keep = np.concatenate([[True], np.diff(grid) > 1e-9])
    grid = grid[keep]
    n = np.interp(grid, ta, na)
    d = np.interp(grid, td, nd)
    q = np.maximum(n - d, 0.0)
    return list(zip(grid.tolist(), n.tolist(), d.tolist(), q.tolist()))


def write_curves(res: DelayResult, path, step_min: float = 1.0) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_hr", "N_arrivals", "D_departures", "queue_veh"])
        for t, n, d, q in curve_samples(res, step_min):
            w.writerow([f"{t:.6f}", f"{n:.4f}", f"{d:.4f}", f"{q:.4f}"])


BRACKETS_HR = ((0.0, 1.0), (1.0, 2.0), (2.0, 3.0))
A1_BRACKET_DELAYS_MIN = (26.1, 85.9, 145.9)
REPRESENTATIVES = ("lower", "midpoint", "upper")


def _representative(bracket: tuple, which: str) -> float:
    lo, hi = bracket
    return {"lower": lo, "midpoint": 0.5 * (lo + hi), "upper": hi}[which]


def reconcile_brackets(arr: ArrivalCurve, p: QueueParams = QueueParams(),
                       targets: Sequence[float] = A1_BRACKET_DELAYS_MIN,
                       brackets: Sequence[tuple] = BRACKETS_HR,
                       percentiles: Sequence[float] = (50.0, 90.0)) -> list[dict]:
    """Score every (statistic, representative duration, traversal flag) combination.

    Each row carries the per-bracket delays and the worst relative error
    against ``targets``; rows are sorted best first.
    """
    stats = [(DelayStatistic.AVERAGE_OVER_DELAYED, None), (DelayStatistic.MAXIMUM, None)]
    stats += [(DelayStatistic.PERCENTILE, q) for q in percentiles]
    rows = []
    for flag in (False, True):
        params = replace(p, include_bottleneck_traversal=flag)
        for rep in REPRESENTATIVES:
            results = [io_delay(arr, _representative(b, rep), params) for b in brackets]
            for stat, pct in stats:
                vals = [r.statistic(stat, pct if pct is not None else 50.0) for r in results]
                errs = [abs(v - t) / t for v, t in zip(vals, targets)]
                name = stat.value if pct is None else f"p{pct:g}"
                rows.append({"statistic": name, "representative": rep,
                             "include_bottleneck_traversal": flag,
                             "delays_min": [round(v, 3) for v in vals],
                             "max_rel_error": max(errs)})
    rows.sort(key=lambda r: (r["max_rel_error"], r["statistic"], r["representative"],
                             r["include_bottleneck_traversal"]))
    return rows
