"""Annual to daily to hourly demand scaling and response-rate splits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

from .errors import TemplanError


@dataclass(frozen=True)
class DayTypeCalendar:
    """Day counts per year and their demand factor relative to a working day.

    The defaults are the Italian calendar: 251 working days, 51 Saturdays and
    51 Sundays plus 12 holidays.
    """

    working_days: int = 251
    saturdays: int = 51
    sundays_holidays: int = 63
    saturday_factor: float = 0.679
    sunday_factor: float = 0.494

    def __post_init__(self):
        for name in ("working_days", "saturdays", "sundays_holidays"):
            v = getattr(self, name)
            if int(v) != v or v <= 0:
                raise TemplanError(f"{name} must be a positive integer, got {v}")
        for name in ("saturday_factor", "sunday_factor"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise TemplanError(f"{name} must be in (0, 1], got {v}")

    @property
    def equivalent_working_days(self) -> float:
        return (self.working_days + self.saturday_factor * self.saturdays
                + self.sunday_factor * self.sundays_holidays)


# Fractions for 13:00 and 14:00 are back-computed from the 3694.65 and
# 4045.85 veh/h slots against the daily total implied by 3750.84 at 5.34%.
A1_HOURLY_FRACTIONS = {12: 0.0534, 13: 0.0526, 14: 0.0576}


@dataclass(frozen=True)
class HourlyProfile:
    """Share of daily flow per clock hour; may be partial."""

    fraction_by_hour: Mapping[int, float] = field(
        default_factory=lambda: dict(A1_HOURLY_FRACTIONS))

    def __post_init__(self):
        fr = {int(h): float(f) for h, f in dict(self.fraction_by_hour).items()}
        for h, f in fr.items():
            if not 0 <= h <= 23:
                raise TemplanError(f"hour {h} outside 0..23")
            if not 0 <= f <= 1:
                raise TemplanError(f"fraction for hour {h} must be in [0, 1], got {f}")
        if sum(fr.values()) > 1.0 + 1e-9:
            raise TemplanError(f"hourly fractions sum to {sum(fr.values())} > 1")
        object.__setattr__(self, "fraction_by_hour", MappingProxyType(fr))


def annual_to_daily(annual_flow: float, cal: DayTypeCalendar = DayTypeCalendar()) -> float:
    """Working-day flow from annual flow (divisor 316.751 for the default calendar)."""
    if annual_flow < 0:
        raise TemplanError(f"annual flow must be >= 0, got {annual_flow}")
    return annual_flow / cal.equivalent_working_days


def daily_to_hourly(daily_flow: float, hour: int, profile: HourlyProfile = HourlyProfile()) -> float:
    try:
        frac = profile.fraction_by_hour[hour]
    except KeyError:
        raise TemplanError(f"hourly profile does not define hour {hour}") from None
    return daily_flow * frac


def hourly_to_daily(hourly_flow: float, hour: int, profile: HourlyProfile = HourlyProfile()) -> float:
    """Inverse of :func:`daily_to_hourly`."""
    try:
        frac = profile.fraction_by_hour[hour]
    except KeyError:
        raise TemplanError(f"hourly profile does not define hour {hour}") from None
    if frac == 0:
        raise TemplanError(f"hour {hour} has zero share; cannot invert")
    return hourly_flow / frac


def split_by_response(flow: float, response_rate: float) -> tuple[float, float]:
    """Return ``(diverted, remaining)``; the two always add back to ``flow``."""
    if not 0 <= response_rate <= 1:
        raise TemplanError(f"response rate must be in [0, 1], got {response_rate}")
    diverted = response_rate * flow
    # remainder by subtraction keeps diverted + remaining == flow
    return diverted, flow - diverted


def branch_split(diverted: float, weights: Sequence[float]) -> list[float]:
    """Share ``diverted`` across branches in proportion to ``weights``."""
    weights = list(weights)
    if not weights or any(w < 0 for w in weights):
        raise TemplanError("branch weights must be a nonempty list of nonnegative numbers")
    if abs(math.fsum(weights) - 1.0) > 1e-9:
        raise TemplanError(f"branch weights must sum to 1, got {math.fsum(weights)}")
    flows = [diverted * w for w in weights]
    # push the rounding residue into the largest branch
    k = max(range(len(flows)), key=lambda i: (weights[i], -i))
    flows[k] = diverted - math.fsum(f for i, f in enumerate(flows) if i != k)
    return flows


def headway_minutes(flow: float) -> float:
    if flow <= 0:
        raise TemplanError(f"flow must be > 0 for a headway, got {flow}")
    return 60.0 / flow
