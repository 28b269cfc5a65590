"""Command-line front end.

    templan <command> [--config FILE] [--profile paper-a1-flood] [--out DIR]

Commands: assign, activate, sweep, delay, curves, evacuate. Data files are
deterministic; run metadata goes to ``manifest.json`` in the output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import TemplanError

log = logging.getLogger("templan")

OUT_ENV = "TEMPLAN_OUT"
PROFILES = ("paper-a1-flood",)
_PROFILE_FILES = {"paper-a1-flood": "paper_a1_flood.json"}


def data_path(name: str) -> Path:
    return Path(str(resources.files("templan") / "data" / name))


def load_profile(name: str) -> dict:
    if name not in _PROFILE_FILES:
        raise TemplanError(f"unknown profile {name!r}; available: {', '.join(PROFILES)}")
    doc = json.loads(data_path(_PROFILE_FILES[name]).read_text(encoding="utf-8"))
    if isinstance(doc.get("evacuation"), str):
        doc["evacuation"] = str(data_path(doc["evacuation"]))
    return doc


@dataclass
class ScenarioConfig:
    network: Optional[Path] = None
    od: Optional[Path] = None
    closure: dict = field(default_factory=dict)
    itineraries: list = field(default_factory=list)
    durations_hr: list = field(default_factory=list)
    delay_durations_hr: Optional[list] = None
    response_rate: float = 0.6
    response_rates: list = field(default_factory=list)
    arrivals_vph: list = field(default_factory=list)
    arrival_horizon_hr: float = 12.0
    queue: dict = field(default_factory=dict)
    delay_statistic: str = "maximum"
    calendar: dict = field(default_factory=dict)
    hourly_profile: dict = field(default_factory=dict)
    activation: Optional[dict] = None
    evacuation: Optional[Path] = None
    output_dir: Optional[Path] = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Optional[Path] = None) -> "ScenarioConfig":
        def path(key):
            v = doc.get(key)
            if v is None:
                return None
            p = Path(v)
            return p if p.is_absolute() or base_dir is None else (base_dir / p)

        cfg = cls(
            network=path("network"), od=path("od"),
            closure=dict(doc.get("closure") or {}),
            itineraries=list(doc.get("itineraries") or []),
            durations_hr=[float(d) for d in doc.get("durations_hr") or []],
            delay_durations_hr=([float(d) for d in doc["delay_durations_hr"]]
                                if doc.get("delay_durations_hr") is not None else None),
            response_rate=float(doc.get("response_rate", 0.6)),
            response_rates=[float(r) for r in doc.get("response_rates") or []],
            arrivals_vph=[float(f) for f in doc.get("arrivals_vph") or []],
            arrival_horizon_hr=float(doc.get("arrival_horizon_hr", 12.0)),
            queue=dict(doc.get("queue") or {}),
            delay_statistic=str(doc.get("delay_statistic", "maximum")),
            calendar=dict(doc.get("calendar") or {}),
            hourly_profile=dict(doc.get("hourly_profile") or {}),
            activation=doc.get("activation"),
            evacuation=path("evacuation"),
            output_dir=path("output_dir"),
            raw=doc,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("network", "od", "evacuation"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise TemplanError(f"{name} file not found: {p}")
        if any(d <= 0 for d in self.durations_hr):
            raise TemplanError("durations_hr must all be > 0")
        if self.delay_durations_hr is not None and any(d < 0 for d in self.delay_durations_hr):
            raise TemplanError("delay_durations_hr must all be >= 0")
        for r in [self.response_rate, *self.response_rates]:
            if not 0 <= r <= 1:
                raise TemplanError(f"response rate {r} outside [0, 1]")


def build_config(args) -> ScenarioConfig:
    doc: dict = {}
    if args.profile:
        doc.update(load_profile(args.profile))
    base_dir = None
    if args.config:
        cpath = Path(args.config)
        try:
            user = json.loads(cpath.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise TemplanError(f"config file not found: {cpath}") from None
        except json.JSONDecodeError as exc:
            raise TemplanError(f"config {cpath} is not valid JSON: {exc}") from None
        doc.update(user)
        base_dir = cpath.resolve().parent
    if not doc:
        raise TemplanError("give --config and/or --profile")
    return ScenarioConfig.from_dict(doc, base_dir)


class Outputs:
    """Tracks files written by a command for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")

    def manifest(self, command: str, cfg: ScenarioConfig) -> None:
        cfg_hash = hashlib.sha256(json.dumps(cfg.raw, sort_keys=True, default=str)
                                  .encode("utf-8")).hexdigest()
        digests = {}
        for name in sorted(self.files):
            digests[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
        (self.root / "manifest.json").write_text(json.dumps(
            {"command": command, "templan_version": __version__, "config_sha256": cfg_hash,
             "outputs": digests}, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _queue_params(cfg: ScenarioConfig):
    from .queueing import QueueParams
    return QueueParams(**cfg.queue)


def _arrivals(cfg: ScenarioConfig):
    from .queueing import build_arrivals
    if not cfg.arrivals_vph:
        raise TemplanError("config has no arrivals_vph")
    return build_arrivals(cfg.arrivals_vph, float(cfg.closure.get("start_clock", 12.0)),
                          cfg.arrival_horizon_hr)


def _fixtures(cfg: ScenarioConfig):
    from .activation import fixtures_from_dict
    if not cfg.activation:
        raise TemplanError("config has no activation fixtures")
    return fixtures_from_dict(cfg.activation)


def cmd_assign(cfg: ScenarioConfig, out: Outputs, figures: bool) -> None:
    from .assignment import (aon_assign, disruption_diff, extract_itinerary,
                             write_itinerary, write_link_flows)
    from .flowtime import route_time, write_route_times
    from .netmodel import ClosureScenario, apply_closure, load_network, load_od

    if cfg.network is None or cfg.od is None:
        raise TemplanError("assign needs 'network' and 'od' in the config")
    net = load_network(cfg.network)
    od = load_od(cfg.od, net)
    if not cfg.closure.get("closed_link_ids"):
        raise TemplanError("assign needs closure.closed_link_ids")
    closure = ClosureScenario(closed_link_ids=tuple(cfg.closure["closed_link_ids"]),
                              duration_hr=float(cfg.closure.get("duration_hr", 1.0)),
                              start_clock=float(cfg.closure.get("start_clock", 12.0)),
                              barrier_node_ids=tuple(cfg.closure.get("barrier_node_ids", ())))
    base = aon_assign(net, od)
    closed = aon_assign(apply_closure(net, closure), od)
    disrupted, diverted = disruption_diff(base, closed)
    for name, flows in (("base_flows.csv", base), ("closed_flows.csv", closed),
                        ("disrupted_flows.csv", disrupted), ("diverted_flows.csv", diverted)):
        write_link_flows(flows, out.path(name))

    rows = []
    for spec in cfg.itineraries:
        name = spec.get("name", spec["kind"])
        itin = extract_itinerary(net, closure, spec["start"], spec["end"], spec["kind"])
        write_itinerary(net, itin, out.path(f"itinerary_{name}.csv"),
                        out.path(f"itinerary_{name}.json"))
        rows.append((name, route_time(net, itin, base, diverted), itin.length_km))
    if rows:
        write_route_times(rows, out.path("route_times.csv"))
    if figures:
        from .plots import plot_link_flows
        plot_link_flows(net, base, out.path("base_flows.png"), "base flows (veh/h)")
        plot_link_flows(net, diverted, out.path("diverted_flows.png"), "diverted flows (veh/h)")


def cmd_activate(cfg: ScenarioConfig, out: Outputs, figures: bool) -> None:
    from .activation import _lookup_rate, activation_plan, write_plan_csv, write_plan_json
    if not cfg.durations_hr:
        raise TemplanError("durations_hr is empty")
    fx = _lookup_rate(_fixtures(cfg), cfg.response_rate)
    plan = activation_plan(cfg.durations_hr, fx)
    tag = f"{round(cfg.response_rate * 100):d}"
    write_plan_csv(plan, out.path(f"activation_plan_r{tag}.csv"))
    write_plan_json(plan, out.path(f"activation_strategy_r{tag}.json"))
    if figures:
        from .plots import plot_strategy
        plot_strategy(plan, out.path(f"activation_strategy_r{tag}.png"))


def cmd_sweep(cfg: ScenarioConfig, out: Outputs, figures: bool) -> None:
    from .activation import response_sweep, write_sweep_csv
    if not cfg.durations_hr:
        raise TemplanError("durations_hr is empty")
    rates = cfg.response_rates or [cfg.response_rate]
    rows = response_sweep(rates, _fixtures(cfg), cfg.durations_hr)
    write_sweep_csv(rows, out.path("response_sweep.csv"))
    out.write_json("response_sweep.json", [
        {"response_rate": r.response_rate, "fixture_source": r.source,
         "activation": list(r.lines), **r.plan.strategy()} for r in rows])
    if figures:
        from .plots import plot_strategy
        for r in rows:
            plot_strategy(r.plan, out.path(f"strategy_r{round(r.response_rate * 100):d}.png"))


def _delay_durations(cfg: ScenarioConfig) -> list:
    ds = cfg.delay_durations_hr if cfg.delay_durations_hr is not None else cfg.durations_hr
    if not ds:
        raise TemplanError("no closure durations given (delay_durations_hr / durations_hr)")
    return ds


def cmd_delay(cfg: ScenarioConfig, out: Outputs, figures: bool) -> None:
    from .queueing import io_delay, reconcile_brackets
    arr, p = _arrivals(cfg), _queue_params(cfg)
    results = [io_delay(arr, d, p) for d in _delay_durations(cfg)]
    out.write_json("delays.json", {
        "statistic": cfg.delay_statistic,
        "results": [dict(r.as_dict(), selected_delay_min=round(r.statistic(cfg.delay_statistic), 6))
                    for r in results]})
    rows = reconcile_brackets(arr, p)
    with out.path("delay_reconciliation.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "representative", "include_bottleneck_traversal",
                    "delay_bracket1_min", "delay_bracket2_min", "delay_bracket3_min",
                    "max_rel_error"])
        for r in rows:
            w.writerow([r["statistic"], r["representative"], r["include_bottleneck_traversal"],
                        *[f"{v:.1f}" for v in r["delays_min"]], f"{r['max_rel_error']:.4f}"])


def cmd_curves(cfg: ScenarioConfig, out: Outputs, figures: bool) -> None:
    from .queueing import io_delay, write_curves
    arr, p = _arrivals(cfg), _queue_params(cfg)
    results = []
    for d in _delay_durations(cfg):
        res = io_delay(arr, d, p)
        write_curves(res, out.path(f"curves_{d:g}h.csv"))
        results.append(res)
    if figures:
        from .plots import plot_io_diagram
        plot_io_diagram(results, out.path("io_diagram.png"), arr.start_clock)


def cmd_evacuate(cfg: ScenarioConfig, out: Outputs, figures: bool) -> None:
    from .evacuation import load_scenario, run_scenarios, write_series_csv
    from .netmodel import load_network
    if cfg.evacuation is None:
        raise TemplanError("config has no evacuation scenario file")
    sc = load_scenario(cfg.evacuation)
    net_path = sc.network_path or cfg.network
    if net_path is None:
        raise TemplanError("evacuation scenario names no network")
    net = load_network(net_path)
    rows = run_scenarios(net, sc)
    exit_ids = [e.id for e in sc.exits]
    summary = []
    with out.path("evacuation_results.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "strategy", "departure_profile", "clearance_min",
                    "clearance_hhmm", *[f"vehicles_{e}" for e in exit_ids], "total"])
        for i, row in enumerate(rows):
            res = row["result"]
            scen = sc.strategies.index(row["strategy"]) + 1
            w.writerow([scen, row["strategy"], row["profile"], res.clearance_time_min,
                        res.clearance_hhmm, *[row["loads"].get(e, 0) for e in exit_ids],
                        res.total_vehicles])
            write_series_csv(res, out.path(f"series_{row['strategy']}_p{row['profile']}.csv"))
            summary.append({"scenario": scen, "strategy": row["strategy"],
                            "departure_profile": row["profile"], "fractions": row["fractions"],
                            "clearance_min": res.clearance_time_min,
                            "clearance_hhmm": res.clearance_hhmm,
                            "last_exit_min": round(res.last_exit_min, 6),
                            "per_exit": dict(sorted(res.per_exit.items())),
                            "assigned_vehicles": row["loads"],
                            "total_vehicles": res.total_vehicles})
    out.write_json("evacuation_summary.json", summary)
    if figures:
        from .plots import plot_evacuation
        plot_evacuation({f"{r['strategy']}, profile {r['profile']}": r["result"].series
                         for r in rows}, out.path("evacuation.png"))


COMMANDS = {
    "assign": cmd_assign,
    "activate": cmd_activate,
    "sweep": cmd_sweep,
    "delay": cmd_delay,
    "curves": cmd_curves,
    "evacuate": cmd_evacuate,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="templan", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"templan {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().split("\n")[0])
        sp.add_argument("--config", help="scenario config JSON")
        sp.add_argument("--profile", choices=PROFILES, help="built-in default profile")
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./templan-out)")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        root = Path(args.out or cfg.output_dir or os.environ.get(OUT_ENV) or "templan-out")
        out = Outputs(root)
        COMMANDS[args.command](cfg, out, not args.no_figures)
        out.manifest(args.command, cfg)
    except (TemplanError, KeyError) as exc:
        print(f"templan {args.command}: error: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %d file(s) to %s", len(out.files), root)
    return 0


if __name__ == "__main__":
    sys.exit(main())
