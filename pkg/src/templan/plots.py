"""Figure rendering for CLI reports (PNG files next to the CSV/JSON outputs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# muted, colour-blind-safe palette
PALETTE = ["#0072B2", "#D55E00", "#009E73", "#CC79A7", "#E69F00", "#56B4E9", "#F0E442"]

REPORT_RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "lines.linewidth": 1.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "figure.figsize": (6.4, 4.0),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_io_diagram(results, path, clock0: float = 12.0):
    """Cumulative arrivals and departures for one or more closure durations."""
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots()
        ta, na = np.array(results[0].arrival_points).T
        end = max(np.ceil(r.clearance_hr + 1e-9) for r in results)
        end = max(end, 1.0)
        t = np.linspace(0.0, end, 400)
        ax.plot(clock0 + t, np.interp(t, ta, na), color="k", label="arrivals N(t)")
        for i, r in enumerate(results):
            td, nd = np.array(r.departure_points).T
            ax.plot(clock0 + t, np.interp(t, td, nd), color=PALETTE[i % len(PALETTE)],
                    linestyle="--", label=f"departures, {r.closure_duration_hr:g} h closure")
        ax.set_xlabel("clock time (h)")
        ax.set_ylabel("cumulative vehicles")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_evacuation(series_by_label: dict, path):
    """Vehicles in the network over time, one line per scenario/profile."""
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots()
        for i, (label, series) in enumerate(series_by_label.items()):
            t = [s[0] for s in series]
            n = [s[1] for s in series]
            ax.plot(t, n, color=PALETTE[(i // 2) % len(PALETTE)],
                    linestyle="-" if i % 2 == 0 else ":", label=label)
        ax.set_xlabel("minutes after evacuation order")
        ax.set_ylabel("vehicles in network")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_strategy(plan, path):
    """Open routes per closure duration, as horizontal bars."""
    routes = ["macro_left", "macro_right", "micro"]
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots(figsize=(6.4, 2.6))
        ds = list(plan.durations_hr)
        width = min(np.diff(ds)) if len(ds) > 1 else 0.5
        for j, route in enumerate(routes):
            on = [d for d in ds if route in plan.open_routes(d)]
            ax.broken_barh([(d - width / 2, width) for d in on], (j - 0.35, 0.7),
                           color=PALETTE[j])
        ax.set_yticks(range(len(routes)))
        ax.set_yticklabels(routes)
        ax.set_xticks(ds)
        ax.set_xlabel("event duration (h)")
        ax.set_title(f"open itineraries, response rate {plan.response_rate:.0%}")
        _save(fig, path)


def plot_link_flows(net, flows: dict, path, title: str = ""):
    """Links drawn between node coordinates with width proportional to flow."""
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots()
        peak = max(flows.values(), default=0.0) or 1.0
        for lid in sorted(net.links):
            link = net.links[lid]
            a, b = net.nodes[link.from_node], net.nodes[link.to_node]
            if a is None or b is None:
                continue
            q = flows.get(lid, 0.0)
            ax.plot([a[0], b[0]], [a[1], b[1]], color=PALETTE[0] if q > 0 else "0.8",
                    linewidth=0.5 + 4.0 * q / peak)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("lon")
        ax.set_ylabel("lat")
        if title:
            ax.set_title(title)
        _save(fig, path)
