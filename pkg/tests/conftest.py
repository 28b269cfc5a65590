import json

import numpy as np
import pytest

from templan.netmodel import Link, Network

# acceptance lines collected by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def link(lid, a, b, length=1.0, lanes=1, vf=60.0, cap=1800.0, cls="highway", **kw):
    return Link(lid, a, b, length, lanes, vf, cap, cls, **kw)


def random_network(rng: np.random.Generator, n_nodes=None, n_links=None, integer_costs=False):
    """Random directed network with at most 8 nodes and 16 links."""
    n_nodes = n_nodes or int(rng.integers(2, 9))
    n_links = n_links or int(rng.integers(1, 17))
    nodes = [f"v{i}" for i in range(n_nodes)]
    links = []
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    picks = rng.choice(len(pairs), size=min(n_links, len(pairs)), replace=False)
    for k, i in enumerate(sorted(picks)):
        a, b = pairs[i]
        # integer minutes make equal-cost ties common, exercising the tie-break
        length = float(rng.integers(1, 4)) if integer_costs else float(rng.uniform(0.2, 5.0))
        links.append(link(f"L{k:02d}", a, b, length=length, vf=60.0))
    return Network.from_links(links, nodes={n: None for n in nodes})


def write_geojson(path, net: Network, coords: dict):
    feats = [{"type": "Feature", "properties": {"id": n},
              "geometry": {"type": "Point", "coordinates": list(coords[n])}} for n in sorted(coords)]
    for lid in sorted(net.links):
        l = net.links[lid]
        feats.append({"type": "Feature",
                      "properties": {"id": lid, "from_node": l.from_node, "to_node": l.to_node,
                                     "length_km": l.length_km, "lanes": l.lanes,
                                     "free_flow_kmh": l.free_flow_kmh,
                                     "capacity_vph": l.capacity_vph, "road_class": l.road_class},
                      "geometry": {"type": "LineString",
                                   "coordinates": [list(coords[l.from_node]),
                                                   list(coords[l.to_node])]}})
    path.write_text(json.dumps({"type": "FeatureCollection", "features": feats}))


@pytest.fixture
def corridor():
    """Motorway A-B-C with a highway bypass A-D-C and a local detour A-E-C.

    All links carry both directions. Node coordinates sit on a 0.01 degree
    lattice near the equator.
    """
    coords = {"A": (0.0, 0.0), "B": (0.01, 0.0), "C": (0.02, 0.0),
              "D": (0.01, 0.01), "E": (0.01, -0.01)}
    spec = [("A", "B", 1.1, 2, 120.0, "highway"), ("B", "C", 1.1, 2, 120.0, "highway"),
            ("A", "D", 1.6, 2, 100.0, "highway"), ("D", "C", 1.6, 2, 100.0, "highway"),
            ("A", "E", 1.6, 1, 40.0, "local"), ("E", "C", 1.6, 1, 40.0, "local")]
    links = []
    for a, b, length, lanes, vf, cls in spec:
        for x, y in ((a, b), (b, a)):
            links.append(link(f"{x}{y}", x, y, length, lanes, vf, 1800.0 * lanes, cls))
    return Network.from_links(links, nodes=coords), coords
