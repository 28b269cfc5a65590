"""Generate the synthetic river-town evacuation fixture.

A 8 x 6 grid of local streets (one zone per intersection, 48 zones) with
four exit points: two on the north edge next to the dense blocks, one on the
east edge and one on the south edge. Writes the GeoJSON network and the
scenario JSON into ``src/templan/data``.
"""

import argparse
import json
import math
from pathlib import Path

COLS, ROWS = 8, 6
SPACING_KM = 0.3
ORIGIN = (9.700, 45.080)  # lon, lat
STREET = dict(lanes=1, free_flow_kmh=30.0, capacity_vph=900.0, road_class="local")
# exit id -> (grid node it hangs off, direction offset, connector capacity veh/h,
# access road length km). East and south exits sit behind longer access roads.
EXITS = {
    "E1": ((0, 1), (0.0, 1.0), 600.0, 1.0),
    "E2": ((0, 5), (0.0, 1.0), 600.0, 1.0),
    "E3": ((3, 7), (1.0, 0.0), 360.0, 3.0),
    "E4": ((5, 3), (0.0, -1.0), 360.0, 3.0),
}
ACCESS_KMH = 30.0
HEAVY = range(5, 18)  # zone numbers with more vehicles
TOTAL = 1308


def node_xy(r, c):
    dlat = SPACING_KM / 111.195
    dlon = SPACING_KM / (111.195 * math.cos(math.radians(ORIGIN[1])))
    return (round(ORIGIN[0] + c * dlon, 7), round(ORIGIN[1] - r * dlat, 7))


def zone_vehicles():
    weights = [3.0 if k in HEAVY else 1.0 for k in range(1, COLS * ROWS + 1)]
    # deterministic variation so zones are not identical
    weights = [w * (1.0 + 0.15 * math.sin(1.7 * k)) for k, w in enumerate(weights, start=1)]
    raw = [TOTAL * w / sum(weights) for w in weights]
    counts = [int(x) for x in raw]
    for i in sorted(range(len(raw)), key=lambda i: -(raw[i] - counts[i]))[:TOTAL - sum(counts)]:
        counts[i] += 1
    return counts


def build():
    feats = []
    for r in range(ROWS):
        for c in range(COLS):
            feats.append({"type": "Feature", "properties": {"id": f"n{r}{c}"},
                          "geometry": {"type": "Point", "coordinates": list(node_xy(r, c))}})

    def street(a, b, props):
        (ra, ca), (rb, cb) = a, b
        return {"type": "Feature",
                "properties": {"id": f"n{ra}{ca}-n{rb}{cb}", "from_node": f"n{ra}{ca}",
                               "to_node": f"n{rb}{cb}", **props},
                "geometry": {"type": "LineString",
                             "coordinates": [list(node_xy(ra, ca)), list(node_xy(rb, cb))]}}

    for r in range(ROWS):
        for c in range(COLS):
            for dr, dc in ((0, 1), (1, 0)):
                rb, cb = r + dr, c + dc
                if rb < ROWS and cb < COLS:
                    feats.append(street((r, c), (rb, cb), STREET))
                    feats.append(street((rb, cb), (r, c), STREET))
    for eid, ((r, c), (dx, dy), cap, length) in EXITS.items():
        x, y = node_xy(r, c)
        # place the exit node so the straight connector matches the declared length
        ex = (round(x + dx * length / (111.195 * math.cos(math.radians(y))), 7),
              round(y + dy * length / 111.195, 7))
        feats.append({"type": "Feature", "properties": {"id": eid},
                      "geometry": {"type": "Point", "coordinates": list(ex)}})
        feats.append({"type": "Feature",
                      "properties": {"id": f"n{r}{c}-{eid}", "from_node": f"n{r}{c}",
                                     "to_node": eid, "lanes": 1, "free_flow_kmh": ACCESS_KMH,
                                     "length_km": length, "capacity_vph": cap,
                                     "road_class": "local"},
                      "geometry": {"type": "LineString", "coordinates": [[x, y], list(ex)]}})
    return {"type": "FeatureCollection", "features": feats}


def scenario(overrides):
    counts = zone_vehicles()
    zones = [{"id": f"Z{k:02d}", "node": f"n{(k - 1) // COLS}{(k - 1) % COLS}",
              "vehicles": counts[k - 1]} for k in range(1, COLS * ROWS + 1)]
    return {
        "network": "river_town.geojson",
        "zones": zones,
        "exits": [{"id": e, "node": e} for e in EXITS],
        "strategies": ["nearest", "balanced", "override"],
        "override_base": "balanced",
        "overrides": overrides,
        "profiles": [[0.20, 0.50, 0.20, 0.10], [0.40, 0.10, 0.30, 0.20]],
        "slot_minutes": 15,
        "horizon_hr": 12,
        "reference": {
            "note": "per-exit counts and clearance times reported for the real town; "
                    "documentation only, not test expectations",
            "exit_loads": {"nearest": [679, 530, 79, 20], "balanced": [360, 338, 287, 324],
                           "override": [360, 458, 279, 211]},
            "clearance_hhmm": {"nearest": ["2:52", "2:30"], "balanced": ["1:47", "1:46"],
                               "override": ["1:35", "1:30"]},
        },
    }


# two zones that the balanced rule sends to the slow east/south exits, moved to E2
OVERRIDES = {"Z06": "E2", "Z07": "E2"}

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/templan/data"))
    args = ap.parse_args()
    out = Path(args.out)
    (out / "river_town.geojson").write_text(json.dumps(build(), indent=1) + "\n")
    (out / "river_town_scenario.json").write_text(json.dumps(scenario(OVERRIDES), indent=2) + "\n")
