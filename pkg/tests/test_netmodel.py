import json
import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from conftest import link, write_geojson
from oracles import equator_km
from templan.errors import NetworkError
from templan.netmodel import (EARTH_RADIUS_KM, ClosureScenario, LengthMismatchWarning, Network,
                              ODMatrix, apply_closure, haversine_km, load_network, load_od,
                              polyline_length_km, save_network)


def test_link_validation():
    with pytest.raises(NetworkError, match="lanes"):
        link("x", "a", "b", lanes=0)
    with pytest.raises(NetworkError, match="length_km"):
        link("x", "a", "b", length=0.0)
    with pytest.raises(NetworkError, match="free_flow_kmh"):
        link("x", "a", "b", vf=5.0)
    with pytest.raises(NetworkError, match="road_class"):
        link("x", "a", "b", cls="motorway")
    assert link("x", "a", "b", length=2.0, vf=120.0).free_flow_min == pytest.approx(1.0)


def test_network_rejects_dangling_and_duplicates():
    with pytest.raises(NetworkError, match="dangling"):
        Network(nodes={"a": None}, links={"x": link("x", "a", "b")})
    with pytest.raises(NetworkError, match="duplicate"):
        Network.from_links([link("x", "a", "b"), link("x", "b", "a")])


def test_closure_and_barrier(corridor):
    net, _ = corridor
    closed = apply_closure(net, ClosureScenario(("AB",), 1.0, barrier_node_ids=("E",)))
    assert not closed.is_open("AB")
    assert closed.is_open("BA")
    assert not closed.is_open("AE") and not closed.is_open("EC")
    # the original is untouched
    assert net.is_open("AB") and net.is_open("AE")
    with pytest.raises(NetworkError, match="unknown link"):
        apply_closure(net, ClosureScenario(("ZZ",), 1.0))
    with pytest.raises(NetworkError):
        ClosureScenario((), 1.0)
    with pytest.raises(NetworkError):
        ClosureScenario(("AB",), 0.0)


@given(st.floats(-179.0, 179.0), st.floats(0.001, 1.0))
@settings(max_examples=200, deadline=None)
def test_haversine_along_equator(lon, dlon):
    assert haversine_km((lon, 0.0), (lon + dlon, 0.0)) == pytest.approx(
        equator_km(dlon, EARTH_RADIUS_KM), rel=1e-9)


def test_polyline_length_is_additive():
    pts = [(0.0, 0.0), (0.3, 0.0), (0.3, 0.4)]
    assert polyline_length_km(pts) == pytest.approx(
        haversine_km(pts[0], pts[1]) + haversine_km(pts[1], pts[2]))


def test_geojson_round_trip(tmp_path, corridor):
    net, coords = corridor
    write_geojson(tmp_path / "c.geojson", net, coords)
    loaded = load_network(tmp_path / "c.geojson")
    assert sorted(loaded.links) == sorted(net.links)
    for lid, l in net.links.items():
        got = loaded.links[lid]
        assert (got.from_node, got.to_node, got.length_km, got.lanes) == \
            (l.from_node, l.to_node, l.length_km, l.lanes)
    save_network(loaded, tmp_path / "again.geojson")
    again = load_network(tmp_path / "again.geojson")
    assert dict(again.links) == dict(loaded.links)
    assert dict(again.nodes) == dict(loaded.nodes)


def test_geojson_endpoints_from_points(tmp_path):
    doc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"id": "p"}, "geometry": {"type": "Point", "coordinates": [0, 0]}},
        {"type": "Feature", "properties": {"id": "q"}, "geometry": {"type": "Point", "coordinates": [0.01, 0]}},
        {"type": "Feature", "properties": {"id": "pq", "lanes": 1, "free_flow_kmh": 50,
                                           "capacity_vph": 900, "road_class": "local"},
         "geometry": {"type": "LineString", "coordinates": [[0, 0], [0.01, 0]]}}]}
    (tmp_path / "n.geojson").write_text(json.dumps(doc))
    net = load_network(tmp_path / "n.geojson")
    pq = net.links["pq"]
    assert (pq.from_node, pq.to_node) == ("p", "q")
    assert pq.length_km == pytest.approx(equator_km(0.01, EARTH_RADIUS_KM))


def _one_link_doc(**props):
    base = {"id": "ab", "from_node": "a", "to_node": "b", "lanes": 1, "free_flow_kmh": 50,
            "capacity_vph": 900, "road_class": "local"}
    base.update(props)
    return {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {k: v for k, v in base.items() if v is not None},
         "geometry": {"type": "LineString", "coordinates": [[0, 0], [0.01, 0]]}}]}


def test_missing_capacity_is_an_error(tmp_path):
    (tmp_path / "n.geojson").write_text(json.dumps(_one_link_doc(capacity_vph=None)))
    with pytest.raises(NetworkError, match="ab.*capacity_vph"):
        load_network(tmp_path / "n.geojson")


def test_length_mismatch_warns(tmp_path):
    (tmp_path / "n.geojson").write_text(json.dumps(_one_link_doc(length_km=2.0)))
    with pytest.warns(LengthMismatchWarning, match="ab"):
        net = load_network(tmp_path / "n.geojson")
    assert net.links["ab"].length_km == 2.0
    (tmp_path / "ok.geojson").write_text(json.dumps(_one_link_doc(length_km=1.15)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        load_network(tmp_path / "ok.geojson")


def test_load_od(tmp_path, corridor):
    net, _ = corridor
    p = tmp_path / "od.csv"
    p.write_text("origin,destination,demand\nA,C,100\nC,A,50\nA,C,25\n")
    od = load_od(p, net)
    assert od.entries[("A", "C")] == 125.0
    assert od.total == 175.0
    assert od.pairs() == [("A", "C"), ("C", "A")]

    p.write_text("origin,destination,demand\nA,C,100\nA,Q,5\n")
    with pytest.raises(NetworkError, match=r"row 3: unknown node 'Q'"):
        load_od(p, net)
    p.write_text("origin,destination,demand\nA,C,-1\n")
    with pytest.raises(NetworkError, match="row 2: negative"):
        load_od(p)
    p.write_text("origin,destination,demand,time_label\nA,C,1,am\nC,A,1,pm\n")
    with pytest.raises(NetworkError, match="mixed time labels"):
        load_od(p)


def test_od_rejects_nan():
    with pytest.raises(NetworkError):
        ODMatrix({("a", "b"): math.nan})
