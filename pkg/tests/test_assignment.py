import numpy as np
import pytest

from conftest import link, random_network
from oracles import brute_force_aon, simple_paths, path_cost
from templan.assignment import (aon_assign, disruption_diff, extract_itinerary, make_itinerary,
                                read_link_flows, shortest_path, write_itinerary, write_link_flows)
from templan.errors import NetworkError, NoPathError
from templan.netmodel import ClosureScenario, Network, ODMatrix, apply_closure


def test_shortest_path_on_corridor(corridor):
    net, _ = corridor
    assert shortest_path(net, "A", "C").links == ("AB", "BC")
    closed = apply_closure(net, ClosureScenario(("AB",), 1.0))
    assert shortest_path(closed, "A", "C").links == ("AD", "DC")
    assert shortest_path(closed, "A", "C", {"local"}).links == ("AE", "EC")


def test_tie_break_is_lexicographic():
    # two 2-minute routes a->c; the one whose link ids sort first wins
    net = Network.from_links([link("p1", "a", "x", 1.0), link("p2", "x", "c", 1.0),
                              link("k1", "a", "y", 1.0), link("k2", "y", "c", 1.0)])
    assert shortest_path(net, "a", "c").links == ("k1", "k2")


def test_unroutable_pair_named():
    net = Network.from_links([link("ab", "a", "b")], nodes={"a": None, "b": None, "c": None})
    with pytest.raises(NoPathError, match=r"\(a, c\)"):
        aon_assign(net, ODMatrix({("a", "c"): 10.0}))


def test_aon_conserves_demand(corridor):
    net, _ = corridor
    od = ODMatrix({("A", "C"): 3000.0, ("C", "A"): 1000.0, ("A", "D"): 200.0})
    flows = aon_assign(net, od)
    assert set(flows) == set(net.links)
    assert flows["AB"] == 3000.0 and flows["BC"] == 3000.0
    assert flows["CB"] == 1000.0 and flows["AD"] == 200.0
    assert flows["AE"] == 0.0


def test_disruption_diff(corridor):
    net, _ = corridor
    od = ODMatrix({("A", "C"): 3000.0})
    base = aon_assign(net, od)
    closed = aon_assign(apply_closure(net, ClosureScenario(("BC",), 1.0)), od)
    disrupted, diverted = disruption_diff(base, closed)
    assert disrupted["AB"] == 3000.0 and disrupted["BC"] == 3000.0
    assert diverted["AD"] == 3000.0 and diverted["DC"] == 3000.0
    assert all(v >= 0 for v in (*disrupted.values(), *diverted.values()))
    for lid in net.links:
        assert base[lid] - disrupted[lid] + diverted[lid] == closed[lid]


def test_itinerary_kinds(corridor):
    net, _ = corridor
    closure = ClosureScenario(("AB", "BA"), 2.0)
    macro = extract_itinerary(net, closure, "A", "C", "macro_left")
    micro = extract_itinerary(net, closure, "A", "C", "micro")
    assert macro.links == ("AD", "DC") and micro.links == ("AE", "EC")
    assert micro.length_km == pytest.approx(3.2)
    with pytest.raises(NetworkError, match="road classes"):
        make_itinerary(net, ("AD", "DC"), "micro")
    with pytest.raises(NetworkError, match="not consecutive"):
        make_itinerary(net, ("AD", "EC"))


def test_flow_and_itinerary_files(tmp_path, corridor):
    net, _ = corridor
    flows = aon_assign(net, ODMatrix({("A", "C"): 1234.5}))
    write_link_flows(flows, tmp_path / "f.csv")
    assert read_link_flows(tmp_path / "f.csv") == flows
    itin = shortest_path(net, "A", "C")
    write_itinerary(net, itin, tmp_path / "i.csv", tmp_path / "i.json")
    lines = (tmp_path / "i.csv").read_text().splitlines()
    assert lines[0] == "seq,link_id,length_km" and lines[1].startswith("1,AB,")


@pytest.mark.parametrize("seed", range(40))
def test_shortest_path_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, integer_costs=seed % 2 == 0)
    nodes = sorted(net.nodes)
    for o in nodes:
        for d in nodes:
            if o == d:
                continue
            paths = simple_paths(net, o, d)
            if not paths:
                with pytest.raises(NoPathError):
                    shortest_path(net, o, d)
                continue
            best = min(paths, key=lambda p: (path_cost(net, p), p))
            assert shortest_path(net, o, d).links == best


def test_aon_matches_brute_force_small():
    rng = np.random.default_rng(7)
    for _ in range(20):
        net = random_network(rng, integer_costs=True)
        nodes = sorted(net.nodes)
        od = ODMatrix({(nodes[0], nodes[-1]): 10.0})
        expected = brute_force_aon(net, od)
        if expected is None:
            with pytest.raises(NoPathError):
                aon_assign(net, od)
        else:
            assert aon_assign(net, od) == expected
