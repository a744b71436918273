import json
import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from safla.nskg import (DOWN, SWITCH, DanglingLinkError, StateEvent, UnattachedHostError,
                        UnknownTargetError, access_switch, apply_event, attachment, build_nskg, dump_nskg, event_from_obj,
                        event_to_obj, neighbor_of, path_between)
from safla.simnet import mesh_link_count, mesh_switch_id, mesh_topology

DOC = {
    "nodes": [{"id": "s1", "kind": "Switch"}, {"id": "s2", "kind": "Switch"},
              {"id": "h1", "kind": "Host", "attrs": {"ip": "10.0.0.1"}},
              {"id": "h2", "kind": "Host", "attrs": {"ip": "10.0.0.2"}}],
    "links": [{"a": {"node": "s1", "port": 2}, "b": {"node": "s2", "port": 1}},
              {"a": {"node": "h1", "port": 0}, "b": {"node": "s1", "port": 5}},
              {"a": {"node": "h2", "port": 0}, "b": {"node": "s2", "port": 5}}],
}


def two_switch():
    return build_nskg(json.dumps(DOC))


def test_build_counts():
    g = two_switch()
    assert len(g.nodes) == 4 and len(g.links) == 3
    assert g.switches == ("s1", "s2") and g.hosts == ("h1", "h2")


def test_dangling_link():
    bad = dict(DOC, links=DOC["links"] + [{"a": {"node": "s1", "port": 9},
                                           "b": {"node": "s9", "port": 1}}])
    with pytest.raises(DanglingLinkError):
        build_nskg(bad)


def test_dump_round_trip():
    g = two_switch()
    assert build_nskg(dump_nskg(g)) == g


def test_mesh_counts():
    g = mesh_topology(10, 5)
    assert len(g.switches) == 50
    # enumerate the grid rule: right and down neighbours
    expected = sum((c + 1 < 5) + (r + 1 < 10) for r in range(10) for c in range(5))
    sw_links = [l for l in g.links if g.nodes[l.a[0]].kind == SWITCH == g.nodes[l.b[0]].kind]
    assert len(sw_links) == expected == mesh_link_count(10, 5)


def test_node_down_marks_links():
    g = apply_event(two_switch(), StateEvent("NodeDown", "s1"))
    assert g.nodes["s1"].status == DOWN
    link = g.link_index[frozenset({("s1", 2), ("s2", 1)})]
    assert link.status == DOWN
    assert g.revision == 1


def test_attr_set():
    g0 = two_switch()
    g = apply_event(g0, StateEvent("AttrSet", "h1", ("ip", "10.0.0.5")))
    assert g.nodes["h1"].attrs["ip"] == "10.0.0.5"
    assert g.links == g0.links


def test_link_up_on_down_node_unusable():
    g = apply_event(two_switch(), StateEvent("NodeDown", "s2"))
    g = apply_event(g, StateEvent("LinkUp", (("s1", 2), ("s2", 1))))
    assert path_between(g, "s1", "s2") is None
    assert neighbor_of(g, "s1", 2) is None


def test_unknown_target():
    with pytest.raises(UnknownTargetError):
        apply_event(two_switch(), StateEvent("NodeDown", "s9"))


def test_neighbor_of():
    g = two_switch()
    assert neighbor_of(g, "s1", 2) == "s2"
    assert neighbor_of(g, "s1", 7) is None
    g = apply_event(g, StateEvent("LinkDown", (("s1", 2), ("s2", 1))))
    assert neighbor_of(g, "s1", 2) is None


def test_path_identity_and_corners():
    g = mesh_topology(10, 10)
    assert path_between(g, "s001", "s001") == ["s001"]
    assert len(path_between(g, "s001", "s100")) == 19


def test_path_isolated():
    g = mesh_topology(3, 3)
    for n in ("s002", "s004"):
        g = apply_event(g, StateEvent("NodeDown", n))
    assert path_between(g, "s001", "s009") is None


def test_attachment():
    g = two_switch()
    assert attachment(g, "h1") == ("s1", 5) and access_switch(g, "h1") == "s1"
    down = apply_event(g, StateEvent("LinkDown", (("h1", 0), ("s1", 5))))
    with pytest.raises(UnattachedHostError):
        attachment(down, "h1")
    doc = dict(DOC, links=DOC["links"] + [{"a": {"node": "h1", "port": 1},
                                           "b": {"node": "s2", "port": 6}}])
    with pytest.raises(UnattachedHostError):
        attachment(build_nskg(doc), "h1")


def test_event_round_trip():
    for e in (StateEvent("NodeDown", "s1"), StateEvent("AttrSet", "h1", ("ip", "1.2.3.4")),
              StateEvent("LinkDown", (("s1", 2), ("s2", 1)))):
        assert event_from_obj(event_to_obj(e)) == e


# -- BFS oracle ---------------------------------------------------------------------

def _nx_graph(g):
    G = nx.Graph()
    G.add_nodes_from(n for n in g.switches if g.nodes[n].up)
    for l in g.links:
        if g.usable(l) and g.nodes[l.a[0]].kind == SWITCH == g.nodes[l.b[0]].kind:
            G.add_edge(l.a[0], l.b[0])
    return G


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10 ** 6), st.integers(0, 40))
def test_path_between_matches_networkx(rows, cols, seed, down_pct):
    g = mesh_topology(rows, cols, attacker=False)
    rng = random.Random(seed)
    for sw in g.switches:
        if rng.randrange(100) < down_pct:
            g = apply_event(g, StateEvent("NodeDown", sw))
    G = _nx_graph(g)
    a, b = rng.choice(g.switches), rng.choice(g.switches)
    got = path_between(g, a, b)
    if a not in G or b not in G or not nx.has_path(G, a, b):
        assert got is None
        return
    want = min(nx.all_shortest_paths(G, a, b))
    assert got == want


def test_mesh_ids_unique():
    ids = {mesh_switch_id(10, 40, r, c) for r in range(10) for c in range(40)}
    assert len(ids) == 400
