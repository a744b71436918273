import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from safla.assurance import (NO_PATH, ApplyError, AssuranceLoop, Purge, RemediationPlan,
                             apply_plan, assurance_cycle, compile_intent, consistency_check,
                             plan_remediation)
from safla.extractor import AddrKey, EndpointTuple, extract
from safla.intentstore import Intent, to_tuple
from safla.nskg import StateEvent, access_switch, apply_event
from safla.simnet import (ScenarioSpec, SimNetwork, SpecError, build_scenario, fail_nodes,
                          feasible_fraction, inject_hijack, intent_delivered, mesh_topology,
                          survival_rate)


def star(k=0, seed=0):
    net, I = build_scenario(ScenarioSpec({"kind": "Star", "hosts": 11}, 9, seed=seed))
    if k:
        inject_hijack(net, I, k * 100 / 9, seed)
    return net, I


def test_identity_consistent():
    _, I = star()
    rep = consistency_check({to_tuple(i) for i in I.sorted()}, I)
    assert rep.consistent and len(rep.matched) == 9


def test_hijack_extraneous_and_missing():
    net, I = star()
    (_, _, vid), = inject_hijack(net, I, 100 / 9, 4)
    rep = consistency_check(extract(net.export_flow_tables(), net.nskg).tuples, I)
    v = I[vid]
    assert rep.extraneous == (EndpointTuple(v.src_host, "h11", v.proto, v.dst_port),)
    assert rep.missing == (vid,)


def test_empty_G_all_missing():
    net, I = build_scenario(ScenarioSpec({"kind": "Mesh", "rows": 3, "cols": 3}, 10, seed=1))
    rep = consistency_check(frozenset(), I)
    assert sorted(rep.missing) == sorted(I.intents) and len(rep.missing) == 10


def test_compile_adjacent():
    g = mesh_topology(1, 2, attacker=False)
    dep = compile_intent(Intent("a", "h01", "h02", "TCP", 22), g)
    assert dep.path == ("s001", "s002")
    (e1,), (e2,) = dep.entries["s001"], dep.entries["s002"]
    assert e1.output_port == 4 and e2.output_port == 6  # east link, then host port


def test_compile_disconnected():
    g = mesh_topology(1, 3, attacker=False)
    g = apply_event(g, StateEvent("NodeDown", "s002"))
    assert compile_intent(Intent("a", "h01", "h02"), g) is None


def test_compile_then_extract():
    g = mesh_topology(4, 4)
    i = Intent("a", "h01", "h08", "UDP", 53)
    net = SimNetwork(g)
    dep = compile_intent(i, g)
    for sw in dep.path:
        net.install(sw, dep.entries[sw])
    assert extract(net.export_flow_tables(), g).tuples == {to_tuple(i)}


def test_purge_restores_delivery():
    net, I = build_scenario(ScenarioSpec({"kind": "Mesh", "rows": 5, "cols": 5}, 6, seed=2))
    hit = inject_hijack(net, I, 0, 0, victims=["i001"])
    assert not intent_delivered(net, I["i001"])
    ext = extract(net.export_flow_tables(), net.nskg)
    rep = consistency_check(ext.tuples, I)
    plan = plan_remediation(rep, I, net.nskg, ext)
    assert {p.switch_id for p in plan.purges} >= {sw for sw, _, _ in hit}
    apply_plan(net, plan)
    assert intent_delivered(net, I["i001"])
    for sw, entry, _ in hit:
        assert entry not in net.table(sw).entries


def test_reinstall_avoids_down_nodes():
    net, I = build_scenario(ScenarioSpec({"kind": "Mesh", "rows": 5, "cols": 5}, 6, seed=2))
    dep = net.deployments["i001"]
    interior = [sw for sw in dep.path[1:-1]]
    assert interior
    net.apply_event(StateEvent("NodeDown", interior[0]))
    rep = assurance_cycle(net, I)
    (r,) = [r for r in rep.plan.reinstalls if r.intent_id == "i001"]
    assert interior[0] not in r.path
    G = nx.Graph()
    g = net.nskg
    for l in g.links:
        if g.usable(l) and l.a[0].startswith("s") and l.b[0].startswith("s"):
            G.add_edge(l.a[0], l.b[0])
    assert len(r.path) == nx.shortest_path_length(G, r.path[0], r.path[-1]) + 1
    assert intent_delivered(net, I["i001"])


def test_isolated_is_infeasible():
    net, I = build_scenario(ScenarioSpec({"kind": "Mesh", "rows": 3, "cols": 3}, 4, seed=0))
    i = I["i001"]
    src_sw = access_switch(net.nskg, i.src_host)
    for _, peer, _ in net.nskg.adjacency[src_sw]:
        if net.nskg.nodes[peer].kind == "Switch":
            net.apply_event(StateEvent("NodeDown", peer))
    rep = assurance_cycle(net, I)
    assert ("i001", NO_PATH) in rep.plan.infeasible


def test_consistent_fixpoint():
    net, I = star()
    before = net.mutations
    rep = assurance_cycle(net, I)
    assert rep.plan.empty and not rep.applied and rep.elapsed > 0
    assert net.mutations == before
    assert "elapsed" not in rep.to_obj() and "elapsed" in rep.to_obj(timing=True)


@pytest.mark.parametrize("k", range(1, 10))
def test_star_all_intensities(k):
    net, I = star(k, seed=k)
    assert survival_rate(net, I) == pytest.approx((9 - k) / 9)
    assert assurance_cycle(net, I).post_check.consistent
    assert survival_rate(net, I) == 1.0


def test_mesh_40_percent():
    net, I = build_scenario(ScenarioSpec({"kind": "Mesh", "rows": 10, "cols": 10}, 10, seed=5))
    fail_nodes(net, I, 40, 5)
    feasible = feasible_fraction(net, I)
    rep = assurance_cycle(net, I)
    assert set(rep.post_check.missing) <= {iid for iid, _ in rep.plan.infeasible}
    assert survival_rate(net, I) == feasible


def test_apply_error_reports_completed():
    net, I = star()
    k = AddrKey.from_match(net.table("s001").entries[0].match)
    plan = RemediationPlan((Purge("s001", k, EndpointTuple("a", "b")),
                            Purge("s999", k, EndpointTuple("a", "b"))))
    with pytest.raises(ApplyError) as info:
        apply_plan(net, plan)
    assert info.value.completed == [("purge", "s001", k.text)]


def test_loop_run_no_faults_no_mutations():
    net, I = star()
    before = net.mutations
    sleeps = []
    hist = AssuranceLoop(net, I).run(3, period=0.5, sleep=sleeps.append)
    assert len(hist) == 3 and sleeps == [0.5, 0.5]
    assert net.mutations == before


# -- properties -----------------------------------------------------------------------

def _faulted(seed):
    rng = random.Random(seed)
    rows, cols = rng.randrange(2, 6), rng.randrange(2, 6)
    net, I = build_scenario(ScenarioSpec({"kind": "Mesh", "rows": rows, "cols": cols},
                                         rng.randrange(1, 10), seed=seed))
    if rng.random() < 0.6:
        inject_hijack(net, I, rng.choice((10, 30, 60, 100)), seed)
    if rng.random() < 0.5:
        try:
            fail_nodes(net, I, rng.choice((70, 80, 90)), seed)
        except SpecError:  # every switch is an access switch
            pass
    if rng.random() < 0.3:
        sw = rng.choice(net.nskg.switches)
        if net.nskg.nodes[sw].up and net.table(sw).entries:
            net.remove(sw, AddrKey.from_match(net.table(sw).entries[0].match))
    return net, I


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_purge_safety(seed):
    net, I = _faulted(seed)
    ext = extract(net.export_flow_tables(), net.nskg)
    rep = consistency_check(ext.tuples, I)
    plan = plan_remediation(rep, I, net.nskg, ext)
    matched_keys = {m.key for t, _ in rep.matched for m in ext.sources(t)}
    assert not {p.key for p in plan.purges} & matched_keys


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_idempotence(seed):
    net, I = _faulted(seed)
    first = assurance_cycle(net, I)
    second = assurance_cycle(net, I)
    if first.post_check.consistent:
        assert second.plan.empty
    assert second.post_check == first.post_check


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_monotone_non_harm(seed):
    net, I = _faulted(seed)
    before = {i.id for i in I.sorted() if intent_delivered(net, i)}
    assurance_cycle(net, I)
    after = {i.id for i in I.sorted() if intent_delivered(net, i)}
    assert before <= after
