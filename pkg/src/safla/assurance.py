"""Consistency checking, intent compilation and remediation.

Mismatch classes:

* **extraneous**: a tuple extracted from the data plane that no declared
  intent accounts for (an injected or rerouted flow).  Remediation purges
  every entry carrying the offending AddrKey.
* **missing**: a declared intent whose tuple is no longer extracted (broken
  path, diverted traffic).  Remediation recompiles it on the current
  topology and reinstalls it, clearing stale entries for its key first.

A *network handle* is anything with ``nskg`` (current :class:`Nskg`),
``export_flow_tables()``, ``install(switch_id, entries)`` and
``remove(switch_id, key) -> int``.  :class:`safla.simnet.SimNetwork` is one.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Optional

from .extractor import AddrKey, EndpointTuple, Extraction, IncrementalExtractor, extract
from .flowmodel import FlowEntry, MatchFields, Prefix, entry_to_obj, output
from .intentstore import Intent, IntentRepository, to_tuple
from .nskg import HOST, Nskg, UnattachedHostError, attachment, path_between, port_towards

log = logging.getLogger(__name__)

NO_PATH = "NoPath"
UNKNOWN_HOST = "UnknownHost"


class UnknownHostError(KeyError):
    pass


class ApplyError(RuntimeError):
    """Raised by a network handle; ``completed`` lists the steps applied before it."""

    def __init__(self, message, completed=None):
        super().__init__(message)
        self.completed = list(completed or [])


@dataclass(frozen=True)
class ConsistencyReport:
    matched: tuple = ()      # ((EndpointTuple, intent id), ...)
    extraneous: tuple = ()   # (EndpointTuple, ...)
    missing: tuple = ()      # (intent id, ...)

    @property
    def consistent(self) -> bool:
        return not self.extraneous and not self.missing

    def to_obj(self) -> dict:
        return {
            "consistent": self.consistent,
            "matched": [{"tuple": t.to_obj(), "intent": iid} for t, iid in self.matched],
            "extraneous": [t.to_obj() for t in self.extraneous],
            "missing": list(self.missing),
        }


def consistency_check(G: Iterable[EndpointTuple], I: IntentRepository) -> ConsistencyReport:
    """Match extracted tuples to declared intents by exact tuple equality.

    ANY slots only match ANY slots.  When several intents share a tuple
    (flagged at load time) the smallest id is matched and the rest are
    reported missing.
    """
    by_tuple = I.by_tuple
    matched, extraneous = [], []
    for t in sorted(set(G), key=lambda t: t.text):
        iid = by_tuple.get(t)
        if iid is None:
            extraneous.append(t)
        else:
            matched.append((t, iid))
    hit = {iid for _, iid in matched}
    missing = sorted((i for i in I.intents.values() if i.id not in hit),
                     key=lambda i: (to_tuple(i).text, i.id))
    return ConsistencyReport(tuple(matched), tuple(extraneous), tuple(i.id for i in missing))


@dataclass(frozen=True)
class Deployment:
    intent_id: str
    key: AddrKey
    path: tuple
    entries: MappingProxyType  # switch -> (FlowEntry, ...)

    def to_obj(self) -> dict:
        return {"intent": self.intent_id, "key": self.key.text, "path": list(self.path),
                "entries": {sw: [entry_to_obj(e) for e in es] for sw, es in self.entries.items()}}


def intent_match(i: Intent, g: Nskg) -> MatchFields:
    return MatchFields(src_ip=Prefix(g.host_ip(i.src_host), 32),
                       dst_ip=Prefix(g.host_ip(i.dst_host), 32),
                       proto=i.proto, dst_port=i.dst_port)


def compile_intent(i: Intent, g: Nskg) -> Optional[Deployment]:
    """Shortest-path deployment of ``i`` on the current graph, or None if unreachable."""
    for h in (i.src_host, i.dst_host):
        if h not in g.nodes or g.nodes[h].kind != HOST:
            raise UnknownHostError(h)
    try:
        src_sw, _ = attachment(g, i.src_host)
        dst_sw, dst_port = attachment(g, i.dst_host)
    except UnattachedHostError:
        return None
    path = path_between(g, src_sw, dst_sw)
    if path is None:
        return None
    match = intent_match(i, g)
    entries = {}
    for here, there in zip(path, path[1:] + [None]):
        port = dst_port if there is None else port_towards(g, here, there)
        entries[here] = (FlowEntry(match, i.priority_class, (output(port),)),)
    return Deployment(i.id, AddrKey.from_match(match), tuple(path), MappingProxyType(entries))


@dataclass(frozen=True)
class Purge:
    switch_id: str
    key: AddrKey
    reason: EndpointTuple

    def to_obj(self) -> dict:
        return {"switch": self.switch_id, "key": self.key.text, "tuple": self.reason.to_obj()}


@dataclass(frozen=True)
class Reinstall:
    deployment: Deployment
    clear: tuple = ()  # switches holding stale entries for the key

    @property
    def intent_id(self) -> str:
        return self.deployment.intent_id

    @property
    def path(self) -> tuple:
        return self.deployment.path

    def to_obj(self) -> dict:
        out = self.deployment.to_obj()
        out["clear"] = list(self.clear)
        return out


@dataclass(frozen=True)
class RemediationPlan:
    purges: tuple = ()
    reinstalls: tuple = ()
    infeasible: tuple = ()  # ((intent id, reason), ...)

    @property
    def empty(self) -> bool:
        """True when the plan has nothing to apply (infeasible intents are report-only)."""
        return not self.purges and not self.reinstalls

    def to_obj(self) -> dict:
        return {"purges": [p.to_obj() for p in self.purges],
                "reinstalls": [r.to_obj() for r in self.reinstalls],
                "infeasible": [{"intent": iid, "reason": why} for iid, why in self.infeasible]}


def plan_remediation(rep: ConsistencyReport, I: IntentRepository, g: Nskg,
                     extraction: Extraction) -> RemediationPlan:
    """Purge every extraneous tuple's entries; recompile every missing intent.

    ``extraction`` is the result ``rep`` was computed from; it supplies the
    AddrKeys and switches behind each extraneous tuple.
    """
    purges = []
    seen = set()
    for t in rep.extraneous:
        for m in extraction.sources(t):
            for sw in m.switches:
                if (sw, m.key) not in seen:
                    seen.add((sw, m.key))
                    purges.append(Purge(sw, m.key, t))
    holders = {m.key: m.switches for m in extraction.graphs}
    reinstalls, infeasible = [], []
    for iid in rep.missing:
        try:
            dep = compile_intent(I[iid], g)
        except UnknownHostError:
            infeasible.append((iid, UNKNOWN_HOST))
            continue
        if dep is None:
            infeasible.append((iid, NO_PATH))
            continue
        reinstalls.append(Reinstall(dep, tuple(holders.get(dep.key, ()))))
    return RemediationPlan(tuple(purges), tuple(reinstalls), tuple(infeasible))


def apply_plan(net, plan: RemediationPlan) -> list:
    """Apply purges, then reinstalls.  Returns the list of steps performed."""
    done = []
    try:
        for p in plan.purges:
            net.remove(p.switch_id, p.key)
            done.append(("purge", p.switch_id, p.key.text))
        for r in plan.reinstalls:
            dep = r.deployment
            for sw in r.clear:
                net.remove(sw, dep.key)
                done.append(("clear", sw, dep.key.text))
            for sw in dep.path:
                net.install(sw, dep.entries[sw])
                done.append(("install", sw, dep.key.text))
    except ApplyError as exc:
        exc.completed = done + exc.completed
        raise
    return done


@dataclass(frozen=True)
class CycleReport:
    report: ConsistencyReport
    plan: RemediationPlan
    applied: bool
    post_check: ConsistencyReport
    elapsed: float = 0.0
    steps: tuple = ()

    def to_obj(self, timing: bool = False) -> dict:
        out = {"report": self.report.to_obj(), "plan": self.plan.to_obj(),
               "applied": self.applied, "post_check": self.post_check.to_obj(),
               "steps": [list(s) for s in self.steps]}
        if timing:
            out["elapsed"] = self.elapsed
        return out


def assurance_cycle(net, I: IntentRepository, g: Optional[Nskg] = None,
                    extractor: Optional[IncrementalExtractor] = None) -> CycleReport:
    """extract -> check -> plan -> apply -> re-extract -> re-check."""
    t0 = time.perf_counter()
    g = net.nskg if g is None else g
    run = extractor.update if extractor is not None else extract
    ext = run(net.export_flow_tables(), g)
    rep = consistency_check(ext.tuples, I)
    plan = plan_remediation(rep, I, g, ext)
    if plan.empty:
        post, steps = rep, []
    else:
        steps = apply_plan(net, plan)
        post = consistency_check(run(net.export_flow_tables(), g).tuples, I)
        log.info("cycle: %d purges, %d reinstalls, %d infeasible",
                 len(plan.purges), len(plan.reinstalls), len(plan.infeasible))
    return CycleReport(rep, plan, not plan.empty, post, time.perf_counter() - t0, tuple(steps))


class AssuranceLoop:
    """Continuous assurance against one network handle.

    Keeps an :class:`IncrementalExtractor` between cycles so that a steady
    network costs only a table-identity scan per cycle.
    """

    def __init__(self, net, intents: IntentRepository):
        self.net = net
        self.intents = intents
        self.extractor = IncrementalExtractor()
        self.history = []

    def cycle(self) -> CycleReport:
        rep = assurance_cycle(self.net, self.intents, self.net.nskg, self.extractor)
        self.history.append(rep)
        return rep

    def run(self, cycles: int, period: float = 0.0, sleep=time.sleep, on_cycle=None):
        for n in range(cycles):
            if n and period:
                sleep(period)
            rep = self.cycle()
            if on_cycle is not None:
                on_cycle(n, rep)
        return self.history
