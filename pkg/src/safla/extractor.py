"""Bottom-up intent extraction from flow tables.

Pipeline::

    tables --cluster_entries--> EntryGroups per switch
           --link_groups-----> Chains (one per AddrKey, across switches)
           --aggregate-------> MetaIntentGraphs (ordered + checked against the NSKG)
           --extract---------> set G of EndpointTuples

Only forwarding entries (those with an Output action) take part; functional
entries are reported alongside.  Aggregation failures are data: an invalid
graph carries a ``reject_reason`` instead of raising.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Optional

from .flowmodel import EntryClass, cached_hash, FlowEntry, FlowTable, MatchFields, Prefix, classify_entry
from .nskg import HOST, Nskg, UnattachedHostError, attachment, neighbor_of

log = logging.getLogger(__name__)

BROKEN_LINK = "BrokenLink"
NO_INGRESS = "NoIngress"
NO_EGRESS = "NoEgress"
CYCLE = "Cycle"
UNKNOWN_HOST = "UnknownHost"


def _slot(value) -> str:
    return "*" if value is None else str(value)


@cached_hash
@dataclass(frozen=True)
class AddrKey:
    """Address information an entry is clustered by.  Prefixes are normalized."""

    src: Optional[Prefix]
    dst: Optional[Prefix]
    proto: Optional[str] = None
    dst_port: Optional[int] = None

    @classmethod
    def from_match(cls, m: MatchFields) -> "AddrKey":
        return _key_of(m)

    @cached_property
    def text(self) -> str:
        return f"{_slot(self.src)}>{_slot(self.dst)}/{_slot(self.proto)}:{_slot(self.dst_port)}"

    def selects(self, e: FlowEntry) -> bool:
        return AddrKey.from_match(e.match) == self

    def __str__(self):
        return self.text


@lru_cache(maxsize=1 << 16)
def _key_of(m: MatchFields) -> AddrKey:
    return AddrKey(m.src_ip.normalized() if m.src_ip is not None else None,
                   m.dst_ip.normalized() if m.dst_ip is not None else None,
                   m.proto, m.dst_port)


@cached_hash
@dataclass(frozen=True)
class EndpointTuple:
    src_host: str
    dst_host: str
    proto: Optional[str] = None
    dst_port: Optional[int] = None

    @cached_property
    def text(self) -> str:
        return f"{self.src_host}>{self.dst_host}/{_slot(self.proto)}:{_slot(self.dst_port)}"

    def to_obj(self) -> dict:
        return {"src_host": self.src_host, "dst_host": self.dst_host,
                "proto": self.proto or "ANY", "dst_port": self.dst_port}

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class EntryGroup:
    switch_id: str
    key: AddrKey
    entries: tuple
    egress_port: int


@dataclass(frozen=True)
class Chain:
    key: AddrKey
    groups: tuple  # sorted by switch id, at most one per switch

    def __post_init__(self):
        switches = [grp.switch_id for grp in self.groups]
        if len(set(switches)) != len(switches):
            raise ValueError(f"chain {self.key}: more than one group per switch")
        if any(grp.key != self.key for grp in self.groups):
            raise ValueError(f"chain {self.key}: mixed keys")

    @property
    def switches(self) -> tuple:
        return tuple(grp.switch_id for grp in self.groups)


@dataclass(frozen=True)
class MetaIntentGraph:
    key: AddrKey
    path: tuple
    src_host: Optional[str]
    dst_host: Optional[str]
    valid: bool
    reject_reason: Optional[str] = None
    switches: tuple = ()        # every switch holding a group for the key
    declared_dst: Optional[str] = None  # host the key's destination resolves to

    @cached_property
    def endpoint(self) -> Optional[EndpointTuple]:
        if not self.valid:
            return None
        return EndpointTuple(self.src_host, self.dst_host, self.key.proto, self.key.dst_port)

    @property
    def diverted(self) -> bool:
        return self.valid and self.dst_host != self.declared_dst

    def to_obj(self) -> dict:
        return {"key": self.key.text, "path": list(self.path), "src_host": self.src_host,
                "dst_host": self.dst_host, "valid": self.valid,
                "reject_reason": self.reject_reason, "switches": list(self.switches)}


@dataclass
class Clustering:
    groups: dict = field(default_factory=dict)      # switch -> [EntryGroup]
    functional: dict = field(default_factory=dict)  # switch -> [FlowEntry]


@dataclass
class Extraction:
    tuples: frozenset
    graphs: list          # sorted by key text
    functional: dict

    @property
    def valid(self) -> list:
        return [m for m in self.graphs if m.valid]

    @property
    def rejected(self) -> list:
        return [m for m in self.graphs if not m.valid]

    def sources(self, t: EndpointTuple) -> list:
        return [m for m in self.graphs if m.valid and m.endpoint == t]

    def to_obj(self) -> dict:
        return {
            "G": [t.to_obj() for t in sorted(self.tuples, key=lambda t: t.text)],
            "diagnostics": [m.to_obj() for m in self.rejected],
            "functional": {sid: [e.entry_index for e in es]
                           for sid, es in sorted(self.functional.items()) if es},
        }


def _egress(entries) -> int:
    top = min(entries, key=lambda e: (-e.priority, e.entry_index))
    return top.output_port


def cluster_table(t: FlowTable) -> tuple:
    """Group one switch's forwarding entries by AddrKey.

    Returns ``(groups, functional_entries)``; groups follow first appearance
    in the table.
    """
    by_key = {}
    functional = []
    for e in t.entries:
        if classify_entry(e) is EntryClass.FUNCTIONAL:
            functional.append(e)
            continue
        by_key.setdefault(AddrKey.from_match(e.match), []).append(e)
    groups = [EntryGroup(t.switch_id, k, tuple(es), _egress(es)) for k, es in by_key.items()]
    return groups, functional


def cluster_entries(tables: Iterable[FlowTable], executor=None) -> Clustering:
    """Cluster every table.  ``executor`` (e.g. a ThreadPoolExecutor) maps per switch."""
    tables = list(tables)
    mapper = executor.map if executor is not None else map
    out = Clustering()
    for t, (groups, functional) in zip(tables, mapper(cluster_table, tables)):
        out.groups[t.switch_id] = groups
        out.functional[t.switch_id] = functional
    return out


def link_groups(groups) -> list:
    """Partition groups from all switches into one Chain per AddrKey."""
    if isinstance(groups, Clustering):
        groups = groups.groups
    if isinstance(groups, dict):
        groups = [grp for lst in groups.values() for grp in lst]
    by_key = defaultdict(list)
    for grp in groups:
        by_key[grp.key].append(grp)
    return [Chain(k, tuple(sorted(gs, key=lambda grp: grp.switch_id)))
            for k, gs in sorted(by_key.items(), key=lambda kv: kv[0].text)]


def _resolve(g: Nskg, prefix: Optional[Prefix]) -> Optional[str]:
    if prefix is None or prefix.length != 32:
        return None
    return g.host_for_ip(prefix.address)


def aggregate(c: Chain, g: Nskg) -> MetaIntentGraph:
    """Order a chain into a switch path by following egress ports through the NSKG.

    The walk starts at the access switch of the host owning the key's source
    address and stops at the first host reached.  That host becomes the
    graph's destination, which is how a diverted (hijacked) chain shows up as
    a tuple nobody declared.
    """
    key = c.key
    switches = c.switches

    def reject(reason, path=(), src=None):
        return MetaIntentGraph(key, tuple(path), src, None, False, reason, switches, declared)

    src = _resolve(g, key.src)
    declared = _resolve(g, key.dst)
    if src is None or declared is None:
        return reject(UNKNOWN_HOST)
    try:
        start, _ = attachment(g, src)
    except UnattachedHostError:
        return reject(NO_INGRESS, src=src)
    by_switch = {grp.switch_id: grp for grp in c.groups}
    if start not in by_switch:
        return reject(NO_INGRESS, src=src)

    path = []
    seen = set()
    cur = start
    while True:
        if cur in seen:
            return reject(CYCLE, path, src)
        seen.add(cur)
        path.append(cur)
        grp = by_switch.get(cur)
        if grp is None:
            return reject(NO_EGRESS, path, src)
        nxt = neighbor_of(g, cur, grp.egress_port)
        if nxt is None:
            return reject(BROKEN_LINK, path, src)
        if g.nodes[nxt].kind == HOST:
            return MetaIntentGraph(key, tuple(path), src, nxt, True, None, switches, declared)
        cur = nxt


def _finish(graphs, functional) -> Extraction:
    graphs = sorted(graphs, key=lambda m: m.key.text)
    tuples = frozenset(m.endpoint for m in graphs if m.valid)
    return Extraction(tuples, graphs, functional)


def extract(tables: Iterable[FlowTable], g: Nskg, executor=None) -> Extraction:
    """Set G of endpoint tuples, plus every meta-intent graph for diagnostics."""
    clustering = cluster_entries(tables, executor)
    graphs = [aggregate(c, g) for c in link_groups(clustering)]
    return _finish(graphs, clustering.functional)


class IncrementalExtractor:
    """Extraction that re-clusters only switches whose table object changed.

    Tables are immutable, so a table that ``is`` the one seen last time needs
    no work.  Chains touching a changed switch are re-aggregated; a new NSKG
    snapshot re-aggregates every chain.  Results equal :func:`extract` on the
    same inputs.
    """

    def __init__(self):
        self._tables = {}
        self._groups = {}
        self._functional = {}
        self._by_key = defaultdict(dict)   # key -> {switch: EntryGroup}
        self._graphs = {}                  # key -> MetaIntentGraph
        self._nskg = None

    def update(self, tables: Iterable[FlowTable], g: Nskg) -> Extraction:
        current = {t.switch_id: t for t in tables}
        dirty = set()
        for sid in list(self._tables):
            if sid not in current:
                dirty.update(self._drop(sid))
        for sid, t in current.items():
            if self._tables.get(sid) is t:
                continue
            before = {grp.key: grp.egress_port for grp in self._groups.get(sid, ())}
            self._drop(sid)
            groups, functional = cluster_table(t)
            self._tables[sid] = t
            self._groups[sid] = groups
            self._functional[sid] = functional
            for grp in groups:
                self._by_key[grp.key][sid] = grp
                if before.pop(grp.key, None) != grp.egress_port:
                    dirty.add(grp.key)
            dirty.update(before)
        if g is not self._nskg:
            self._nskg = g
            dirty = set(self._by_key) | set(self._graphs)
        for key in dirty:
            members = self._by_key.get(key)
            if not members:
                self._by_key.pop(key, None)
                self._graphs.pop(key, None)
                continue
            chain = Chain(key, tuple(members[s] for s in sorted(members)))
            self._graphs[key] = aggregate(chain, g)
        log.debug("incremental extraction: %d dirty keys", len(dirty))
        return _finish(self._graphs.values(), dict(self._functional))

    def _drop(self, sid) -> set:
        touched = set()
        for grp in self._groups.pop(sid, ()):
            touched.add(grp.key)
            self._by_key[grp.key].pop(sid, None)
        self._tables.pop(sid, None)
        self._functional.pop(sid, None)
        return touched
