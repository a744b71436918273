"""Network state knowledge graph.

Switches, hosts and the links between their ports, plus free-form node
attributes.  A :class:`Nskg` is an immutable snapshot; :func:`apply_event`
returns the next snapshot with ``revision + 1``.

A link is usable for forwarding only while the link and both end nodes are
Up.  Hosts never forward, so paths only pass through switches.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

from .flowmodel import SchemaError, ip_to_int

SWITCH = "Switch"
HOST = "Host"
UP = "Up"
DOWN = "Down"

EVENT_KINDS = ("NodeUp", "NodeDown", "LinkUp", "LinkDown", "AttrSet")


class DanglingLinkError(ValueError):
    pass


class UnknownTargetError(KeyError):
    pass


class NotAHostError(ValueError):
    pass


class UnattachedHostError(ValueError):
    pass


@dataclass(frozen=True)
class NodeRecord:
    id: str
    kind: str
    attrs: Mapping[str, str] = field(default_factory=dict)
    status: str = UP

    def __post_init__(self):
        if self.kind not in (SWITCH, HOST):
            raise ValueError(f"node {self.id}: unknown kind {self.kind!r}")
        if self.status not in (UP, DOWN):
            raise ValueError(f"node {self.id}: unknown status {self.status!r}")
        object.__setattr__(self, "attrs", MappingProxyType(dict(self.attrs)))
        if self.kind == HOST and "ip" not in self.attrs:
            raise ValueError(f"host {self.id} has no 'ip' attribute")

    @property
    def up(self) -> bool:
        return self.status == UP


@dataclass(frozen=True)
class LinkRecord:
    a: tuple  # (node id, port)
    b: tuple
    status: str = UP

    def __post_init__(self):
        object.__setattr__(self, "a", (self.a[0], int(self.a[1])))
        object.__setattr__(self, "b", (self.b[0], int(self.b[1])))
        if self.a[0] == self.b[0]:
            raise ValueError(f"self-link on {self.a[0]}")
        if self.status not in (UP, DOWN):
            raise ValueError(f"unknown link status {self.status!r}")

    @property
    def key(self) -> frozenset:
        return frozenset((self.a, self.b))

    def peer(self, end: tuple) -> tuple:
        return self.b if end == self.a else self.a


@dataclass(frozen=True)
class StateEvent:
    kind: str
    target: object  # node id, or ((node, port), (node, port)) for links
    payload: Optional[tuple] = None  # (key, value) for AttrSet

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind.startswith("Link"):
            a, b = self.target
            object.__setattr__(self, "target", ((a[0], int(a[1])), (b[0], int(b[1]))))
        if self.kind == "AttrSet" and (self.payload is None or len(self.payload) != 2):
            raise ValueError("AttrSet needs a (key, value) payload")


class Nskg:
    """Immutable snapshot of topology and node state."""

    def __init__(self, nodes: Mapping[str, NodeRecord], links: Iterable[LinkRecord],
                 revision: int = 0):
        self.nodes = MappingProxyType(dict(nodes))
        self.links = tuple(links)
        self.revision = revision
        _validate(self)

    def __repr__(self):
        return (f"Nskg({len(self.switches)} switches, {len(self.hosts)} hosts, "
                f"{len(self.links)} links, rev {self.revision})")

    def __eq__(self, other):
        if not isinstance(other, Nskg):
            return NotImplemented
        return (self.revision == other.revision and dict(self.nodes) == dict(other.nodes)
                and set(self.links) == set(other.links))

    __hash__ = None

    @cached_property
    def switches(self) -> tuple:
        return tuple(sorted(n for n, r in self.nodes.items() if r.kind == SWITCH))

    @cached_property
    def hosts(self) -> tuple:
        return tuple(sorted(n for n, r in self.nodes.items() if r.kind == HOST))

    @cached_property
    def port_index(self) -> dict:
        """(node, port) -> link record."""
        index = {}
        for link in self.links:
            index[link.a] = link
            index[link.b] = link
        return index

    @cached_property
    def link_index(self) -> dict:
        return {link.key: link for link in self.links}

    @cached_property
    def adjacency(self) -> dict:
        """node -> sorted [(port, peer node, peer port)] over usable links."""
        adj = {n: [] for n in self.nodes}
        for link in self.links:
            if not self.usable(link):
                continue
            (na, pa), (nb, pb) = link.a, link.b
            adj[na].append((pa, nb, pb))
            adj[nb].append((pb, na, pa))
        for lst in adj.values():
            lst.sort()
        return adj

    @cached_property
    def host_links(self) -> dict:
        """host -> [(switch, switch port)] over usable links."""
        out = {h: [] for h in self.hosts}
        for link in self.links:
            for end in (link.a, link.b):
                peer = link.peer(end)
                if (self.nodes[end[0]].kind == HOST and self.nodes[peer[0]].kind == SWITCH
                        and self.usable(link)):
                    out[end[0]].append(peer)
        return out

    @cached_property
    def hosts_by_ip(self) -> dict:
        out = {}
        for h in self.hosts:
            out.setdefault(ip_to_int(self.nodes[h].attrs["ip"]), h)
        return out

    def usable(self, link: LinkRecord) -> bool:
        return (link.status == UP and self.nodes[link.a[0]].up
                and self.nodes[link.b[0]].up)

    def node(self, node_id: str) -> NodeRecord:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownTargetError(node_id) from None

    def host_ip(self, host: str) -> int:
        return ip_to_int(self.node(host).attrs["ip"])

    def host_for_ip(self, address: int) -> Optional[str]:
        return self.hosts_by_ip.get(address)


def _validate(g: Nskg):
    used_ports = set()
    for link in g.links:
        for end in (link.a, link.b):
            if end[0] not in g.nodes:
                raise DanglingLinkError(f"link {link.a}-{link.b} references unknown node {end[0]!r}")
            if end in used_ports:
                raise ValueError(f"port {end} is used by more than one link")
            used_ports.add(end)


# -- documents ----------------------------------------------------------------

def _end(obj, path):
    if not isinstance(obj, dict) or set(obj) != {"node", "port"}:
        raise SchemaError(path, "expected {node, port}")
    if not isinstance(obj["node"], str):
        raise SchemaError(f"{path}.node", "expected string")
    if not isinstance(obj["port"], int) or isinstance(obj["port"], bool):
        raise SchemaError(f"{path}.port", "expected integer")
    return (obj["node"], obj["port"])


def nskg_from_obj(doc) -> Nskg:
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected object")
    unknown = set(doc) - {"nodes", "links"}
    if unknown:
        raise SchemaError("$", f"unknown field(s) {sorted(unknown)}")
    if not isinstance(doc.get("nodes"), list):
        raise SchemaError("$.nodes", "expected array")
    if not isinstance(doc.get("links", []), list):
        raise SchemaError("$.links", "expected array")
    nodes = {}
    for i, n in enumerate(doc["nodes"]):
        path = f"$.nodes[{i}]"
        if not isinstance(n, dict):
            raise SchemaError(path, "expected object")
        unknown = set(n) - {"id", "kind", "attrs", "status"}
        if unknown:
            raise SchemaError(path, f"unknown field(s) {sorted(unknown)}")
        if not isinstance(n.get("id"), str):
            raise SchemaError(f"{path}.id", "expected string")
        if n.get("kind") not in (SWITCH, HOST):
            raise SchemaError(f"{path}.kind", "expected 'Switch' or 'Host'")
        attrs = n.get("attrs", {})
        if not isinstance(attrs, dict) or not all(isinstance(v, str) for v in attrs.values()):
            raise SchemaError(f"{path}.attrs", "expected string map")
        status = n.get("status", UP)
        if status not in (UP, DOWN):
            raise SchemaError(f"{path}.status", "expected 'Up' or 'Down'")
        if n["id"] in nodes:
            raise SchemaError(f"{path}.id", f"duplicate node id {n['id']!r}")
        try:
            nodes[n["id"]] = NodeRecord(n["id"], n["kind"], attrs, status)
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None
    links = []
    for i, l in enumerate(doc.get("links", [])):
        path = f"$.links[{i}]"
        if not isinstance(l, dict):
            raise SchemaError(path, "expected object")
        unknown = set(l) - {"a", "b", "status"}
        if unknown:
            raise SchemaError(path, f"unknown field(s) {sorted(unknown)}")
        status = l.get("status", UP)
        if status not in (UP, DOWN):
            raise SchemaError(f"{path}.status", "expected 'Up' or 'Down'")
        a, b = _end(l.get("a"), f"{path}.a"), _end(l.get("b"), f"{path}.b")
        try:
            links.append(LinkRecord(a, b, status))
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None
    return Nskg(nodes, links)


def build_nskg(topology_doc) -> Nskg:
    """Construct revision 0 of the graph from a topology JSON document."""
    if isinstance(topology_doc, (bytes, bytearray)):
        topology_doc = topology_doc.decode("utf-8")
    if isinstance(topology_doc, str):
        try:
            topology_doc = json.loads(topology_doc)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from None
    return nskg_from_obj(topology_doc)


def nskg_to_obj(g: Nskg) -> dict:
    nodes = [{"id": r.id, "kind": r.kind, "attrs": dict(sorted(r.attrs.items())),
              "status": r.status}
             for r in sorted(g.nodes.values(), key=lambda r: r.id)]
    links = [{"a": {"node": l.a[0], "port": l.a[1]}, "b": {"node": l.b[0], "port": l.b[1]},
              "status": l.status} for l in g.links]
    return {"nodes": nodes, "links": links}


def dump_nskg(g: Nskg) -> bytes:
    return (json.dumps(nskg_to_obj(g), separators=(",", ":")) + "\n").encode()


def event_to_obj(e: StateEvent) -> dict:
    if e.kind.startswith("Link"):
        (na, pa), (nb, pb) = e.target
        target = {"a": {"node": na, "port": pa}, "b": {"node": nb, "port": pb}}
    else:
        target = e.target
    out = {"kind": e.kind, "target": target}
    if e.payload is not None:
        out["payload"] = {"key": e.payload[0], "value": e.payload[1]}
    return out


def event_from_obj(obj, path="$") -> StateEvent:
    if not isinstance(obj, dict) or "kind" not in obj or "target" not in obj:
        raise SchemaError(path, "expected {kind, target, payload?}")
    kind = obj["kind"]
    if kind not in EVENT_KINDS:
        raise SchemaError(f"{path}.kind", f"unknown event kind {kind!r}")
    if kind.startswith("Link"):
        t = obj["target"]
        if not isinstance(t, dict):
            raise SchemaError(f"{path}.target", "expected {a, b}")
        target = (_end(t.get("a"), f"{path}.target.a"), _end(t.get("b"), f"{path}.target.b"))
    else:
        if not isinstance(obj["target"], str):
            raise SchemaError(f"{path}.target", "expected node id")
        target = obj["target"]
    payload = None
    if obj.get("payload") is not None:
        p = obj["payload"]
        if not isinstance(p, dict) or not isinstance(p.get("key"), str) \
                or not isinstance(p.get("value"), str):
            raise SchemaError(f"{path}.payload", "expected {key, value} strings")
        payload = (p["key"], p["value"])
    try:
        return StateEvent(kind, target, payload)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def parse_events(document) -> list:
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    doc = json.loads(document)
    if not isinstance(doc, list):
        raise SchemaError("$", "expected array of events")
    return [event_from_obj(e, f"$[{i}]") for i, e in enumerate(doc)]


# -- operations ---------------------------------------------------------------

def apply_event(g: Nskg, e: StateEvent) -> Nskg:
    """Return the snapshot after ``e``.

    NodeDown also marks every incident link Down.  NodeUp brings only the
    node back; its links stay as they are until explicit LinkUp events.
    """
    nodes = dict(g.nodes)
    links = list(g.links)
    if e.kind in ("NodeUp", "NodeDown", "AttrSet"):
        rec = g.node(e.target)
        if e.kind == "AttrSet":
            key, value = e.payload
            attrs = dict(rec.attrs)
            attrs[key] = value
            nodes[rec.id] = replace(rec, attrs=attrs)
        else:
            nodes[rec.id] = replace(rec, status=UP if e.kind == "NodeUp" else DOWN)
            if e.kind == "NodeDown":
                links = [replace(l, status=DOWN) if rec.id in (l.a[0], l.b[0]) else l
                         for l in links]
    else:
        key = frozenset(e.target)
        link = g.link_index.get(key)
        if link is None:
            raise UnknownTargetError(e.target)
        status = UP if e.kind == "LinkUp" else DOWN
        links = [replace(l, status=status) if l.key == key else l for l in links]
    return Nskg(nodes, links, g.revision + 1)


def neighbor_of(g: Nskg, sw: str, port: int) -> Optional[str]:
    """Node on the far side of (sw, port), or None when the link is unusable."""
    g.node(sw)
    link = g.port_index.get((sw, port))
    if link is None or not g.usable(link):
        return None
    return link.peer((sw, port))[0]


def path_between(g: Nskg, a: str, b: str) -> Optional[list]:
    """Shortest hop-count path from ``a`` to ``b`` over Up nodes and links.

    Among equally short paths the lexicographically smallest node sequence
    is returned.  Intermediate nodes are always switches.
    """
    ra, rb = g.node(a), g.node(b)
    if not (ra.up and rb.up):
        return None
    if a == b:
        return [a]
    adj = g.adjacency
    nodes = g.nodes
    # distances to b, expanding only through switches
    dist = {b: 0}
    frontier = deque([b])
    while frontier:
        n = frontier.popleft()
        if n != b and nodes[n].kind != SWITCH:
            continue
        d = dist[n] + 1
        for _, peer, _ in adj[n]:
            if peer not in dist:
                dist[peer] = d
                frontier.append(peer)
    if a not in dist:
        return None
    path = [a]
    cur = a
    while cur != b:
        want = dist[cur] - 1
        cur = min(peer for _, peer, _ in adj[cur]
                  if dist.get(peer) == want and (peer == b or nodes[peer].kind == SWITCH))
        path.append(cur)
    return path


def attachment(g: Nskg, host: str) -> tuple:
    """(switch, switch port) where ``host`` attaches; see :func:`access_switch`."""
    rec = g.node(host)
    if rec.kind != HOST:
        raise NotAHostError(host)
    found = g.host_links[host]
    if len(found) != 1:
        raise UnattachedHostError(f"host {host} has {len(found)} usable attachments")
    return found[0]


def access_switch(g: Nskg, host: str) -> str:
    return attachment(g, host)[0]


def port_towards(g: Nskg, sw: str, peer: str) -> Optional[int]:
    """Lowest port on ``sw`` with a usable link to ``peer``."""
    for port, node, _ in g.adjacency[sw]:
        if node == peer:
            return port
    return None
