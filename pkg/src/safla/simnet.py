"""Deterministic SDN data-plane simulator.

Holds a topology snapshot and one flow table per switch, forwards probe
packets hop by hop, and injects the two fault classes the assurance loop is
evaluated against: hijack entries and switch failures.  All randomness is
drawn from ``random.Random`` instances seeded explicitly; simulated time
only moves through :meth:`SimNetwork.step`.

Every mutation is appended to ``SimNetwork.log`` so two runs with the same
seed can be compared byte for byte (:meth:`SimNetwork.event_log`).
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

from .assurance import ApplyError, AssuranceLoop, compile_intent, intent_match
from .extractor import AddrKey
from .flowmodel import (FlowEntry, FlowTable, Packet, entry_to_obj, flow_tables_from_obj,
                        flow_tables_to_obj, match_packet, output, DROP, OUTPUT, SET_DST_MAC,
                        SET_VLAN)
from .intentstore import Intent, IntentRepository, intent_from_obj
from .nskg import (HOST, SWITCH, LinkRecord, NodeRecord, Nskg, StateEvent,
                   UnattachedHostError, apply_event, attachment, event_to_obj, nskg_from_obj,
                   nskg_to_obj, path_between, port_towards)

log = logging.getLogger(__name__)

DELIVERED = "Delivered"
DROPPED = "Dropped"
NO_MATCH = "NoMatch"
LOOP = "Loop"
DEAD_END = "DeadEnd"

# probe defaults for ANY slots
PROBE_PROTO = "TCP"
PROBE_DST_PORT = 80
PROBE_SRC_PORT = 40000

HIJACK_BOOST = 1000
ATTACKER_ROLE = "attacker"

# mesh switch ports
NORTH, SOUTH, WEST, EAST = 1, 2, 3, 4
WEST_HOST_PORT, EAST_HOST_PORT, ATTACKER_PORT = 5, 6, 7
HOST_NIC = 0


class SpecError(ValueError):
    pass


# -- topology generators --------------------------------------------------------

def _width(n: int) -> int:
    return max(3, len(str(n)))


def mesh_switch_id(rows: int, cols: int, r: int, c: int) -> str:
    return f"s{r * cols + c + 1:0{_width(rows * cols)}d}"


def mesh_link_count(rows: int, cols: int) -> int:
    """Switch-to-switch links of a rows x cols 4-neighbour grid."""
    return rows * (cols - 1) + cols * (rows - 1)


def _host(hid: str, index: int, **extra) -> NodeRecord:
    attrs = {"ip": f"10.0.{index // 250}.{index % 250 + 1}",
             "mac": f"02:00:00:00:{index // 256:02x}:{index % 256:02x}"}
    attrs.update(extra)
    return NodeRecord(hid, HOST, attrs)


def mesh_topology(rows: int, cols: int, attacker: bool = True) -> Nskg:
    """Grid of switches with one host at each end of every row.

    Hosts ``h01..`` alternate west/east per row.  With ``attacker`` an extra
    host ``hx`` (role=attacker) hangs off the centre switch.
    """
    if rows < 1 or cols < 1:
        raise SpecError("mesh needs at least one row and one column")
    sid = lambda r, c: mesh_switch_id(rows, cols, r, c)
    nodes = {}
    links = []
    for r in range(rows):
        for c in range(cols):
            nodes[sid(r, c)] = NodeRecord(sid(r, c), SWITCH, {"row": str(r), "col": str(c)})
            if c + 1 < cols:
                links.append(LinkRecord((sid(r, c), EAST), (sid(r, c + 1), WEST)))
            if r + 1 < rows:
                links.append(LinkRecord((sid(r, c), SOUTH), (sid(r + 1, c), NORTH)))
    w = max(2, len(str(2 * rows)))
    index = 0
    for r in range(rows):
        for c, port in ((0, WEST_HOST_PORT), (cols - 1, EAST_HOST_PORT)):
            index += 1
            hid = f"h{index:0{w}d}"
            nodes[hid] = _host(hid, index)
            links.append(LinkRecord((hid, HOST_NIC), (sid(r, c), port)))
    if attacker:
        index += 1
        nodes["hx"] = _host("hx", index, role=ATTACKER_ROLE)
        links.append(LinkRecord(("hx", HOST_NIC), (sid(rows // 2, cols // 2), ATTACKER_PORT)))
    return Nskg(nodes, links)


def star_topology(hosts: int) -> Nskg:
    """One switch, ``hosts`` hosts on ports 1..N.  The last host is the attacker."""
    if hosts < 2:
        raise SpecError("star needs at least two hosts")
    w = max(2, len(str(hosts)))
    nodes = {"s001": NodeRecord("s001", SWITCH)}
    links = []
    for i in range(1, hosts + 1):
        hid = f"h{i:0{w}d}"
        extra = {"role": ATTACKER_ROLE} if i == hosts and hosts >= 3 else {}
        nodes[hid] = _host(hid, i, **extra)
        links.append(LinkRecord((hid, HOST_NIC), ("s001", i)))
    return Nskg(nodes, links)


def attacker_host(g: Nskg) -> Optional[str]:
    for h in g.hosts:
        if g.nodes[h].attrs.get("role") == ATTACKER_ROLE:
            return h
    return None


# -- the network ------------------------------------------------------------------

@dataclass(frozen=True)
class ForwardingTrace:
    hops: tuple          # ((switch, entry_index or None), ...)
    outcome: str
    where: Optional[str] = None   # host for Delivered, switch otherwise
    packet: Optional[Packet] = None

    def delivered_to(self, host: str) -> bool:
        return self.outcome == DELIVERED and self.where == host


class SimNetwork:
    """Mutable simulated data plane; also a network handle for the assurance cycle."""

    def __init__(self, nskg: Nskg, tables=None, clock: int = 0, rng_seed: int = 0):
        self.nskg = nskg
        self.initial_nskg = nskg
        self.clock = clock
        self.rng_seed = rng_seed
        self._entries = {sw: [] for sw in nskg.switches}
        self._cache = {}
        for t in tables or ():
            if t.switch_id not in self._entries:
                raise SpecError(f"table for unknown switch {t.switch_id!r}")
            self._entries[t.switch_id] = list(t.entries)
        self.log = []
        self.deployments = {}   # intent id -> Deployment compiled at build time
        self.backups = {}       # intent id -> precomputed backup path or None
        self.hijacked = set()   # intent ids ever hit by a hijack
        self.mutations = 0

    # handle interface
    def table(self, sw: str) -> FlowTable:
        t = self._cache.get(sw)
        if t is None:
            t = self._cache[sw] = FlowTable.from_entries(sw, self._entries[sw])
        return t

    def export_flow_tables(self) -> list:
        """Tables of every Up switch (a Down switch cannot be queried)."""
        return [self.table(sw) for sw in self.nskg.switches if self.nskg.nodes[sw].up]

    def all_tables(self) -> list:
        return [self.table(sw) for sw in self.nskg.switches]

    def install(self, sw: str, entries, kind: str = "install"):
        """Add entries; one with identical match and priority replaces the old one."""
        self._require_up(sw)
        lst = self._entries[sw]
        for e in entries:
            for pos, old in enumerate(lst):
                if old.match == e.match and old.priority == e.priority:
                    lst[pos] = e
                    break
            else:
                lst.append(e)
            self._record(kind, switch=sw, entry=entry_to_obj(e))
        self._touch(sw)

    def remove(self, sw: str, key: AddrKey) -> int:
        self._require_up(sw)
        lst = self._entries[sw]
        keep = [e for e in lst if AddrKey.from_match(e.match) != key]
        removed = len(lst) - len(keep)
        if removed:
            self._entries[sw] = keep
            self._touch(sw)
        self._record("remove", switch=sw, key=key.text, removed=removed)
        return removed

    def apply_event(self, e: StateEvent):
        self.nskg = apply_event(self.nskg, e)
        self._record("state", event=event_to_obj(e), revision=self.nskg.revision)

    def step(self, dt: int = 1):
        """Advance simulated time; entries whose timeout horizon passed are dropped."""
        self.clock += dt
        for sw, lst in self._entries.items():
            keep = [e for e in lst if not e.expired(self.clock)]
            if len(keep) != len(lst):
                self._entries[sw] = keep
                self._touch(sw)
                self._record("expire", switch=sw, removed=len(lst) - len(keep))

    def _require_up(self, sw):
        rec = self.nskg.nodes.get(sw)
        if rec is None or rec.kind != SWITCH:
            raise ApplyError(f"no switch {sw!r}")
        if not rec.up:
            raise ApplyError(f"switch {sw} is down")

    def _touch(self, sw):
        self._cache.pop(sw, None)
        self.mutations += 1

    def _record(self, kind, **fields):
        self.log.append({"seq": len(self.log), "clock": self.clock, "kind": kind, **fields})

    def event_log(self) -> str:
        return "".join(json.dumps(ev, sort_keys=True, separators=(",", ":")) + "\n"
                       for ev in self.log)

    # state files
    def to_obj(self) -> dict:
        return {"topology": nskg_to_obj(self.nskg),
                "tables": flow_tables_to_obj(self.all_tables()),
                "clock": self.clock, "seed": self.rng_seed}

    @classmethod
    def from_obj(cls, obj) -> "SimNetwork":
        if not isinstance(obj, dict) or "topology" not in obj:
            raise SpecError("state file needs 'topology' and 'tables'")
        g = nskg_from_obj(obj["topology"])
        return cls(g, flow_tables_from_obj(obj.get("tables", [])),
                   obj.get("clock", 0), obj.get("seed", 0))


# -- forwarding oracle -------------------------------------------------------------

def forward_packet(n: SimNetwork, p: Packet, ingress: str) -> ForwardingTrace:
    """Walk ``p`` through the data plane starting at switch ``ingress``.

    Actions run in list order; Output sends the packet as rewritten so far.
    The walk gives up with ``Loop`` after visiting as many switches as the
    network has.
    """
    g = n.nskg
    rec = g.nodes.get(ingress)
    if rec is None or rec.kind != SWITCH or not rec.up:
        return ForwardingTrace((), DEAD_END, ingress, p)
    limit = len(g.switches)
    hops = []
    cur, pkt = ingress, p
    while True:
        if len(hops) >= limit:
            return ForwardingTrace(tuple(hops), LOOP, cur, pkt)
        e = match_packet(n.table(cur), pkt, n.clock)
        if e is None:
            hops.append((cur, None))
            return ForwardingTrace(tuple(hops), NO_MATCH, cur, pkt)
        hops.append((cur, e.entry_index))
        sent = None
        for a in e.actions:
            if a.kind == SET_VLAN:
                pkt = replace(pkt, vlan_id=a.arg)
            elif a.kind == SET_DST_MAC:
                pkt = replace(pkt, dst_mac=a.arg)
            elif a.kind == DROP:
                return ForwardingTrace(tuple(hops), DROPPED, cur, pkt)
            elif a.kind == OUTPUT:
                sent = (a.arg, pkt)
        if sent is None:
            return ForwardingTrace(tuple(hops), DROPPED, cur, pkt)
        port, pkt = sent
        link = g.port_index.get((cur, port))
        if link is None or not g.usable(link):
            return ForwardingTrace(tuple(hops), DEAD_END, cur, pkt)
        peer, peer_port = link.peer((cur, port))
        if g.nodes[peer].kind == HOST:
            return ForwardingTrace(tuple(hops), DELIVERED, peer, pkt)
        cur, pkt = peer, replace(pkt, in_port=peer_port)


def probe_packet(g: Nskg, i: Intent) -> tuple:
    """(packet, ingress switch) for an intent; ANY slots get the probe defaults."""
    sw, port = attachment(g, i.src_host)
    src, dst = g.nodes[i.src_host].attrs, g.nodes[i.dst_host].attrs
    p = Packet(src_ip=g.host_ip(i.src_host), dst_ip=g.host_ip(i.dst_host),
               proto=i.proto or PROBE_PROTO, src_port=PROBE_SRC_PORT,
               dst_port=i.dst_port or PROBE_DST_PORT, in_port=port,
               src_mac=src.get("mac", "00:00:00:00:00:00"),
               dst_mac=dst.get("mac", "00:00:00:00:00:00"))
    return p, sw


def intent_delivered(n: SimNetwork, i: Intent) -> bool:
    try:
        p, sw = probe_packet(n.nskg, i)
    except UnattachedHostError:
        return False
    return forward_packet(n, p, sw).delivered_to(i.dst_host)


def survival_rate(n: SimNetwork, I: IntentRepository) -> float:
    if not len(I):
        return 1.0
    return sum(intent_delivered(n, i) for i in I.sorted()) / len(I)


# -- faults -------------------------------------------------------------------------

def _count(percent: float, total: int, rounding) -> int:
    # rounding to 9 places keeps k*100/9 percent of 9 at exactly k
    return int(rounding(round(percent * total / 100.0, 9)))


def inject_hijack(n: SimNetwork, I: IntentRepository, intensity: float, seed: int,
                  victims=None) -> list:
    """Reroute ``ceil(intensity% * |I|)`` intents to the attacker host.

    Each victim gets entries with its own match fields at a priority above
    its current entry, from its ingress switch along a path to the
    attacker.  Returns ``[(switch, FlowEntry, victim id), ...]``.
    """
    if not 0 <= intensity <= 100:
        raise SpecError(f"intensity {intensity} outside [0,100]")
    g = n.nskg
    attacker = attacker_host(g)
    if victims is None:
        k = _count(intensity, len(I), math.ceil)
        if k == 0:
            return []
        if attacker is None:
            raise SpecError("topology has no attacker host")
        victims = sorted(random.Random(seed).sample(sorted(I.intents), k))
    elif attacker is None:
        raise SpecError("topology has no attacker host")
    try:
        a_sw, a_port = attachment(g, attacker)
    except UnattachedHostError:
        log.warning("hijack skipped: attacker %s is detached", attacker)
        return []
    injected = []
    for vid in victims:
        victim = I[vid]
        try:
            sw0, _ = attachment(g, victim.src_host)
        except UnattachedHostError:
            sw0 = None
        path = path_between(g, sw0, a_sw) if sw0 is not None else None
        if path is None:
            log.warning("hijack of %s skipped: attacker unreachable", vid)
            continue
        match = intent_match(victim, g)
        key = AddrKey.from_match(match)
        for here, there in zip(path, path[1:] + [None]):
            current = max((e.priority for e in n.table(here).entries
                           if AddrKey.from_match(e.match) == key),
                          default=victim.priority_class)
            port = a_port if there is None else port_towards(g, here, there)
            entry = FlowEntry(match, current + HIJACK_BOOST, (output(port),))
            n.install(here, [entry], kind="hijack")
            assert entry.priority > current
            injected.append((here, entry, vid))
        n.hijacked.add(vid)
    return injected


def fail_nodes(n: SimNetwork, I: IntentRepository, completeness: float, seed: int) -> list:
    """Take ``floor((100-completeness)% * |switches|)`` switches down.

    Access switches of intent endpoints are never chosen.
    """
    if not 0 <= completeness <= 100:
        raise SpecError(f"completeness {completeness} outside [0,100]")
    g = n.nskg
    k = _count(100 - completeness, len(g.switches), math.floor)
    if k == 0:
        return []
    exempt = set()
    for i in I.sorted():
        for h in (i.src_host, i.dst_host):
            exempt.update(sw for sw, _ in n.initial_nskg.host_links.get(h, ()))
    candidates = [sw for sw in g.switches if g.nodes[sw].up and sw not in exempt]
    if k > len(candidates):
        raise SpecError(f"cannot fail {k} switches: only {len(candidates)} are eligible")
    chosen = sorted(random.Random(seed).sample(candidates, k))
    for sw in chosen:
        n.apply_event(StateEvent("NodeDown", sw))
    return chosen


# -- baseline ------------------------------------------------------------------------

def _backup_path(g: Nskg, primary: tuple) -> Optional[tuple]:
    """Shortest path between the primary's ends avoiding its interior switches
    (and its only link when it has no interior)."""
    if len(primary) < 2:
        return None
    a, b = primary[0], primary[-1]
    banned = set(primary[1:-1])
    banned_edge = frozenset((a, b)) if len(primary) == 2 else None
    parent = {a: None}
    frontier = deque([a])
    while frontier:
        cur = frontier.popleft()
        if cur == b:
            break
        for _, peer, _ in g.adjacency[cur]:
            if peer in parent or peer in banned or g.nodes[peer].kind != SWITCH:
                continue
            if banned_edge is not None and frozenset((cur, peer)) == banned_edge:
                continue
            parent[peer] = cur
            frontier.append(peer)
    if b not in parent:
        return None
    path = [b]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return tuple(reversed(path))


def _path_up(g: Nskg, path: tuple) -> bool:
    if any(not g.nodes[sw].up for sw in path):
        return False
    return all(port_towards(g, x, y) is not None for x, y in zip(path, path[1:]))


def baseline_primary_backup(n: SimNetwork, I: IntentRepository) -> float:
    """Survival under a precomputed primary/backup strategy.

    Paths are fixed when the scenario is built.  An intent survives iff its
    endpoints are attached and its primary or backup path is fully Up.  The
    strategy never inspects flow tables, so a hijacked intent stays lost.
    """
    if not len(I):
        return 1.0
    g = n.nskg
    alive = 0
    for i in I.sorted():
        dep = n.deployments.get(i.id)
        if dep is None or i.id in n.hijacked:
            continue
        try:
            attachment(g, i.src_host)
            attachment(g, i.dst_host)
        except UnattachedHostError:
            continue
        backup = n.backups.get(i.id)
        if _path_up(g, dep.path) or (backup is not None and _path_up(g, backup)):
            alive += 1
    return alive / len(I)


def feasible_fraction(n: SimNetwork, I: IntentRepository) -> float:
    """Fraction of intents whose endpoints are still connected at all."""
    if not len(I):
        return 1.0
    ok = 0
    for i in I.sorted():
        try:
            a, _ = attachment(n.nskg, i.src_host)
            b, _ = attachment(n.nskg, i.dst_host)
        except UnattachedHostError:
            continue
        ok += path_between(n.nskg, a, b) is not None
    return ok / len(I)


# -- scenarios -------------------------------------------------------------------------

@dataclass(frozen=True)
class Fault:
    kind: str            # "Hijack" or "NodeFail"
    value: float         # intensity % or completeness %
    at: int = 0
    victims: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("Hijack", "NodeFail"):
            raise SpecError(f"unknown fault kind {self.kind!r}")
        if not 0 <= self.value <= 100:
            raise SpecError(f"{self.kind} percentage {self.value} outside [0,100]")
        if self.at < 0:
            raise SpecError("fault step must be non-negative")


@dataclass(frozen=True)
class ScenarioSpec:
    topology: dict                  # {"kind": "Mesh", rows, cols} | {"kind": "Star", hosts} | {"kind": "Custom", doc}
    intents: object = 10            # count, or tuple of Intent
    faults: tuple = ()
    seed: int = 0
    name: str = "scenario"
    steps: Optional[int] = None
    period: int = 1                 # assurance cycle every N steps; 0 disables
    trace: bool = False             # emit per-intent delivery metrics

    def __post_init__(self):
        kind = self.topology.get("kind")
        if kind == "Mesh":
            if self.topology.get("rows", 0) < 1 or self.topology.get("cols", 0) < 1:
                raise SpecError("Mesh needs rows >= 1 and cols >= 1")
        elif kind == "Star":
            if self.topology.get("hosts", 0) < 2:
                raise SpecError("Star needs hosts >= 2")
        elif kind == "Custom":
            if not isinstance(self.topology.get("doc"), dict):
                raise SpecError("Custom topology needs a 'doc' object")
        else:
            raise SpecError(f"unknown topology kind {kind!r}")
        if isinstance(self.intents, int) and self.intents < 0:
            raise SpecError("intent count must be non-negative")
        if self.period < 0:
            raise SpecError("period must be non-negative")


def scenario_from_obj(obj) -> ScenarioSpec:
    if not isinstance(obj, dict) or "topology" not in obj:
        raise SpecError("scenario needs a 'topology' object")
    intents = obj.get("intents", 10)
    if isinstance(intents, list):
        intents = tuple(intent_from_obj(o, f"$.intents[{k}]") for k, o in enumerate(intents))
    faults = []
    for f in obj.get("faults", []):
        kind = f.get("kind")
        value = f.get("intensity") if kind == "Hijack" else f.get("completeness")
        if value is None:
            raise SpecError(f"fault {f!r} lacks its percentage")
        victims = tuple(f["victims"]) if f.get("victims") is not None else None
        faults.append(Fault(kind, value, f.get("at", 0), victims))
    return ScenarioSpec(obj["topology"], intents, tuple(faults), obj.get("seed", 0),
                        obj.get("name", "scenario"), obj.get("steps"), obj.get("period", 1),
                        obj.get("trace", False))


def load_scenario(document) -> ScenarioSpec:
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    return scenario_from_obj(json.loads(document))


def generate_intents(g: Nskg, count: int, seed: int) -> IntentRepository:
    """Seeded TCP intents over distinct host pairs, excluding the attacker."""
    hosts = [h for h in g.hosts if h != attacker_host(g)]
    if count and len(hosts) < 2:
        raise SpecError("need at least two endpoint hosts")
    rng = random.Random(seed)
    seen = set()
    intents = []
    width = max(3, len(str(count)))
    while len(intents) < count:
        src, dst = rng.sample(hosts, 2)
        port = rng.randrange(1024, 65536)
        if (src, dst, port) in seen:
            continue
        seen.add((src, dst, port))
        intents.append(Intent(f"i{len(intents) + 1:0{width}d}", src, dst, "TCP", port))
    return IntentRepository.of(intents)


def build_topology(spec: ScenarioSpec) -> Nskg:
    t = spec.topology
    if t["kind"] == "Mesh":
        return mesh_topology(t["rows"], t["cols"], t.get("attacker", True))
    if t["kind"] == "Star":
        return star_topology(t["hosts"])
    return nskg_from_obj(t["doc"])


def deploy(n: SimNetwork, I: IntentRepository):
    """Compile and install every intent; remember paths for the baseline."""
    for i in I.sorted():
        dep = compile_intent(i, n.nskg)
        if dep is None:
            raise SpecError(f"intent {i.id} has no path at build time")
        for sw in dep.path:
            n.install(sw, dep.entries[sw])
        n.deployments[i.id] = dep
        n.backups[i.id] = _backup_path(n.nskg, dep.path)


def build_scenario(s: ScenarioSpec) -> tuple:
    """(SimNetwork, IntentRepository) with every intent compiled and installed."""
    g = build_topology(s)
    n = SimNetwork(g, rng_seed=s.seed)
    if isinstance(s.intents, int):
        repo = generate_intents(g, s.intents, s.seed)
    else:
        repo = IntentRepository.of(s.intents)
    deploy(n, repo)
    return n, repo


def _fault_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


def apply_fault(n: SimNetwork, I: IntentRepository, f: Fault, seed: int) -> list:
    if f.kind == "Hijack":
        return inject_hijack(n, I, f.value, seed, f.victims)
    return fail_nodes(n, I, f.value, seed)


@dataclass
class ScenarioResult:
    network: SimNetwork
    intents: IntentRepository
    rows: list = field(default_factory=list)    # (scenario, seed, step, metric, value)
    cycles: list = field(default_factory=list)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def run_scenario(s: ScenarioSpec) -> ScenarioResult:
    """Build, then per step: apply due faults, measure, run the assurance loop, measure."""
    n, repo = build_scenario(s)
    res = ScenarioResult(n, repo)
    loop = AssuranceLoop(n, repo)
    last = max((f.at for f in s.faults), default=0)
    steps = s.steps if s.steps is not None else last + 2

    def emit(step, metric, value):
        res.rows.append((s.name, s.seed, step, metric, _fmt(value)))

    for step in range(steps):
        for fi, f in enumerate(s.faults):
            if f.at == step:
                hit = apply_fault(n, repo, f, _fault_seed(s.seed, fi))
                emit(step, f"fault_{f.kind.lower()}", len(hit))
        emit(step, "survival_pre", survival_rate(n, repo))
        emit(step, "baseline_survival", baseline_primary_backup(n, repo))
        emit(step, "feasible", feasible_fraction(n, repo))
        if s.trace:
            for i in repo.sorted():
                emit(step, f"delivered_pre:{i.id}", intent_delivered(n, i))
        if s.period and step % s.period == 0:
            rep = loop.cycle()
            res.cycles.append((step, rep))
            emit(step, "consistent_pre", rep.report.consistent)
            emit(step, "purges", len(rep.plan.purges))
            emit(step, "reinstalls", len(rep.plan.reinstalls))
            emit(step, "infeasible", len(rep.plan.infeasible))
            emit(step, "consistent_post", rep.post_check.consistent)
        emit(step, "survival", survival_rate(n, repo))
        if s.trace:
            for i in repo.sorted():
                emit(step, f"delivered:{i.id}", intent_delivered(n, i))
        n.step()
    return res
