"""Flow tables: canonical entry model, JSON interchange, single-table matching.

A flow entry is the 5-tuple {match, priority, actions, counters, timeout}.
Every match field is optional; ``None`` means ANY.  IPv4 prefixes keep the
address exactly as written (``10.0.0.1/24`` stays ``10.0.0.1/24``) so that
documents round-trip losslessly; comparisons between prefixes that should
be treated as the same address block go through :meth:`Prefix.normalized`.
"""

from __future__ import annotations

import enum
import ipaddress
import json
from dataclasses import dataclass, fields
from typing import Any, Iterable, Optional

PROTOCOLS = ("TCP", "UDP", "ICMP")

OUTPUT = "Output"
DROP = "Drop"
TO_CONTROLLER = "ToController"
SET_VLAN = "SetVlan"
SET_DST_MAC = "SetDstMac"
ACTION_KINDS = (OUTPUT, DROP, TO_CONTROLLER, SET_VLAN, SET_DST_MAC)

MATCH_KEYS = ("src_ip", "dst_ip", "proto", "src_port", "dst_port", "in_port",
              "vlan_id", "src_mac", "dst_mac", "eth_type")
ENTRY_KEYS = ("match", "priority", "actions", "counters", "timeout")


def cached_hash(cls):
    """Memoize the field-tuple hash of a frozen dataclass.

    Entries and keys are dict keys on every extraction pass; recomputing a
    nested hash each time dominated the cycle profile.
    """
    names = tuple(f.name for f in fields(cls))

    def __hash__(self):
        d = self.__dict__
        h = d.get("_hash")
        if h is None:
            h = hash(tuple(d[n] for n in names))
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__
    return cls


class SchemaError(ValueError):
    """A document does not follow its schema.  ``path`` locates the offender."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class EntryClass(enum.Enum):
    FORWARDING = "Forwarding"
    FUNCTIONAL = "Functional"


@cached_hash
@dataclass(frozen=True)
class Prefix:
    """IPv4 address/mask-length.  ``address`` is kept verbatim (host bits too)."""

    address: int
    length: int = 32

    def __post_init__(self):
        if not 0 <= self.length <= 32:
            raise ValueError(f"mask length {self.length} outside [0,32]")
        if not 0 <= self.address < 2 ** 32:
            raise ValueError(f"address {self.address} is not IPv4")

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        if not isinstance(text, str):
            raise TypeError("prefix must be a string")
        addr, sep, length = text.partition("/")
        if sep:
            try:
                n = int(length)
            except ValueError:
                raise ValueError(f"bad mask length in {text!r}") from None
        else:
            n = 32
        try:
            a = int(ipaddress.IPv4Address(addr))
        except ipaddress.AddressValueError as exc:
            raise ValueError(str(exc)) from None
        return cls(a, n)

    @property
    def mask(self) -> int:
        return (0xFFFFFFFF << (32 - self.length)) & 0xFFFFFFFF

    @property
    def network(self) -> int:
        return self.address & self.mask

    def contains(self, address: int) -> bool:
        return (address & self.mask) == self.network

    def normalized(self) -> "Prefix":
        return Prefix(self.network, self.length)

    def __str__(self) -> str:
        return f"{int_to_ip(self.address)}/{self.length}"


def ip_to_int(text: str) -> int:
    return int(ipaddress.IPv4Address(text))


def int_to_ip(value: int) -> str:
    return f"{value >> 24}.{(value >> 16) & 255}.{(value >> 8) & 255}.{value & 255}"


def _mac(text: str) -> str:
    parts = text.lower().split(":")
    if len(parts) != 6 or not all(len(p) == 2 for p in parts):
        raise ValueError(f"bad MAC address {text!r}")
    int("".join(parts), 16)
    return ":".join(parts)


@cached_hash
@dataclass(frozen=True)
class MatchFields:
    src_ip: Optional[Prefix] = None
    dst_ip: Optional[Prefix] = None
    proto: Optional[str] = None
    src_port: Optional[int] = None
    dst_port: Optional[int] = None
    in_port: Optional[int] = None
    vlan_id: Optional[int] = None
    src_mac: Optional[str] = None
    dst_mac: Optional[str] = None
    eth_type: Optional[int] = None

    def __post_init__(self):
        if self.proto is not None and self.proto not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.proto!r}")
        for name in ("src_port", "dst_port"):
            v = getattr(self, name)
            if v is not None and not 1 <= v <= 65535:
                raise ValueError(f"{name} {v} outside [1,65535]")
        if self.in_port is not None and self.in_port < 0:
            raise ValueError(f"in_port {self.in_port} is negative")
        if self.vlan_id is not None and not 0 <= self.vlan_id <= 4095:
            raise ValueError(f"vlan_id {self.vlan_id} outside [0,4095]")

    def matches(self, p: "Packet") -> bool:
        if self.src_ip is not None and not self.src_ip.contains(p.src_ip):
            return False
        if self.dst_ip is not None and not self.dst_ip.contains(p.dst_ip):
            return False
        if self.proto is not None and self.proto != p.proto:
            return False
        if self.src_port is not None and self.src_port != p.src_port:
            return False
        if self.dst_port is not None and self.dst_port != p.dst_port:
            return False
        if self.in_port is not None and self.in_port != p.in_port:
            return False
        if self.vlan_id is not None and self.vlan_id != p.vlan_id:
            return False
        if self.src_mac is not None and self.src_mac != p.src_mac:
            return False
        if self.dst_mac is not None and self.dst_mac != p.dst_mac:
            return False
        if self.eth_type is not None and self.eth_type != p.eth_type:
            return False
        return True


@dataclass(frozen=True)
class Action:
    kind: str
    arg: Any = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind in (OUTPUT, SET_VLAN):
            if not isinstance(self.arg, int) or isinstance(self.arg, bool) or self.arg < 0:
                raise ValueError(f"{self.kind} needs a non-negative integer argument")
        elif self.kind == SET_DST_MAC:
            object.__setattr__(self, "arg", _mac(self.arg))
        elif self.arg is not None:
            raise ValueError(f"{self.kind} takes no argument")


def output(port: int) -> Action:
    return Action(OUTPUT, port)


@cached_hash
@dataclass(frozen=True)
class FlowEntry:
    match: MatchFields
    priority: int
    actions: tuple = ()
    counters: int = 0
    timeout: Optional[int] = None
    entry_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if self.priority < 0:
            raise ValueError("priority must be non-negative")
        if self.counters < 0:
            raise ValueError("counters must be non-negative")
        kinds = [a.kind for a in self.actions]
        if kinds.count(OUTPUT) > 1 or kinds.count(DROP) > 1:
            raise ValueError("at most one Output and one Drop per entry")
        if OUTPUT in kinds and DROP in kinds:
            raise ValueError("Output and Drop are mutually exclusive")

    @property
    def output_port(self) -> Optional[int]:
        for a in self.actions:
            if a.kind == OUTPUT:
                return a.arg
        return None

    def reindexed(self, index: int) -> "FlowEntry":
        """Copy with a new ``entry_index``; skips re-validation of unchanged fields."""
        new = object.__new__(FlowEntry)
        d = dict(self.__dict__)
        d.pop("_hash", None)
        d["entry_index"] = index
        new.__dict__.update(d)
        return new

    def expired(self, now: float) -> bool:
        return self.timeout is not None and now >= self.timeout


@dataclass(frozen=True)
class FlowTable:
    switch_id: str
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for i, e in enumerate(self.entries):
            if e.entry_index != i:
                raise ValueError(
                    f"table {self.switch_id}: entry at position {i} has index {e.entry_index}")

    @classmethod
    def from_entries(cls, switch_id: str, entries: Iterable[FlowEntry]) -> "FlowTable":
        """Build a table, renumbering ``entry_index`` by position."""
        return cls(switch_id, tuple(e if e.entry_index == i else e.reindexed(i)
                                    for i, e in enumerate(entries)))


@dataclass(frozen=True)
class Packet:
    src_ip: int
    dst_ip: int
    proto: str = "TCP"
    src_port: int = 40000
    dst_port: int = 80
    in_port: int = 0
    vlan_id: int = 0
    src_mac: str = "00:00:00:00:00:00"
    dst_mac: str = "00:00:00:00:00:00"
    eth_type: int = 0x0800


def classify_entry(e: FlowEntry) -> EntryClass:
    if any(a.kind == OUTPUT for a in e.actions):
        return EntryClass.FORWARDING
    return EntryClass.FUNCTIONAL


def match_packet(t: FlowTable, p: Packet, now: float = 0.0) -> Optional[FlowEntry]:
    """Highest-priority live entry matching ``p``; ties go to the lowest index."""
    best = None
    for e in t.entries:
        if e.expired(now) or not e.match.matches(p):
            continue
        if best is None or e.priority > best.priority:
            best = e
    return best


# -- JSON interchange ---------------------------------------------------------

def _expect(cond: bool, path: str, message: str):
    if not cond:
        raise SchemaError(path, message)


def _int(value, path: str) -> int:
    _expect(isinstance(value, int) and not isinstance(value, bool), path, "expected integer")
    return value


def _str(value, path: str) -> str:
    _expect(isinstance(value, str), path, "expected string")
    return value


def _checked(fn, value, path: str):
    try:
        return fn(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def _parse_match(obj, path: str) -> MatchFields:
    _expect(isinstance(obj, dict), path, "expected object")
    unknown = set(obj) - set(MATCH_KEYS)
    _expect(not unknown, path, f"unknown field(s) {sorted(unknown)}")
    kw = {}
    for key in ("src_ip", "dst_ip"):
        if obj.get(key) is not None:
            kw[key] = _checked(Prefix.parse, _str(obj[key], f"{path}.{key}"), f"{path}.{key}")
    if obj.get("proto") is not None:
        proto = _str(obj["proto"], f"{path}.proto")
        _expect(proto in PROTOCOLS + ("ANY",), f"{path}.proto", f"unknown protocol {proto!r}")
        if proto != "ANY":
            kw["proto"] = proto
    for key in ("src_port", "dst_port", "in_port", "vlan_id", "eth_type"):
        if obj.get(key) is not None:
            kw[key] = _int(obj[key], f"{path}.{key}")
    for key in ("src_mac", "dst_mac"):
        if obj.get(key) is not None:
            kw[key] = _checked(_mac, _str(obj[key], f"{path}.{key}"), f"{path}.{key}")
    return _checked(lambda kw: MatchFields(**kw), kw, path)


def _parse_action(obj, path: str) -> Action:
    _expect(isinstance(obj, dict), path, "expected object")
    unknown = set(obj) - {"kind", "arg"}
    _expect(not unknown, path, f"unknown field(s) {sorted(unknown)}")
    _expect("kind" in obj, path, "missing field 'kind'")
    kind = _str(obj["kind"], f"{path}.kind")
    _expect(kind in ACTION_KINDS, f"{path}.kind", f"unknown action kind {kind!r}")
    arg = obj.get("arg")
    if kind in (OUTPUT, SET_VLAN):
        _int(arg, f"{path}.arg")
    elif kind == SET_DST_MAC:
        _str(arg, f"{path}.arg")
    return _checked(lambda a: Action(kind, a), arg, path)


def _parse_entry(obj, path: str, index: int) -> FlowEntry:
    _expect(isinstance(obj, dict), path, "expected object")
    unknown = set(obj) - set(ENTRY_KEYS)
    _expect(not unknown, path, f"unknown field(s) {sorted(unknown)}")
    for key in ("match", "priority", "actions"):
        _expect(key in obj, path, f"missing field {key!r}")
    match = _parse_match(obj["match"], f"{path}.match")
    priority = _int(obj["priority"], f"{path}.priority")
    _expect(isinstance(obj["actions"], list), f"{path}.actions", "expected array")
    actions = [_parse_action(a, f"{path}.actions[{i}]") for i, a in enumerate(obj["actions"])]
    counters = _int(obj.get("counters", 0), f"{path}.counters")
    timeout = obj.get("timeout")
    if timeout is not None:
        _int(timeout, f"{path}.timeout")
    return _checked(lambda _: FlowEntry(match, priority, actions, counters, timeout, index),
                    None, path)


def flow_tables_from_obj(doc) -> list:
    """Validate an already-decoded flow-table document."""
    _expect(isinstance(doc, list), "$", "expected array of tables")
    tables = []
    seen = set()
    for ti, tobj in enumerate(doc):
        path = f"$[{ti}]"
        _expect(isinstance(tobj, dict), path, "expected object")
        unknown = set(tobj) - {"switch_id", "entries"}
        _expect(not unknown, path, f"unknown field(s) {sorted(unknown)}")
        _expect("switch_id" in tobj, path, "missing field 'switch_id'")
        _expect("entries" in tobj, path, "missing field 'entries'")
        sid = _str(tobj["switch_id"], f"{path}.switch_id")
        _expect(sid not in seen, f"{path}.switch_id", f"duplicate switch {sid!r}")
        seen.add(sid)
        _expect(isinstance(tobj["entries"], list), f"{path}.entries", "expected array")
        entries = [_parse_entry(e, f"{path}.entries[{i}]", i)
                   for i, e in enumerate(tobj["entries"])]
        tables.append(FlowTable(sid, tuple(entries)))
    return tables


def parse_flow_tables(document) -> list:
    """Parse a UTF-8 JSON flow-table document into :class:`FlowTable` objects.

    Raises :class:`SchemaError` for structural problems and ``ValueError``
    (message prefixed with the JSON path) for out-of-range values.
    """
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return flow_tables_from_obj(doc)


def match_to_obj(m: MatchFields) -> dict:
    out = {}
    for key in MATCH_KEYS:
        v = getattr(m, key)
        if v is None:
            continue
        out[key] = str(v) if isinstance(v, Prefix) else v
    return out


def action_to_obj(a: Action) -> dict:
    return {"kind": a.kind} if a.arg is None else {"kind": a.kind, "arg": a.arg}


def entry_to_obj(e: FlowEntry) -> dict:
    return {
        "match": match_to_obj(e.match),
        "priority": e.priority,
        "actions": [action_to_obj(a) for a in e.actions],
        "counters": e.counters,
        "timeout": e.timeout,
    }


def flow_tables_to_obj(tables: Iterable[FlowTable]) -> list:
    return [{"switch_id": t.switch_id, "entries": [entry_to_obj(e) for e in t.entries]}
            for t in tables]


def serialize_flow_tables(tables: Iterable[FlowTable]) -> bytes:
    """Canonical encoding: fixed key order, compact separators, trailing newline."""
    text = json.dumps(flow_tables_to_obj(tables), separators=(",", ":"))
    return (text + "\n").encode("utf-8")
