"""Declared intents (set I) and their JSON repository."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Optional

from .extractor import EndpointTuple
from .flowmodel import PROTOCOLS, SchemaError

INTENT_KEYS = ("id", "src_host", "dst_host", "proto", "dst_port", "priority_class")


class DuplicateIdError(ValueError):
    pass


class UnknownIdError(KeyError):
    pass


class DuplicateSemanticsWarning(UserWarning):
    """Two intents project to the same endpoint tuple."""


@dataclass(frozen=True)
class Intent:
    id: str
    src_host: str
    dst_host: str
    proto: Optional[str] = None
    dst_port: Optional[int] = None
    priority_class: int = 100

    def __post_init__(self):
        if self.src_host == self.dst_host:
            raise ValueError(f"intent {self.id}: source and destination are both {self.src_host}")
        if self.proto is not None and self.proto not in PROTOCOLS:
            raise ValueError(f"intent {self.id}: unknown protocol {self.proto!r}")
        if self.dst_port is not None and not 1 <= self.dst_port <= 65535:
            raise ValueError(f"intent {self.id}: dst_port {self.dst_port} outside [1,65535]")
        if self.priority_class < 0:
            raise ValueError(f"intent {self.id}: negative priority_class")

    def to_obj(self) -> dict:
        return {"id": self.id, "src_host": self.src_host, "dst_host": self.dst_host,
                "proto": self.proto or "ANY", "dst_port": self.dst_port,
                "priority_class": self.priority_class}


def to_tuple(i: Intent) -> EndpointTuple:
    return EndpointTuple(i.src_host, i.dst_host, i.proto, i.dst_port)


@dataclass(frozen=True)
class IntentRepository:
    intents: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    revision: int = 0
    diagnostics: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "intents", MappingProxyType(dict(self.intents)))

    def __len__(self):
        return len(self.intents)

    def __iter__(self):
        return iter(self.sorted())

    def __contains__(self, intent_id):
        return intent_id in self.intents

    def __getitem__(self, intent_id) -> Intent:
        return self.intents[intent_id]

    def sorted(self) -> list:
        return [self.intents[k] for k in sorted(self.intents)]

    @cached_property
    def by_tuple(self) -> dict:
        """Endpoint tuple -> smallest intent id projecting to it."""
        out = {}
        for i in self.sorted():
            out.setdefault(to_tuple(i), i.id)
        return out

    @classmethod
    def of(cls, intents) -> "IntentRepository":
        intents = list(intents)
        by_id = {}
        for i in intents:
            if i.id in by_id:
                raise DuplicateIdError(i.id)
            by_id[i.id] = i
        return cls(by_id, 0, _semantic_duplicates(by_id))


def _semantic_duplicates(by_id) -> tuple:
    seen = {}
    notes = []
    for iid in sorted(by_id):
        t = to_tuple(by_id[iid])
        if t in seen:
            notes.append(f"intents {seen[t]} and {iid} both project to {t.text}")
        else:
            seen[t] = iid
    return tuple(notes)


def intent_from_obj(obj, path="$") -> Intent:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected object")
    unknown = set(obj) - set(INTENT_KEYS)
    if unknown:
        raise SchemaError(path, f"unknown field(s) {sorted(unknown)}")
    for key in ("id", "src_host", "dst_host"):
        if not isinstance(obj.get(key), str):
            raise SchemaError(f"{path}.{key}", "expected string")
    proto = obj.get("proto", "ANY")
    if proto is not None and proto not in PROTOCOLS + ("ANY",):
        raise SchemaError(f"{path}.proto", f"unknown protocol {proto!r}")
    port = obj.get("dst_port")
    if port == "ANY":
        port = None
    if port is not None and (not isinstance(port, int) or isinstance(port, bool)):
        raise SchemaError(f"{path}.dst_port", "expected integer, null or 'ANY'")
    prio = obj.get("priority_class", 100)
    if not isinstance(prio, int) or isinstance(prio, bool):
        raise SchemaError(f"{path}.priority_class", "expected integer")
    try:
        return Intent(obj["id"], obj["src_host"], obj["dst_host"],
                      None if proto in (None, "ANY") else proto, port, prio)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def load_repository(document) -> IntentRepository:
    """Load a JSON array of intents.

    Intents that project to the same endpoint tuple are kept but listed in
    ``diagnostics`` and reported with a :class:`DuplicateSemanticsWarning`.
    """
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise SchemaError("$", "expected array of intents")
    repo = IntentRepository.of(intent_from_obj(o, f"$[{i}]") for i, o in enumerate(doc))
    for note in repo.diagnostics:
        warnings.warn(note, DuplicateSemanticsWarning, stacklevel=2)
    return repo


def repository_to_obj(r: IntentRepository) -> list:
    return [i.to_obj() for i in r.sorted()]


def save_repository(r: IntentRepository) -> bytes:
    """Canonical bytes: sorted by id, fixed field order, one intent per line."""
    lines = [json.dumps(o, separators=(",", ":")) for o in repository_to_obj(r)]
    if not lines:
        return b"[]\n"
    return ("[\n" + ",\n".join(lines) + "\n]\n").encode("utf-8")


def upsert(r: IntentRepository, i: Intent) -> IntentRepository:
    intents = dict(r.intents)
    intents[i.id] = i
    return IntentRepository(intents, r.revision + 1, _semantic_duplicates(intents))


def remove(r: IntentRepository, intent_id: str) -> IntentRepository:
    if intent_id not in r.intents:
        raise UnknownIdError(intent_id)
    intents = dict(r.intents)
    del intents[intent_id]
    return IntentRepository(intents, r.revision + 1, _semantic_duplicates(intents))
