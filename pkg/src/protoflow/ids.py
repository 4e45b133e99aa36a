"""Identifier grammars shared across the engine.

Field ids are snake_case. Record ids and protocol ids follow the dotted
"airalogy.id...." grammar; both parse losslessly back into their parts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

FIELD_ID_RE = re.compile(r"^[a-z][a-z0-9_]*$")

RECORD_ID_RE = re.compile(
    r"^airalogy\.id\.record\.(?P<uuid>[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}"
    r"-[0-9a-f]{4}-[0-9a-f]{12})\.v\.(?P<version>[1-9][0-9]*)$"
)

PROTOCOL_ID_RE = re.compile(
    r"^airalogy\.id\.lab\.(?P<lab>[A-Za-z0-9_-]+)"
    r"\.project\.(?P<project>[A-Za-z0-9_-]+)"
    r"\.protocol\.(?P<protocol>[A-Za-z0-9_-]+)"
    r"\.v\.(?P<version>[0-9]+(?:\.[0-9]+)*)$"
)


def is_field_id(s: str) -> bool:
    return bool(FIELD_ID_RE.match(s))


def record_id_string(record_uuid: str, version: int) -> str:
    return f"airalogy.id.record.{record_uuid}.v.{version}"


def parse_record_id(s: str) -> tuple[str, int]:
    """Split a versioned record id into (uuid, version). Raises ValueError."""
    m = RECORD_ID_RE.match(s)
    if not m:
        raise ValueError(f"not a versioned record id: {s!r}")
    return m.group("uuid"), int(m.group("version"))


def is_record_id(s: str) -> bool:
    return bool(RECORD_ID_RE.match(s))


@dataclass(frozen=True)
class ProtocolRef:
    """Identity of one protocol version inside a lab/project namespace."""

    lab_id: str
    project_id: str
    protocol_id: str
    protocol_version: str

    @property
    def airalogy_protocol_id(self) -> str:
        return (
            f"airalogy.id.lab.{self.lab_id}.project.{self.project_id}"
            f".protocol.{self.protocol_id}.v.{self.protocol_version}"
        )


def parse_protocol_id(s: str) -> ProtocolRef:
    m = PROTOCOL_ID_RE.match(s)
    if not m:
        raise ValueError(f"not a protocol id: {s!r}")
    return ProtocolRef(
        lab_id=m.group("lab"),
        project_id=m.group("project"),
        protocol_id=m.group("protocol"),
        protocol_version=m.group("version"),
    )
