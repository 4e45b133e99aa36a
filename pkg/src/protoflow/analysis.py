"""Analysis contexts: dedup-grouped record bundles and multi-turn history.

A bundle collects records grouped by protocol version, carrying each
protocol's markdown and field schema exactly once no matter how many
records reference it. Analysis backends plug in behind a one-method
interface; the stub backend is deterministic for testing.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .records import AiralogyRecord


@dataclass
class ContextGroup:
    protocol_id: str
    protocol_version: str
    markdown: str
    field_schema: dict
    records: list = field(default_factory=list)
    model_doc: str | None = None
    assigner_doc: str | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "protocol": {"id": self.protocol_id, "version": self.protocol_version},
            "markdown": self.markdown,
            "field_schema": self.field_schema,
            "records": [r.to_json_obj() for r in self.records],
        }
        if self.model_doc is not None:
            obj["model_doc"] = self.model_doc
        if self.assigner_doc is not None:
            obj["assigner_doc"] = self.assigner_doc
        return obj


@dataclass
class ContextBundle:
    groups: list = field(default_factory=list)

    def record_count(self) -> int:
        return sum(len(g.records) for g in self.groups)

    def to_json_obj(self) -> dict:
        return {"groups": [g.to_json_obj() for g in self.groups]}


@dataclass
class AnalysisTurn:
    purpose: str
    result: str


class AnalysisBackend(Protocol):
    def analyze(self, bundle: ContextBundle, purpose: str, history: list) -> str: ...


class StubBackend:
    """Deterministic digest backend for tests and offline runs."""

    def analyze(self, bundle: ContextBundle, purpose: str, history: list) -> str:
        digest = hashlib.sha1(purpose.encode("utf-8")).hexdigest()[:8]
        return (
            f"groups={len(bundle.groups)}; "
            f"records={bundle.record_count()}; "
            f"purpose={digest}"
        )


ProtocolLookup = Callable[[str, str], dict]


def build_bundle(
    records: list[AiralogyRecord],
    lookup: ProtocolLookup,
    include_code: bool = False,
) -> ContextBundle:
    """Group records by protocol version, first appearance first.

    `lookup(protocol_id, version)` must return the protocol's static
    artifacts: {"markdown", "field_schema"} plus optional "model_doc" and
    "assigner_doc". Raises KeyError for unresolvable identities.
    """
    groups: dict[tuple[str, str], ContextGroup] = {}
    order: list[tuple[str, str]] = []
    for record in records:
        key = (record.metadata.protocol_id, record.metadata.protocol_version)
        if key not in groups:
            artifacts = lookup(*key)
            group = ContextGroup(
                protocol_id=key[0],
                protocol_version=key[1],
                markdown=artifacts["markdown"],
                field_schema=artifacts["field_schema"],
            )
            if include_code:
                group.model_doc = artifacts.get("model_doc")
                group.assigner_doc = artifacts.get("assigner_doc")
            groups[key] = group
            order.append(key)
        groups[key].records.append(record)
    return ContextBundle(groups=[groups[k] for k in order])


def run_analysis(
    session: list[AnalysisTurn],
    bundle: ContextBundle,
    purpose: str,
    backend: AnalysisBackend,
) -> tuple[str, list[AnalysisTurn]]:
    """One analysis turn over the bundle with full prior history.

    Returns the result and the extended session; the input session is not
    mutated, and a backend failure leaves it unchanged.
    """
    history = [(turn.purpose, turn.result) for turn in session]
    result = backend.analyze(bundle, purpose, history)
    return result, list(session) + [AnalysisTurn(purpose, result)]
