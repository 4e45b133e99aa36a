"""Live recording sessions: field entry, checks, structured ops, submission.

A session wraps one bound protocol with the mutable state of a record
being filled in. Field writes validate first, then trigger assigner
propagation; structured operation batches reuse the same path; submission
runs the full record validation and persists through the record store.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import aimd, assigner, model
from .model import Violation
from .protocol import BoundProtocol
from .records import (
    AiralogyRecord,
    RecordData,
    RecordStore,
    RecordValidationError,
    StepCheckData,
)

OPEN = "open"
SUBMITTED = "submitted"

UPDATE = "update"


class SessionError(ValueError):
    pass


@dataclass
class Acknowledgment:
    """Outcome of one operation instruction, in instruction order."""

    success: bool
    field_id: str
    message: str
    field_value_updated: object = None

    def to_json_obj(self) -> dict:
        obj = {"success": self.success, "field_id": self.field_id}
        if self.success:
            obj["field_value_updated"] = self.field_value_updated
        obj["message"] = self.message
        return obj


@dataclass
class SetOutcome:
    ok: bool
    value: object = None
    violation: Violation | None = None
    triggered: list = field(default_factory=list)


@dataclass
class DraftSession:
    bound: BoundProtocol
    user_id: str
    now: str
    session_id: str = field(default_factory=lambda: str(uuid.uuid4()))
    states: dict = field(default_factory=dict)  # active vars only
    step_state: dict = field(default_factory=dict)
    check_state: dict = field(default_factory=dict)
    status: str = OPEN
    plugins: dict = field(default_factory=dict)

    def require_open(self) -> None:
        if self.status != OPEN:
            raise SessionError("already submitted")

    def var_spec(self, field_id: str) -> model.FieldSpec:
        spec = self.bound.schema.spec(field_id)
        if spec is None:
            raise SessionError(f"unknown field: {field_id}")
        return spec

    def value_of(self, field_id: str) -> object:
        return self.states.get(field_id)

    def _validate_cb(self, field_id: str, value: object) -> Violation | None:
        spec = self.bound.schema.spec(field_id)
        if spec is None:
            return None
        return model.validate_value(spec, value)


def open_session(
    bound: BoundProtocol,
    user_id: str = "anonymous",
    now: str = "",
    plugins: dict | None = None,
) -> DraftSession:
    """Fresh session: defaults become active values, then rules propagate."""
    session = DraftSession(bound=bound, user_id=user_id, now=now, plugins=dict(plugins or {}))
    defaults = model.resolve_defaults(bound.schema, {"user_id": user_id, "now": now})
    session.states.update(defaults)
    session.states, _ = assigner.propagate(
        bound.graph, session.states, session.plugins, session._validate_cb
    )
    for decl in bound.doc.decls:
        if decl.kind == aimd.STEP:
            session.step_state[decl.id] = StepCheckData()
        elif decl.kind == aimd.CHECK:
            session.check_state[decl.id] = StepCheckData()
    return session


def set_field(session: DraftSession, field_id: str, raw: object) -> SetOutcome:
    """Validate then activate one field; invalid input leaves it empty."""
    session.require_open()
    spec = session.var_spec(field_id)

    if raw is None:
        # explicit clear: field and everything computed from it go empty
        if field_id in session.states:
            del session.states[field_id]
            session.states, _ = assigner.reset_descendants(
                session.bound.graph, session.states, field_id
            )
        return SetOutcome(ok=True, value=None)

    value = model.coerce_value(spec, raw)
    violation = model.validate_value(spec, value)
    if violation is not None:
        if field_id in session.states:
            del session.states[field_id]
            session.states, _ = assigner.reset_descendants(
                session.bound.graph, session.states, field_id
            )
        return SetOutcome(ok=False, violation=violation)

    if session.states.get(field_id) == value and field_id in session.states:
        return SetOutcome(ok=True, value=value)

    session.states, _ = assigner.reset_descendants(
        session.bound.graph, session.states, field_id
    )
    session.states[field_id] = value
    session.states, log = assigner.on_field_activated(
        session.bound.graph, session.states, field_id, session.plugins, session._validate_cb
    )
    return SetOutcome(ok=True, value=value, triggered=log)


def trigger_assigner(session: DraftSession, assigner_id: str):
    """Run one manual rule against the current states."""
    session.require_open()
    states, result, log = assigner.trigger_manual(
        session.bound.graph,
        session.states,
        assigner_id,
        session.plugins,
        session._validate_cb,
    )
    session.states = states
    return result, log


def annotate(
    session: DraftSession,
    kind: str,
    item_id: str,
    annotation: str | None = None,
    checked: object = ...,
) -> StepCheckData:
    """Update a step or checkpoint note / review state."""
    session.require_open()
    if kind == aimd.STEP:
        decl = session.bound.doc.decl(item_id)
        if decl is None or decl.kind != aimd.STEP:
            raise SessionError(f"unknown step: {item_id}")
        state = session.step_state[item_id]
        if checked is not ... and checked is not None and not decl.check_mode:
            raise SessionError(f"step {item_id} has no check mode")
    elif kind == aimd.CHECK:
        decl = session.bound.doc.decl(item_id)
        if decl is None or decl.kind != aimd.CHECK:
            raise SessionError(f"unknown check: {item_id}")
        state = session.check_state[item_id]
    else:
        raise SessionError(f"unknown kind: {kind}")

    if annotation is not None:
        state.annotation = annotation
    if checked is not ...:
        if checked is not None and not isinstance(checked, bool):
            raise SessionError("checked must be true, false, or null")
        state.checked = checked
    return state


def render_value(value: object) -> str:
    """Human formatting for acknowledgment messages.

    Strings appear bare, numbers in their shortest exact form, booleans
    and null in JSON spelling, containers as canonical JSON.
    """
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def apply_ops(session: DraftSession, ops: list) -> list[Acknowledgment]:
    """Apply structured instructions in order; failures never abort the batch."""
    session.require_open()
    acks: list[Acknowledgment] = []
    for op in ops:
        field_id = str(op.get("field_id", "")) if isinstance(op, dict) else ""
        if not isinstance(op, dict) or op.get("operation") != UPDATE:
            kind = op.get("operation") if isinstance(op, dict) else op
            acks.append(
                Acknowledgment(False, field_id, f"unsupported operation: {kind!r}")
            )
            continue
        if "field_id" not in op:
            acks.append(Acknowledgment(False, "", "missing field_id"))
            continue
        try:
            outcome = set_field(session, field_id, op.get("field_value"))
        except SessionError as e:
            acks.append(Acknowledgment(False, field_id, str(e)))
            continue
        if outcome.ok:
            acks.append(
                Acknowledgment(
                    True,
                    field_id,
                    f"The value of {field_id} has been set to {render_value(outcome.value)}.",
                    field_value_updated=outcome.value,
                )
            )
        else:
            acks.append(Acknowledgment(False, field_id, outcome.violation.message))
    return acks


def final_response(acks: list[Acknowledgment]) -> str:
    """Rule-based reply: the acknowledgment messages joined by single spaces."""
    return " ".join(a.message for a in acks)


def build_record_data(session: DraftSession) -> RecordData:
    """Snapshot of the session as record data; empty vars become null."""
    var = {}
    step = {}
    check = {}
    for decl in session.bound.doc.decls:
        if decl.kind == aimd.VAR:
            var[decl.id] = session.states.get(decl.id)
        elif decl.kind == aimd.STEP:
            st = session.step_state[decl.id]
            step[decl.id] = StepCheckData(st.annotation, st.checked)
        elif decl.kind == aimd.CHECK:
            st = session.check_state[decl.id]
            check[decl.id] = StepCheckData(st.annotation, st.checked)
    return RecordData(var=var, step=step, check=check)


def submission_violations(
    session: DraftSession, *, allow_null_checks: bool = False
) -> list[Violation]:
    """Everything blocking submission right now."""
    violations = model.validate_record_data(
        session.bound.schema, dict(session.states)
    )
    if not allow_null_checks:
        for decl in session.bound.doc.decls:
            if decl.kind == aimd.CHECK and session.check_state[decl.id].checked is None:
                violations.append(
                    Violation(decl.id, "check", f"unreviewed check: {decl.id}")
                )
            elif (
                decl.kind == aimd.STEP
                and decl.check_mode
                and session.step_state[decl.id].checked is None
            ):
                violations.append(
                    Violation(decl.id, "check", f"unreviewed check: {decl.id}")
                )
    return violations


def submit(
    session: DraftSession,
    store: RecordStore,
    user_id: str | None = None,
    time: str | None = None,
    *,
    allow_null_checks: bool = False,
) -> AiralogyRecord:
    """Full validation, then persist and freeze the session."""
    session.require_open()
    violations = submission_violations(session, allow_null_checks=allow_null_checks)
    if violations:
        raise RecordValidationError(violations)
    record = store.submit_record(
        session.bound.ref,
        build_record_data(session),
        user_id or session.user_id,
        time or session.now,
    )
    session.status = SUBMITTED
    return record


def resolve_record_refs(
    session: DraftSession, field_id: str, store: RecordStore
) -> list[AiralogyRecord]:
    """Fetch the records a reference field points at, in field order."""
    spec = session.var_spec(field_id)
    if spec.type.name != "record_ref":
        raise SessionError(f"field {field_id} is not a record reference")
    value = session.states.get(field_id)
    if value is None:
        return []
    ids = list(value) if isinstance(value, list) else [value]
    records = []
    missing = []
    for rid in ids:
        try:
            records.append(store.get_record(rid))
        except KeyError:
            missing.append(str(rid))
    if missing:
        raise SessionError("missing records: " + ", ".join(missing))
    return records


def save_draft(session: DraftSession, directory: str | Path) -> Path:
    """Write the session to `<session_id>.draft.json` under directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{session.session_id}.draft.json"
    obj = {
        "session_id": session.session_id,
        "airalogy_protocol_id": session.bound.ref.airalogy_protocol_id,
        "status": session.status,
        "user_id": session.user_id,
        "now": session.now,
        "data": build_record_data(session).to_json_obj(),
    }
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", "utf-8")
    return path


def restore_draft(
    path: str | Path, bound: BoundProtocol, plugins: dict | None = None
) -> DraftSession:
    """Rebuild a session from a draft file; states come back as saved."""
    obj = json.loads(Path(path).read_text("utf-8"))
    if obj.get("airalogy_protocol_id") != bound.ref.airalogy_protocol_id:
        raise SessionError(
            f"draft belongs to {obj.get('airalogy_protocol_id')!r}, "
            f"not {bound.ref.airalogy_protocol_id!r}"
        )
    session = DraftSession(
        bound=bound,
        user_id=str(obj.get("user_id", "anonymous")),
        now=str(obj.get("now", "")),
        session_id=str(obj.get("session_id", str(uuid.uuid4()))),
        status=str(obj.get("status", OPEN)),
        plugins=dict(plugins or {}),
    )
    data = RecordData.from_json_obj(obj.get("data", {}))
    session.states = {k: v for k, v in data.var.items() if v is not None}
    for decl in bound.doc.decls:
        if decl.kind == aimd.STEP:
            session.step_state[decl.id] = data.step.get(decl.id, StepCheckData())
        elif decl.kind == aimd.CHECK:
            session.check_state[decl.id] = data.check.get(decl.id, StepCheckData())
    return session
