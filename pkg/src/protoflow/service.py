"""HTTP service: protocol upload, recording sessions, records, AIRA runs.

All durable state lives under the configured data directory (record files
plus unpacked protocol uploads); sessions are in-memory with an idle TTL,
so a restart keeps every record and drops only open sessions.
"""

from __future__ import annotations

import threading
import time as time_mod
import uuid
import zipfile
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Request, Response

from . import cnt, report, session as session_mod, workflow
from .config import ServiceConfig
from .diagnostics import has_errors
from .protocol import ProtocolRegistry, unzip_protocol
from .records import RecordNotFound, RecordStore, RecordValidationError


def _default_clock() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Sessions:
    """In-memory session table with idle expiry."""

    def __init__(self, ttl_seconds: int):
        self.ttl = ttl_seconds
        self._items: dict[str, tuple[session_mod.DraftSession, float]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def add(self, session: session_mod.DraftSession) -> None:
        with self._guard:
            self._items[session.session_id] = (session, time_mod.monotonic())
            self._locks[session.session_id] = threading.Lock()

    def get(self, sid: str) -> tuple[session_mod.DraftSession, threading.Lock]:
        with self._guard:
            self._purge()
            if sid not in self._items:
                raise HTTPException(404, f"unknown session: {sid}")
            session, _ = self._items[sid]
            self._items[sid] = (session, time_mod.monotonic())
            return session, self._locks[sid]

    def _purge(self) -> None:
        now = time_mod.monotonic()
        dead = [sid for sid, (_, at) in self._items.items() if now - at > self.ttl]
        for sid in dead:
            del self._items[sid]
            del self._locks[sid]


def create_app(
    config: ServiceConfig | None = None,
    clock=None,
    plugins: dict | None = None,
) -> FastAPI:
    config = config or ServiceConfig()
    clock = clock or _default_clock
    plugins = dict(plugins or {})

    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    probe = data_dir / ".write_probe"
    try:
        probe.write_text("", "utf-8")
        probe.unlink()
    except OSError as e:
        raise RuntimeError(f"data directory {data_dir} is not writable: {e}")

    store = RecordStore(data_dir)
    registry = ProtocolRegistry(config.default_lab, config.default_project, plugins)
    protocols_dir = data_dir / "protocols"
    protocols_dir.mkdir(exist_ok=True)
    for child in sorted(protocols_dir.iterdir()):
        if (child / "protocol.aimd").is_file():
            registry.register_dir(child)

    sessions = _Sessions(config.session_ttl_seconds)
    app = FastAPI(title="protoflow", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.registry = registry
    app.state.sessions = sessions
    app.state.config = config

    def _bound_or_404(identity: str):
        try:
            return registry.get(identity)
        except KeyError:
            raise HTTPException(404, f"unknown protocol: {identity}")

    @app.get("/health")
    def health():
        return {"status": "ok", "protocols": registry.identities()}

    @app.post("/protocols")
    async def upload_protocol(request: Request):
        blob = await request.body()
        if not blob:
            raise HTTPException(400, "empty upload; send a protocol zip")
        target = protocols_dir / uuid.uuid4().hex
        try:
            unzip_protocol(blob, target)
        except (zipfile.BadZipFile, ValueError) as e:
            raise HTTPException(400, f"bad archive: {e}")
        if not (target / "protocol.aimd").is_file():
            raise HTTPException(400, "archive has no protocol.aimd")
        bound, diagnostics = registry.register_dir(target)
        payload = {
            "airalogy_protocol_id": bound.ref.airalogy_protocol_id,
            "diagnostics": [d.to_json_obj() for d in diagnostics],
        }
        if has_errors(diagnostics):
            raise HTTPException(400, payload)
        return payload

    @app.get("/protocols/{identity:path}/schema")
    def protocol_schema(identity: str):
        bound = _bound_or_404(identity)
        return {
            "airalogy_protocol_id": bound.ref.airalogy_protocol_id,
            "title": bound.info.name or bound.ref.protocol_id,
            "json_schema": bound.json_schema(),
            "layout": bound.layout(),
            "assigned_fields": sorted(bound.graph.owner),
        }

    @app.post("/sessions")
    def open_session(payload: dict = Body(...)):
        identity = str(payload.get("protocol", ""))
        user_id = str(payload.get("user_id", "anonymous"))
        bound = _bound_or_404(identity)
        session = session_mod.open_session(bound, user_id, clock(), plugins)
        sessions.add(session)
        return {
            "session_id": session.session_id,
            "airalogy_protocol_id": bound.ref.airalogy_protocol_id,
            "states": dict(session.states),
        }

    @app.patch("/sessions/{sid}/fields")
    def set_field(sid: str, payload: dict = Body(...)):
        session, lock = sessions.get(sid)
        field_id = str(payload.get("field_id", ""))
        if session.bound.schema.spec(field_id) is None:
            raise HTTPException(404, f"unknown field: {field_id}")
        with lock:
            try:
                outcome = session_mod.set_field(session, field_id, payload.get("value"))
            except session_mod.SessionError as e:
                raise HTTPException(409, str(e))
        body = {
            "outcome": "ok" if outcome.ok else "violation",
            "field_id": field_id,
            "value": outcome.value,
            "triggered": [t.to_json_obj() for t in outcome.triggered],
        }
        if outcome.violation is not None:
            body["message"] = outcome.violation.message
            body["rule"] = outcome.violation.rule
        return body

    @app.post("/sessions/{sid}/ops")
    def apply_ops(sid: str, ops: list = Body(...)):
        session, lock = sessions.get(sid)
        with lock:
            try:
                acks = session_mod.apply_ops(session, ops)
            except session_mod.SessionError as e:
                raise HTTPException(409, str(e))
        return [a.to_json_obj() for a in acks]

    @app.post("/sessions/{sid}/assigners/{aid}/trigger")
    def trigger_assigner(sid: str, aid: str):
        session, lock = sessions.get(sid)
        if aid not in session.bound.graph.specs:
            raise HTTPException(404, f"unknown assigner: {aid}")
        with lock:
            try:
                result, log = session_mod.trigger_assigner(session, aid)
            except session_mod.SessionError as e:
                raise HTTPException(409, str(e))
            except ValueError as e:
                raise HTTPException(400, str(e))
        return {
            "success": result.success,
            "assigned_fields": dict(result.assigned_fields),
            "error_message": result.error_message,
            "triggered": [t.to_json_obj() for t in log],
            "states": dict(session.states),
        }

    @app.patch("/sessions/{sid}/annotations")
    def annotate(sid: str, payload: dict = Body(...)):
        session, lock = sessions.get(sid)
        kind = str(payload.get("kind", ""))
        item_id = str(payload.get("id", ""))
        checked = payload["checked"] if "checked" in payload else ...
        annotation = payload.get("annotation")
        with lock:
            try:
                state = session_mod.annotate(session, kind, item_id, annotation, checked)
            except session_mod.SessionError as e:
                if "unknown" in str(e):
                    raise HTTPException(404, str(e))
                raise HTTPException(400, str(e))
        return {"id": item_id, "annotation": state.annotation, "checked": state.checked}

    @app.post("/sessions/{sid}/submit")
    def submit(sid: str, payload: dict = Body(default={})):
        session, lock = sessions.get(sid)
        with lock:
            try:
                record = session_mod.submit(
                    session,
                    store,
                    payload.get("user_id"),
                    payload.get("time") or clock(),
                    allow_null_checks=config.allow_null_checks,
                )
            except RecordValidationError as e:
                raise HTTPException(
                    400,
                    {
                        "violations": [
                            {"field_id": v.field_id, "rule": v.rule, "message": v.message}
                            for v in e.violations
                        ]
                    },
                )
            except session_mod.SessionError as e:
                raise HTTPException(409, str(e))
        return record.to_json_obj()

    @app.get("/records/{arid:path}/report")
    def record_report(arid: str, format: str = "html"):
        try:
            record = store.get_record(arid)
        except (RecordNotFound, ValueError) as e:
            raise HTTPException(404, str(e))
        try:
            artifacts = registry.lookup(
                record.metadata.protocol_id, record.metadata.protocol_version
            )
        except KeyError as e:
            raise HTTPException(404, f"protocol artifacts unavailable: {e}")
        try:
            doc = report.render_report(
                artifacts["markdown"], artifacts["field_schema"], record, format
            )
        except report.ReportError as e:
            raise HTTPException(400, str(e))
        media = "text/html" if doc.format == report.HTML else "text/markdown"
        return Response(doc.body, media_type=media)

    @app.get("/records/{arid:path}")
    def get_record(arid: str):
        try:
            record = store.get_record(arid)
        except (RecordNotFound, ValueError) as e:
            raise HTTPException(404, str(e))
        return record.to_json_obj()

    @app.post("/runs")
    def run_workflow(payload: dict = Body(...)):
        source = payload.get("workflow_yaml")
        if not source:
            raise HTTPException(400, "workflow_yaml is required")
        try:
            wf = workflow.parse_workflow(str(source))
        except workflow.WorkflowError as e:
            raise HTTPException(400, str(e))
        policy_name = str(payload.get("policy", "scripted-cnt"))
        if policy_name != "scripted-cnt":
            raise HTTPException(400, f"unknown policy: {policy_name}")
        policy = cnt.scripted_cnt_policy()
        executor = cnt.cnt_simulator()
        recorder = workflow.RunRecorder(store, user_id=str(payload.get("user_id", "aira")))
        try:
            state = workflow.run_aira(
                wf,
                payload.get("goal"),
                policy,
                executor,
                recorder,
                max_steps=int(payload.get("max_steps") or config.max_steps),
            )
        except (workflow.PolicyError, workflow.ExecutorError) as e:
            raise HTTPException(500, str(e))
        return state.to_trace()

    return app
