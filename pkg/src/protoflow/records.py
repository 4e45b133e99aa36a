"""Immutable versioned records with content hashes.

A record's `data` block ({"var": ..., "step": ..., "check": ...}) is hashed
as SHA-1 over a canonical JSON form: keys sorted, no whitespace, UTF-8,
shortest round-trip numbers. The store keeps one pretty-printed JSON file
per record version, named by the versioned record id, plus an atomically
rewritten counters file; nothing is ever mutated or deleted.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import threading
import uuid
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .ids import ProtocolRef, parse_protocol_id, parse_record_id, record_id_string
from .model import FieldSchemaDoc, Violation, validate_record_data

_OFFSET_RE = re.compile(r"(Z|[+-]\d{2}:\d{2})$")


class RecordNotFound(KeyError):
    pass


class RecordValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(v.message for v in violations))
        self.violations = violations


@dataclass
class StepCheckData:
    annotation: str = ""
    checked: bool | None = None

    def to_json_obj(self) -> dict:
        return {"annotation": self.annotation, "checked": self.checked}

    @staticmethod
    def from_json_obj(obj: dict) -> "StepCheckData":
        return StepCheckData(
            annotation=str(obj.get("annotation") or ""),
            checked=obj.get("checked"),
        )


@dataclass
class RecordData:
    var: dict = dc_field(default_factory=dict)
    step: dict = dc_field(default_factory=dict)
    check: dict = dc_field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "var": dict(self.var),
            "step": {k: v.to_json_obj() for k, v in self.step.items()},
            "check": {k: v.to_json_obj() for k, v in self.check.items()},
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "RecordData":
        return RecordData(
            var=dict(obj.get("var", {})),
            step={k: StepCheckData.from_json_obj(v) for k, v in obj.get("step", {}).items()},
            check={k: StepCheckData.from_json_obj(v) for k, v in obj.get("check", {}).items()},
        )


@dataclass
class RecordMetadata:
    airalogy_protocol_id: str
    lab_id: str
    project_id: str
    protocol_id: str
    protocol_version: str
    record_num: int
    record_current_version_submission_time: str
    record_current_version_submission_user_id: str
    record_initial_version_submission_time: str
    record_initial_version_submission_user_id: str
    sha1: str

    def to_json_obj(self) -> dict:
        return {
            "airalogy_protocol_id": self.airalogy_protocol_id,
            "lab_id": self.lab_id,
            "project_id": self.project_id,
            "protocol_id": self.protocol_id,
            "protocol_version": self.protocol_version,
            "record_num": self.record_num,
            "record_current_version_submission_time": self.record_current_version_submission_time,
            "record_current_version_submission_user_id": self.record_current_version_submission_user_id,
            "record_initial_version_submission_time": self.record_initial_version_submission_time,
            "record_initial_version_submission_user_id": self.record_initial_version_submission_user_id,
            "sha1": self.sha1,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "RecordMetadata":
        return RecordMetadata(**{k: obj[k] for k in (
            "airalogy_protocol_id", "lab_id", "project_id", "protocol_id",
            "protocol_version", "record_num",
            "record_current_version_submission_time",
            "record_current_version_submission_user_id",
            "record_initial_version_submission_time",
            "record_initial_version_submission_user_id", "sha1",
        )})


@dataclass
class AiralogyRecord:
    airalogy_record_id: str
    record_id: str
    record_version: int
    metadata: RecordMetadata
    data: RecordData

    def to_json_obj(self) -> dict:
        return {
            "airalogy_record_id": self.airalogy_record_id,
            "record_id": self.record_id,
            "record_version": self.record_version,
            "metadata": self.metadata.to_json_obj(),
            "data": self.data.to_json_obj(),
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "AiralogyRecord":
        return AiralogyRecord(
            airalogy_record_id=obj["airalogy_record_id"],
            record_id=obj["record_id"],
            record_version=obj["record_version"],
            metadata=RecordMetadata.from_json_obj(obj["metadata"]),
            data=RecordData.from_json_obj(obj["data"]),
        )


def canonicalize(data: RecordData | dict) -> bytes:
    """Canonical JSON bytes of a data block; equal values give equal bytes."""
    obj = data.to_json_obj() if isinstance(data, RecordData) else data
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def compute_sha1(data: RecordData | dict) -> str:
    return hashlib.sha1(canonicalize(data)).hexdigest()


def verify_integrity(record: AiralogyRecord) -> bool:
    return compute_sha1(record.data) == record.metadata.sha1


def _check_timestamp(value: str) -> None:
    import datetime as _dt

    if not _OFFSET_RE.search(value):
        raise ValueError(f"timestamp {value!r} must carry a UTC offset")
    try:
        _dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError as e:
        raise ValueError(f"bad timestamp {value!r}: {e}") from e


def _parse_ts(value: str):
    import datetime as _dt

    return _dt.datetime.fromisoformat(value.replace("Z", "+00:00"))


class RecordStore:
    """Append-only store: one JSON file per record version under records/."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.records_dir = self.root / "records"
        self.drafts_dir = self.root / "drafts"
        self.records_dir.mkdir(parents=True, exist_ok=True)
        self.drafts_dir.mkdir(parents=True, exist_ok=True)
        self._counters_path = self.root / "counters.json"
        self._lock = threading.RLock()
        self._index: dict[str, list[int]] = {}  # record uuid -> sorted versions
        self._refresh_index()

    # ------------------------------------------------------------- internals

    def _refresh_index(self) -> None:
        self._index.clear()
        for path in self.records_dir.glob("airalogy.id.record.*.json"):
            try:
                rid, version = parse_record_id(path.stem)
            except ValueError:
                continue
            self._index.setdefault(rid, []).append(version)
        for versions in self._index.values():
            versions.sort()

    def _load_counters(self) -> dict:
        if self._counters_path.exists():
            return json.loads(self._counters_path.read_text("utf-8"))
        return {}

    def _store_counters(self, counters: dict) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix="counters.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(counters, f, indent=2, sort_keys=True)
            os.replace(tmp, self._counters_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _next_record_num(self, ref: ProtocolRef) -> int:
        key = f"{ref.lab_id}/{ref.project_id}/{ref.protocol_id}"
        counters = self._load_counters()
        counters[key] = counters.get(key, 0) + 1
        self._store_counters(counters)
        return counters[key]

    def _record_path(self, airalogy_record_id: str) -> Path:
        return self.records_dir / f"{airalogy_record_id}.json"

    def _write_record(self, record: AiralogyRecord) -> None:
        path = self._record_path(record.airalogy_record_id)
        if path.exists():
            raise FileExistsError(f"record file already exists: {path.name}")
        body = json.dumps(record.to_json_obj(), indent=2, ensure_ascii=False) + "\n"
        fd, tmp = tempfile.mkstemp(dir=self.records_dir, prefix=".tmp.", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(body)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self._index.setdefault(record.record_id, []).append(record.record_version)
        self._index[record.record_id].sort()

    @staticmethod
    def _validate(schema: FieldSchemaDoc | None, data: RecordData) -> None:
        if schema is None:
            return
        violations = validate_record_data(schema, data.var)
        if violations:
            raise RecordValidationError(violations)

    # ------------------------------------------------------------------- api

    def submit_record(
        self,
        protocol_ref: ProtocolRef | str,
        data: RecordData,
        user_id: str,
        time: str,
        schema: FieldSchemaDoc | None = None,
    ) -> AiralogyRecord:
        """Persist a fresh version-1 record and bump the protocol's counter."""
        ref = parse_protocol_id(protocol_ref) if isinstance(protocol_ref, str) else protocol_ref
        _check_timestamp(time)
        self._validate(schema, data)
        with self._lock:
            record_uuid = str(uuid.uuid4())
            record = AiralogyRecord(
                airalogy_record_id=record_id_string(record_uuid, 1),
                record_id=record_uuid,
                record_version=1,
                metadata=RecordMetadata(
                    airalogy_protocol_id=ref.airalogy_protocol_id,
                    lab_id=ref.lab_id,
                    project_id=ref.project_id,
                    protocol_id=ref.protocol_id,
                    protocol_version=ref.protocol_version,
                    record_num=self._next_record_num(ref),
                    record_current_version_submission_time=time,
                    record_current_version_submission_user_id=user_id,
                    record_initial_version_submission_time=time,
                    record_initial_version_submission_user_id=user_id,
                    sha1=compute_sha1(data),
                ),
                data=data,
            )
            self._write_record(record)
            return record

    def revise_record(
        self,
        record_id: str,
        new_data: RecordData,
        user_id: str,
        time: str,
        schema: FieldSchemaDoc | None = None,
    ) -> AiralogyRecord:
        """Append the next version; earlier versions stay byte-identical."""
        _check_timestamp(time)
        self._validate(schema, new_data)
        with self._lock:
            rid = record_id
            if record_id.startswith("airalogy.id.record."):
                rid, _ = parse_record_id(record_id)
            latest = self.get_record(rid)
            base = self.get_record(record_id_string(latest.record_id, 1))
            if _parse_ts(time) <= _parse_ts(
                latest.metadata.record_current_version_submission_time
            ):
                raise ValueError(
                    "revision time must be after the previous version's submission time"
                )
            version = latest.record_version + 1
            record = AiralogyRecord(
                airalogy_record_id=record_id_string(latest.record_id, version),
                record_id=latest.record_id,
                record_version=version,
                metadata=RecordMetadata(
                    airalogy_protocol_id=latest.metadata.airalogy_protocol_id,
                    lab_id=latest.metadata.lab_id,
                    project_id=latest.metadata.project_id,
                    protocol_id=latest.metadata.protocol_id,
                    protocol_version=latest.metadata.protocol_version,
                    record_num=latest.metadata.record_num,
                    record_current_version_submission_time=time,
                    record_current_version_submission_user_id=user_id,
                    record_initial_version_submission_time=base.metadata.record_initial_version_submission_time,
                    record_initial_version_submission_user_id=base.metadata.record_initial_version_submission_user_id,
                    sha1=compute_sha1(new_data),
                ),
                data=new_data,
            )
            self._write_record(record)
            return record

    def get_record(self, record_id: str) -> AiralogyRecord:
        """Fetch by versioned id, or by bare uuid meaning the latest version."""
        arid = record_id
        if not record_id.startswith("airalogy.id.record."):
            versions = self._index.get(record_id)
            if not versions:
                raise RecordNotFound(record_id)
            arid = record_id_string(record_id, versions[-1])
        path = self._record_path(arid)
        if not path.exists():
            raise RecordNotFound(arid)
        return AiralogyRecord.from_json_obj(json.loads(path.read_text("utf-8")))

    def get_record_bytes(self, airalogy_record_id: str) -> bytes:
        path = self._record_path(airalogy_record_id)
        if not path.exists():
            raise RecordNotFound(airalogy_record_id)
        return path.read_bytes()

    def list_records(
        self,
        protocol_id: str | None = None,
        lab_id: str | None = None,
        project_id: str | None = None,
    ) -> list[AiralogyRecord]:
        """All stored versions, ordered by record_num then version."""
        out = []
        for rid, versions in self._index.items():
            for v in versions:
                record = self.get_record(record_id_string(rid, v))
                m = record.metadata
                if protocol_id is not None and m.protocol_id != protocol_id:
                    continue
                if lab_id is not None and m.lab_id != lab_id:
                    continue
                if project_id is not None and m.project_id != project_id:
                    continue
                out.append(record)
        out.sort(key=lambda r: (r.metadata.record_num, r.record_version, r.record_id))
        return out

    def versions_of(self, record_id: str) -> list[int]:
        return list(self._index.get(record_id, []))
