"""Protocol engine: markdown templates, typed fields, computed assignments,
versioned records, recording sessions, static reports, and workflow automation."""

from .aimd import FieldDecl, ProtocolDoc, number_steps, parse_aimd, validate_ids
from .assigner import (
    AssignerSpec,
    DependencyGraph,
    GraphError,
    build_graph,
    load_assigners,
    propagate,
    trigger_manual,
)
from .diagnostics import Diagnostic
from .ids import ProtocolRef, parse_record_id, record_id_string
from .model import (
    FieldSchemaDoc,
    FieldSpec,
    Violation,
    bind,
    emit_json_schema,
    load_model,
    validate_record_data,
    validate_value,
)
from .protocol import BoundProtocol, ProtocolRegistry, load_protocol_dir
from .records import (
    AiralogyRecord,
    RecordData,
    RecordStore,
    StepCheckData,
    canonicalize,
    compute_sha1,
    verify_integrity,
)
from .report import ReportDoc, render_report
from .session import (
    DraftSession,
    apply_ops,
    final_response,
    open_session,
    set_field,
    submit,
)
from .workflow import (
    RunRecorder,
    WorkflowDef,
    parse_workflow,
    run_aira,
    validate_path,
)

__version__ = "0.1.0"

__all__ = [
    "AiralogyRecord",
    "AssignerSpec",
    "BoundProtocol",
    "DependencyGraph",
    "Diagnostic",
    "DraftSession",
    "FieldDecl",
    "FieldSchemaDoc",
    "FieldSpec",
    "GraphError",
    "ProtocolDoc",
    "ProtocolRef",
    "ProtocolRegistry",
    "RecordData",
    "RecordStore",
    "ReportDoc",
    "RunRecorder",
    "StepCheckData",
    "Violation",
    "WorkflowDef",
    "apply_ops",
    "bind",
    "build_graph",
    "canonicalize",
    "compute_sha1",
    "emit_json_schema",
    "final_response",
    "load_assigners",
    "load_model",
    "load_protocol_dir",
    "number_steps",
    "open_session",
    "parse_aimd",
    "parse_record_id",
    "parse_workflow",
    "propagate",
    "record_id_string",
    "render_report",
    "run_aira",
    "set_field",
    "submit",
    "trigger_manual",
    "validate_ids",
    "validate_path",
    "validate_record_data",
    "validate_value",
    "verify_integrity",
]
