"""Protocol packaging: directory layout, identity, and a loaded-protocol registry.

A protocol directory holds:

    protocol.aimd      required markdown with field templates
    model.toml         optional typed field model
    assigners.toml     optional assigner rules
    protocol.toml      optional identity and descriptive metadata

`protocol.toml` carries an `[airalogy_protocol]` table (id, version, name,
authors, and optionally lab_id / project_id). Loading binds all four
artifacts together and reports every problem as diagnostics instead of
stopping at the first.
"""

from __future__ import annotations

import io
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from . import aimd, assigner, model, workflow
from .diagnostics import Diagnostic, error, has_errors, warning
from .ids import ProtocolRef

AIMD_NAME = "protocol.aimd"
MODEL_NAME = "model.toml"
ASSIGNERS_NAME = "assigners.toml"
INFO_NAME = "protocol.toml"


@dataclass
class ProtocolInfo:
    id: str = ""
    version: str = "1.0.0"
    name: str = ""
    authors: list = field(default_factory=list)
    lab_id: str | None = None
    project_id: str | None = None
    description: str = ""


@dataclass
class BoundProtocol:
    """Everything needed to record against one protocol version."""

    ref: ProtocolRef
    doc: aimd.ProtocolDoc
    schema: model.FieldSchemaDoc
    graph: assigner.DependencyGraph
    numbering: aimd.StepNumbering
    info: ProtocolInfo
    workflow_def: workflow.WorkflowDef | None = None
    aimd_text: str = ""
    model_text: str | None = None
    assigner_text: str | None = None

    def json_schema(self) -> dict:
        return model.emit_json_schema(self.schema)

    def layout(self) -> list[dict]:
        """Document-order field list for form rendering."""
        out = []
        for decl in self.doc.decls:
            entry = {"kind": decl.kind, "id": decl.id}
            if decl.kind == aimd.STEP:
                entry["level"] = decl.step_level
                entry["label"] = self.numbering.labels.get(decl.id, "")
                entry["check_mode"] = decl.check_mode
            out.append(entry)
        return out


def parse_info(text: str) -> ProtocolInfo:
    raw = tomli.loads(text)
    table = raw.get("airalogy_protocol", {})
    return ProtocolInfo(
        id=str(table.get("id", "")),
        version=str(table.get("version", "1.0.0")),
        name=str(table.get("name", "")),
        authors=list(table.get("authors", [])),
        lab_id=table.get("lab_id"),
        project_id=table.get("project_id"),
        description=str(table.get("description", "")),
    )


def load_protocol_dir(
    path: str | Path,
    default_lab: str = "demo_lab",
    default_project: str = "demo_project",
    plugins: dict | None = None,
) -> tuple[BoundProtocol, list[Diagnostic]]:
    """Load and bind a protocol directory.

    I/O problems raise OSError; content problems come back as diagnostics
    alongside a best-effort BoundProtocol (error diagnostics mean the
    protocol is not usable for recording).
    """
    path = Path(path)
    aimd_path = path / AIMD_NAME
    if not aimd_path.is_file():
        raise FileNotFoundError(f"{path} has no {AIMD_NAME}")
    source = aimd_path.read_text("utf-8")

    diagnostics: list[Diagnostic] = []
    doc = aimd.parse_aimd(source)
    diagnostics.extend(doc.diagnostics)
    numbering = aimd.number_steps(doc)
    diagnostics.extend(numbering.diagnostics)

    model_text = None
    schema_doc = None
    model_path = path / MODEL_NAME
    if model_path.is_file():
        model_text = model_path.read_text("utf-8")
        try:
            schema_doc = model.load_model(model_text)
        except model.ModelError as e:
            diagnostics.append(error(str(e), rule="model"))
    try:
        bound_schema = model.bind(schema_doc, doc)
    except model.BindError as e:
        diagnostics.extend(e.diagnostics)
        bound_schema = model.bind(None, doc)

    assigner_text = None
    graph = assigner.DependencyGraph(
        nodes=set(doc.var_ids()), specs={}, owner={}, topo_order=[]
    )
    assigners_path = path / ASSIGNERS_NAME
    if assigners_path.is_file():
        assigner_text = assigners_path.read_text("utf-8")
        try:
            specs = assigner.load_assigners(assigner_text)
            graph = assigner.build_graph(specs, set(doc.var_ids()), plugins)
            diagnostics.extend(graph.warnings)
        except assigner.AssignerLoadError as e:
            diagnostics.append(error(str(e), rule="assigner"))
        except assigner.GraphError as e:
            diagnostics.extend(e.diagnostics)

    info = ProtocolInfo()
    info_path = path / INFO_NAME
    if info_path.is_file():
        try:
            info = parse_info(info_path.read_text("utf-8"))
        except tomli.TOMLDecodeError as e:
            diagnostics.append(error(f"bad {INFO_NAME}: {e}", rule="info"))
    if not info.id:
        info.id = path.resolve().name.replace("-", "_")
        diagnostics.append(
            warning(
                f"{INFO_NAME} gives no protocol id; using directory name {info.id!r}",
                rule="info",
            )
        )

    workflow_def = None
    if doc.workflow_blocks:
        try:
            workflow_def = workflow.parse_workflow(doc.workflow_blocks[0])
        except workflow.WorkflowError as e:
            diagnostics.append(error(str(e), rule="workflow"))

    ref = ProtocolRef(
        lab_id=info.lab_id or default_lab,
        project_id=info.project_id or default_project,
        protocol_id=info.id,
        protocol_version=info.version,
    )
    bound = BoundProtocol(
        ref=ref,
        doc=doc,
        schema=bound_schema,
        graph=graph,
        numbering=numbering,
        info=info,
        workflow_def=workflow_def,
        aimd_text=source,
        model_text=model_text,
        assigner_text=assigner_text,
    )
    return bound, diagnostics


def zip_protocol_dir(path: str | Path) -> bytes:
    """Pack a protocol directory into zip bytes (upload format)."""
    path = Path(path)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in (AIMD_NAME, MODEL_NAME, ASSIGNERS_NAME, INFO_NAME):
            member = path / name
            if member.is_file():
                zf.write(member, name)
    return buf.getvalue()


def unzip_protocol(data: bytes, dest: str | Path) -> Path:
    """Extract an uploaded protocol zip; rejects entries escaping dest."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        for member in zf.namelist():
            target = (dest / member).resolve()
            if not str(target).startswith(str(dest.resolve())):
                raise ValueError(f"zip entry escapes target directory: {member!r}")
        zf.extractall(dest)
    return dest


class ProtocolRegistry:
    """Loaded protocols keyed by identity string and by bare protocol id."""

    def __init__(self, default_lab: str = "demo_lab", default_project: str = "demo_project",
                 plugins: dict | None = None):
        self.default_lab = default_lab
        self.default_project = default_project
        self.plugins = plugins or {}
        self._by_identity: dict[str, BoundProtocol] = {}

    def register_dir(self, path: str | Path) -> tuple[BoundProtocol, list[Diagnostic]]:
        bound, diagnostics = load_protocol_dir(
            path, self.default_lab, self.default_project, self.plugins
        )
        if not has_errors(diagnostics):
            self._by_identity[bound.ref.airalogy_protocol_id] = bound
        return bound, diagnostics

    def register(self, bound: BoundProtocol) -> None:
        self._by_identity[bound.ref.airalogy_protocol_id] = bound

    def get(self, key: str) -> BoundProtocol:
        """Lookup by full identity, or by bare protocol id (latest version)."""
        if key in self._by_identity:
            return self._by_identity[key]
        matches = [
            b for b in self._by_identity.values() if b.ref.protocol_id == key
        ]
        if not matches:
            raise KeyError(key)
        matches.sort(key=lambda b: _version_key(b.ref.protocol_version))
        return matches[-1]

    def lookup(self, protocol_id: str, version: str) -> dict:
        """Analysis-context hook: the static artifacts for one version."""
        for bound in self._by_identity.values():
            if bound.ref.protocol_id == protocol_id and bound.ref.protocol_version == version:
                return {
                    "markdown": bound.aimd_text,
                    "field_schema": bound.json_schema(),
                    "model_doc": bound.model_text,
                    "assigner_doc": bound.assigner_text,
                }
        raise KeyError(f"{protocol_id} v{version}")

    def identities(self) -> list[str]:
        return sorted(self._by_identity)


def _version_key(version: str) -> tuple:
    parts = []
    for piece in version.split("."):
        parts.append(int(piece) if piece.isdigit() else 0)
    return tuple(parts)
