"""Static record reports from three inputs: markdown, field schema, record.

Rendering never loads models or assigners and never evaluates expressions;
only the protocol markdown, the emitted JSON schema, and the stored record
JSON are consulted, so reports can be produced long after the protocol's
code has bit-rotted.
"""

from __future__ import annotations

import html as html_mod
import json
from dataclasses import dataclass, field

from markdown_it import MarkdownIt

from . import aimd
from .records import AiralogyRecord, StepCheckData

HTML = "html"
MARKDOWN = "markdown"

TO_BE_CHECKED = "To be checked"
CHECK_PASSED = "Check passed"
CHECK_FAILED = "Check failed"

_SENTINEL_OPEN = ""
_SENTINEL_CLOSE = ""

_STYLE = """
body { font-family: sans-serif; max-width: 48rem; margin: 2rem auto; }
.af-meta { border: 1px solid #ccc; padding: 0.5rem 1rem; margin-bottom: 1rem; }
.af-meta dt { font-weight: bold; }
.af-var { background: #eef; padding: 0 0.2rem; border-radius: 2px; }
.af-var.af-empty::after { content: "(empty)"; color: #999; }
.af-step { font-weight: bold; }
.af-check { background: #efe; padding: 0 0.2rem; border-radius: 2px; }
.af-check.af-failed { background: #fee; }
.af-error { background: #fdd; color: #900; padding: 0 0.2rem; }
.af-note { color: #666; font-style: italic; }
table { border-collapse: collapse; }
td, th { border: 1px solid #999; padding: 0.2rem 0.5rem; }
""".strip()


class ReportError(ValueError):
    pass


@dataclass
class ReportDoc:
    format: str
    body: str
    warnings: list = field(default_factory=list)


def check_label(checked: bool | None) -> str:
    if checked is None:
        return TO_BE_CHECKED
    return CHECK_PASSED if checked else CHECK_FAILED


def format_number(value: object) -> str:
    """Shortest exact display: integral floats drop the trailing .0."""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return repr(value)


def _schema_entry(field_schema: dict, field_id: str) -> dict:
    return (field_schema or {}).get("properties", {}).get(field_id, {})


def render_field(value: object, schema_entry: dict, fmt: str) -> str:
    """Read-only widget snippet for one value; mismatches render inline errors."""
    entry = schema_entry or {}
    kind = entry.get("type", "string")
    fw = entry.get("format", "")
    esc = (lambda s: html_mod.escape(str(s), quote=False)) if fmt == HTML else str

    if value is None:
        return ""
    if isinstance(value, bool):
        if kind not in ("boolean", "string"):
            return _mismatch(value, kind, fmt)
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        if kind not in ("number", "integer", "string"):
            return _mismatch(value, kind, fmt)
        return format_number(value)
    if isinstance(value, str):
        if kind != "string":
            return _mismatch(value, kind, fmt)
        if fw.startswith("af-file:"):
            name = esc(value)
            if fmt == HTML:
                return f'<a class="af-file af-file-{esc(fw[8:])}" href="{html_mod.escape(value)}">{name}</a>'
            return f"[{name}]({value})"
        if fw == "af-record-ref":
            return f"<code>{esc(value)}</code>" if fmt == HTML else f"`{value}`"
        return esc(value)
    if isinstance(value, list):
        if kind != "array":
            return _mismatch(value, kind, fmt)
        items = entry.get("items", {})
        if items.get("type") == "object" and value and isinstance(value[0], dict):
            return _render_table(value, items, fmt)
        parts = [render_field(v, items, fmt) for v in value]
        if fmt == HTML:
            return "<ul>" + "".join(f"<li>{p}</li>" for p in parts) + "</ul>"
        return "; ".join(parts)
    return _mismatch(value, kind, fmt)


def _mismatch(value: object, kind: str, fmt: str) -> str:
    shown = json.dumps(value, ensure_ascii=False, sort_keys=True)
    if fmt == HTML:
        return (
            f'<span class="af-error">value {html_mod.escape(shown, quote=False)} '
            f"does not fit type {html_mod.escape(kind, quote=False)}</span>"
        )
    return f"[value {shown} does not fit type {kind}]"


def _render_table(rows: list, items_entry: dict, fmt: str) -> str:
    columns = list(items_entry.get("properties", {}))
    if not columns and rows:
        columns = list(rows[0])
    cells = items_entry.get("properties", {})
    if fmt == HTML:
        head = "".join(f"<th>{html_mod.escape(c, quote=False)}</th>" for c in columns)
        body_rows = []
        for row in rows:
            tds = "".join(
                f"<td>{render_field(row.get(c), cells.get(c, {}), fmt)}</td>"
                for c in columns
            )
            body_rows.append(f"<tr>{tds}</tr>")
        return f"<table><thead><tr>{head}</tr></thead><tbody>{''.join(body_rows)}</tbody></table>"
    lines = ["| " + " | ".join(columns) + " |", "| " + " | ".join("---" for _ in columns) + " |"]
    for row in rows:
        lines.append(
            "| "
            + " | ".join(render_field(row.get(c), cells.get(c, {}), fmt) for c in columns)
            + " |"
        )
    return "\n".join(lines)


def _state_snippet(state: StepCheckData, fmt: str, css: str) -> str:
    label = check_label(state.checked)
    note = state.annotation
    if fmt == HTML:
        failed = " af-failed" if state.checked is False else ""
        out = f'<span class="{css}{failed}">{html_mod.escape(label, quote=False)}</span>'
        if note:
            out += f' <span class="af-note">{html_mod.escape(note, quote=False)}</span>'
        return out
    out = f"[{label}]"
    if note:
        out += f" *{note}*"
    return out


def render_report(
    aimd_text: str,
    field_schema: dict,
    record: AiralogyRecord,
    fmt: str = HTML,
) -> ReportDoc:
    """Inject record values into the protocol text; see module docstring."""
    if fmt not in (HTML, MARKDOWN):
        raise ReportError(f"unknown format: {fmt!r}")
    doc = aimd.parse_aimd(aimd_text)
    numbering = aimd.number_steps(doc)
    warnings: list[str] = []

    declared = {
        aimd.VAR: {d.id for d in doc.decls if d.kind == aimd.VAR},
        aimd.STEP: {d.id for d in doc.decls if d.kind == aimd.STEP},
        aimd.CHECK: {d.id for d in doc.decls if d.kind == aimd.CHECK},
    }
    stray = sorted(
        [f"var {k}" for k in record.data.var if k not in declared[aimd.VAR]]
        + [f"step {k}" for k in record.data.step if k not in declared[aimd.STEP]]
        + [f"check {k}" for k in record.data.check if k not in declared[aimd.CHECK]]
    )
    if stray:
        raise ReportError("record ids missing from the protocol text: " + ", ".join(stray))

    snippets: list[str] = []
    for decl in doc.decls:
        if decl.kind == aimd.VAR:
            if decl.id not in record.data.var:
                warnings.append(f"no value recorded for var {decl.id}")
                value = None
            else:
                value = record.data.var[decl.id]
            rendered = render_field(value, _schema_entry(field_schema, decl.id), fmt)
            if fmt == HTML:
                empty = " af-empty" if rendered == "" else ""
                snippets.append(
                    f'<span class="af-var{empty}" data-field="{html_mod.escape(decl.id)}">{rendered}</span>'
                )
            else:
                snippets.append(rendered)
        elif decl.kind == aimd.STEP:
            label = numbering.labels.get(decl.id, "")
            state = record.data.step.get(decl.id)
            if state is None:
                warnings.append(f"no state recorded for step {decl.id}")
                state = StepCheckData()
            if fmt == HTML:
                out = f'<span class="af-step" data-field="{html_mod.escape(decl.id)}">{label}.</span>'
            else:
                out = f"**{label}.**"
            if decl.check_mode:
                out += " " + _state_snippet(state, fmt, "af-check")
            elif state.annotation:
                if fmt == HTML:
                    out += f' <span class="af-note">{html_mod.escape(state.annotation, quote=False)}</span>'
                else:
                    out += f" *{state.annotation}*"
            snippets.append(out)
        else:
            state = record.data.check.get(decl.id)
            if state is None:
                warnings.append(f"no state recorded for check {decl.id}")
                state = StepCheckData()
            out = _state_snippet(state, fmt, "af-check")
            if fmt == HTML:
                out = f'<span data-field="{html_mod.escape(decl.id)}">{out}</span>'
            snippets.append(out)

    if fmt == MARKDOWN:
        body = _splice(aimd_text, doc, snippets)
        return ReportDoc(MARKDOWN, _markdown_header(record) + body, warnings)

    placeholders = [f"{_SENTINEL_OPEN}{i}{_SENTINEL_CLOSE}" for i in range(len(snippets))]
    marked = _splice(aimd_text, doc, placeholders)
    rendered = MarkdownIt("commonmark").render(marked)
    for i, snippet in enumerate(snippets):
        rendered = rendered.replace(placeholders[i], snippet)
    page = (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        f"<style>\n{_STYLE}\n</style>\n</head>\n<body>\n"
        f"{_html_header(record)}\n{rendered}</body>\n</html>\n"
    )
    return ReportDoc(HTML, page, warnings)


def _splice(source: str, doc: aimd.ProtocolDoc, replacements: list[str]) -> str:
    """Swap every template span (byte offsets) for its replacement text."""
    data = source.encode("utf-8")
    parts: list[bytes] = []
    cursor = 0
    for decl, repl in zip(doc.decls, replacements):
        parts.append(data[cursor:decl.start])
        parts.append(repl.encode("utf-8"))
        cursor = decl.end
    parts.append(data[cursor:])
    return b"".join(parts).decode("utf-8")


_META_FIELDS = (
    ("Record", "airalogy_record_id"),
    ("Record number", "record_num"),
    ("Protocol", "airalogy_protocol_id"),
    ("Recorded by", "record_current_version_submission_user_id"),
    ("Recorded at", "record_current_version_submission_time"),
    ("First recorded by", "record_initial_version_submission_user_id"),
    ("First recorded at", "record_initial_version_submission_time"),
    ("Data SHA-1", "sha1"),
)


def _meta_values(record: AiralogyRecord) -> dict:
    meta = record.metadata.to_json_obj()
    meta["airalogy_record_id"] = record.airalogy_record_id
    return meta


def _html_header(record: AiralogyRecord) -> str:
    meta = _meta_values(record)
    rows = "".join(
        f"<dt>{html_mod.escape(label, quote=False)}</dt>"
        f"<dd>{html_mod.escape(str(meta[key]), quote=False)}</dd>"
        for label, key in _META_FIELDS
    )
    return f'<header class="af-meta"><dl>{rows}</dl></header>'


def _markdown_header(record: AiralogyRecord) -> str:
    meta = _meta_values(record)
    lines = [f"> {label}: {meta[key]}" for label, key in _META_FIELDS]
    return "\n".join(lines) + "\n\n"
