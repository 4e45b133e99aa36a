"""Parser for template-extended markdown protocol documents.

The source is ordinary CommonMark plus three inline templates:

    {{var|field_id}}
    {{step|step_id, level}}            level >= 1
    {{step|step_id, level, check}}     step with a pass/fail state
    {{check|checkpoint_id}}

plus fenced code blocks tagged ``workflow`` whose raw content is collected
verbatim. Prose is left untouched; the parser never raises on any UTF-8
input, reporting problems as diagnostics with byte spans instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .diagnostics import Diagnostic, error
from .ids import FIELD_ID_RE

VAR = "var"
STEP = "step"
CHECK = "check"
KINDS = (VAR, STEP, CHECK)

_FENCE_RE = re.compile(rb"^ {0,3}(`{3,}|~{3,})(.*)$")
_HEAD_RE = re.compile(rb"^([a-z]+) *\| *(.*)$", re.DOTALL)
_STEP_REST_RE = re.compile(rb"^([^\s,|]+) *, *([^\s,|]+)( *, *([^\s,|]+))?$")
_BARE_ID_RE = re.compile(rb"^[^\s,|]+$")


@dataclass(frozen=True)
class FieldDecl:
    """One template occurrence; (start, end) are byte offsets into the source."""

    kind: str
    id: str
    start: int
    end: int
    step_level: int | None = None
    check_mode: bool = False

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def template_text(self) -> str:
        """Canonical template spelling for this declaration."""
        if self.kind == STEP:
            flag = ", check" if self.check_mode else ""
            return f"{{{{step|{self.id}, {self.step_level}{flag}}}}}"
        return f"{{{{{self.kind}|{self.id}}}}}"


@dataclass
class ProtocolDoc:
    source: str
    decls: list[FieldDecl] = field(default_factory=list)
    workflow_blocks: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def ids(self, kind: str | None = None) -> list[str]:
        return [d.id for d in self.decls if kind is None or d.kind == kind]

    def var_ids(self) -> list[str]:
        return self.ids(VAR)

    def decl(self, field_id: str) -> FieldDecl | None:
        for d in self.decls:
            if d.id == field_id:
                return d
        return None


@dataclass
class StepNumbering:
    labels: dict[str, str] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)


def parse_aimd(source: str) -> ProtocolDoc:
    """Parse a document; total over all UTF-8 input, diagnostics over raised errors."""
    data = source.encode("utf-8")
    doc = ProtocolDoc(source=source)
    seen: set[str] = set()

    fence_char = b""
    fence_len = 0
    fence_is_workflow = False
    fence_content_start = 0

    pos = 0
    n = len(data)
    while pos < n:
        eol = data.find(b"\n", pos)
        end = n if eol == -1 else eol
        line = data[pos:end]
        stripped = line.rstrip(b"\r")
        fm = _FENCE_RE.match(stripped)

        if fence_char:
            if (
                fm
                and fm.group(1)[:1] == fence_char
                and len(fm.group(1)) >= fence_len
                and not fm.group(2).strip()
            ):
                if fence_is_workflow:
                    doc.workflow_blocks.append(
                        data[fence_content_start:pos].decode("utf-8")
                    )
                fence_char = b""
        elif fm and _is_open_fence(fm):
            fence_char = fm.group(1)[:1]
            fence_len = len(fm.group(1))
            info = fm.group(2).strip()
            fence_is_workflow = info.split()[:1] == [b"workflow"]
            fence_content_start = end + 1 if eol != -1 else n
        else:
            _scan_line(data, line, pos, doc, seen)

        if eol == -1:
            break
        pos = eol + 1

    # unclosed fence runs to end of input, CommonMark style
    if fence_char and fence_is_workflow:
        doc.workflow_blocks.append(data[fence_content_start:n].decode("utf-8"))
    return doc


def _is_open_fence(fm: re.Match) -> bool:
    # backtick fences may not carry backticks in the info string
    return not (fm.group(1)[:1] == b"`" and b"`" in fm.group(2))


def _scan_line(data: bytes, line: bytes, base: int, doc: ProtocolDoc, seen: set[str]) -> None:
    i = 0
    while True:
        o = line.find(b"{{", i)
        if o == -1:
            return
        c = line.find(b"}}", o + 2)
        if c == -1:
            doc.diagnostics.append(
                error(
                    "unterminated template: missing '}}' before end of line",
                    base + o,
                    base + len(line),
                    rule="unterminated",
                )
            )
            return
        _read_template(line[o + 2 : c], base + o, base + c + 2, doc, seen)
        i = c + 2


def _read_template(inner: bytes, start: int, end: int, doc: ProtocolDoc, seen: set[str]) -> None:
    def err(message: str, rule: str) -> None:
        doc.diagnostics.append(error(message, start, end, rule=rule))

    shown = inner.decode("utf-8", errors="replace")
    head = _HEAD_RE.match(inner)
    if not head:
        err(f"malformed template {{{{{shown}}}}}: expected kind|id", "malformed")
        return
    kind = head.group(1).decode()
    rest = head.group(2)

    if kind not in KINDS:
        err(f"unknown template kind {kind!r}", "unknown_kind")
        return

    step_level: int | None = None
    check_mode = False
    if kind == STEP:
        m = _STEP_REST_RE.match(rest)
        if not m:
            err(f"malformed step template {{{{{shown}}}}}: expected step|id, level", "malformed")
            return
        raw_id, raw_level, raw_flag = m.group(1), m.group(2), m.group(4)
        if not raw_level.isdigit() or int(raw_level) < 1:
            err(
                f"step level must be an integer >= 1, got {raw_level.decode('utf-8', 'replace')!r}",
                "bad_level",
            )
            return
        step_level = int(raw_level)
        if raw_flag is not None:
            if raw_flag != b"check":
                err(
                    f"unknown step flag {raw_flag.decode('utf-8', 'replace')!r}, only 'check' is allowed",
                    "malformed",
                )
                return
            check_mode = True
    else:
        if not _BARE_ID_RE.match(rest):
            err(f"malformed template {{{{{shown}}}}}: expected {kind}|id", "malformed")
            return
        raw_id = rest

    try:
        field_id = raw_id.decode("utf-8")
    except UnicodeDecodeError:
        field_id = raw_id.decode("utf-8", errors="replace")
    if not FIELD_ID_RE.match(field_id):
        err(f"field id {field_id!r} is not snake_case", "bad_id")
        return
    if field_id in seen:
        err(f"duplicate field id {field_id!r}", "duplicate_id")
        return

    seen.add(field_id)
    doc.decls.append(
        FieldDecl(
            kind=kind,
            id=field_id,
            start=start,
            end=end,
            step_level=step_level,
            check_mode=check_mode,
        )
    )


def validate_ids(doc: ProtocolDoc) -> list[Diagnostic]:
    """Id diagnostics only: empty iff every id is snake_case and unique.

    Pure in doc, so repeated calls return the same list. Docs built by
    parse_aimd already carry these diagnostics; hand-built docs are
    checked from scratch.
    """
    out: list[Diagnostic] = []
    keys: set[tuple] = set()

    def add(d: Diagnostic) -> None:
        key = (d.rule, d.message, d.start, d.end)
        if key not in keys:
            keys.add(key)
            out.append(d)

    for d in doc.diagnostics:
        if d.rule in ("bad_id", "duplicate_id"):
            add(d)
    seen: set[str] = set()
    for decl in doc.decls:
        if not FIELD_ID_RE.match(decl.id):
            add(error(f"field id {decl.id!r} is not snake_case", *decl.span, rule="bad_id"))
        if decl.id in seen:
            add(error(f"duplicate field id {decl.id!r}", *decl.span, rule="duplicate_id"))
        seen.add(decl.id)
    return out


def number_steps(doc: ProtocolDoc) -> StepNumbering:
    """Counter-stack numbering: level-1 steps count "1", "2", ...; a deeper
    step appends ".k" under its nearest shallower predecessor."""
    numbering = StepNumbering()
    stack: list[int] = []
    for d in doc.decls:
        if d.kind != STEP:
            continue
        level = d.step_level or 1
        if level > len(stack) + 1:
            numbering.diagnostics.append(
                error(
                    f"step {d.id!r} has level {level} but no preceding level {level - 1} step",
                    *d.span,
                    rule="level_jump",
                )
            )
            continue
        if level == len(stack) + 1:
            stack.append(1)
        else:
            del stack[level:]
            stack[level - 1] += 1
        numbering.labels[d.id] = ".".join(str(c) for c in stack)
    return numbering


def extract_workflow_blocks(doc: ProtocolDoc) -> list[str]:
    return list(doc.workflow_blocks)
