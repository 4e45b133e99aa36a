"""Declarative typed schema for variable fields.

A model document (`model.toml`) declares one `[[var]]` table per field and
optional `[[validator]]` tables for cross-field rules:

    [[var]]
    id = "solvent_volume"
    type = "number"
    gt = 0.0

    [[validator]]
    id = "a_plus_b_lt_10"
    predicate = "a + b < 10"
    message = "a + b must less than 10"

Types: text, integer, number, boolean, date, datetime, enum (with options),
list (with element), table (with columns), file:<kind>, record_ref,
record_ref:multi. The module also emits the JSON-Schema document that
drives the recording form and record validation.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass, field, replace

import tomli

from . import aimd
from .diagnostics import Diagnostic, error
from .expr import (
    EvalError,
    ExprSyntaxError,
    eval_expression,
    field_refs,
    parse_expression,
)
from .ids import FIELD_ID_RE, is_record_id

FILE_KINDS = ("image", "video", "audio", "pdf", "csv", "generic")
_SCALAR_TYPES = ("text", "integer", "number", "boolean", "date", "datetime")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
DYNAMIC_DEFAULTS = ("$current_user", "$now")


class ModelError(ValueError):
    """Raised when a model document cannot be loaded."""


class BindError(ValueError):
    """Raised when a model names variables the markdown never declares."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class FieldType:
    name: str
    options: tuple[str, ...] = ()
    element: "FieldType | None" = None
    columns: tuple[tuple[str, "FieldType"], ...] = ()
    file_kind: str = ""
    multi: bool = False

    def describe(self) -> str:
        if self.name == "enum":
            return "enum(" + ", ".join(self.options) + ")"
        if self.name == "list":
            return f"list[{self.element.describe()}]"
        if self.name == "table":
            cols = ", ".join(f"{cid}: {ct.describe()}" for cid, ct in self.columns)
            return f"table[{cols}]"
        if self.name == "file":
            return f"file:{self.file_kind}"
        if self.name == "record_ref" and self.multi:
            return "record_ref:multi"
        return self.name


TEXT = FieldType("text")


@dataclass(frozen=True)
class FieldConstraint:
    gt: float | None = None
    ge: float | None = None
    lt: float | None = None
    le: float | None = None
    min_length: int | None = None
    max_length: int | None = None
    pattern: str | None = None
    min_items: int | None = None
    max_items: int | None = None

    def is_empty(self) -> bool:
        return self == FieldConstraint()


@dataclass(frozen=True)
class FieldSpec:
    id: str
    type: FieldType = TEXT
    constraint: FieldConstraint = FieldConstraint()
    default: object = None
    required: bool = True

    @property
    def has_default(self) -> bool:
        return self.default is not None


@dataclass(frozen=True)
class CrossValidator:
    id: str
    predicate_text: str
    message: str
    predicate: object = None  # parsed expression AST

    def references(self) -> set[str]:
        return field_refs(self.predicate if self.predicate is not None else self.predicate_text)


@dataclass
class FieldSchemaDoc:
    vars: list[FieldSpec] = field(default_factory=list)
    validators: list[CrossValidator] = field(default_factory=list)
    title: str = "VarModel"

    def spec(self, field_id: str) -> FieldSpec | None:
        for s in self.vars:
            if s.id == field_id:
                return s
        return None

    def var_ids(self) -> list[str]:
        return [s.id for s in self.vars]


@dataclass(frozen=True)
class Violation:
    field_id: str
    rule: str
    message: str


# ------------------------------------------------------------------ loading


def _parse_type_string(s: str) -> FieldType:
    s = s.strip()
    if s in _SCALAR_TYPES:
        return FieldType(s)
    if s == "enum":
        return FieldType("enum")  # options supplied separately
    if s == "list":
        return FieldType("list")
    if s == "table":
        return FieldType("table")
    if s == "file" or s.startswith("file:"):
        kind = s[5:] if s.startswith("file:") else "generic"
        if kind not in FILE_KINDS:
            kind = "generic"
        return FieldType("file", file_kind=kind)
    if s == "record_ref":
        return FieldType("record_ref")
    if s == "record_ref:multi":
        return FieldType("record_ref", multi=True)
    m = re.match(r"^list\[(.+)\]$", s)
    if m:
        return FieldType("list", element=_parse_type_string(m.group(1)))
    m = re.match(r"^table\[(.+)\]$", s)
    if m:
        columns = []
        for part in m.group(1).split(","):
            if ":" not in part:
                raise ModelError(f"bad table column {part.strip()!r}, expected 'id: type'")
            cid, ctype = part.split(":", 1)
            cid = cid.strip()
            if not FIELD_ID_RE.match(cid):
                raise ModelError(f"table column id {cid!r} is not snake_case")
            columns.append((cid, _parse_type_string(ctype)))
        return FieldType("table", columns=tuple(columns))
    raise ModelError(f"unknown type {s!r}")


def _finish_type(base: FieldType, entry: dict) -> FieldType:
    """Fold the separate options/element/columns keys into the type."""
    if "options" in entry:
        if base.name != "enum":
            raise ModelError(f"options given for non-enum type {base.describe()!r}")
        options = tuple(str(o) for o in entry["options"])
        if not options or len(set(options)) != len(options):
            raise ModelError("enum options must be non-empty and distinct")
        base = replace(base, options=options)
    if "element" in entry:
        if base.name != "list":
            raise ModelError(f"element given for non-list type {base.describe()!r}")
        if base.element is not None:
            raise ModelError("element given twice (bracket form and key)")
        base = replace(base, element=_parse_type_string(str(entry["element"])))
    if "columns" in entry:
        if base.name != "table":
            raise ModelError(f"columns given for non-table type {base.describe()!r}")
        if base.columns:
            raise ModelError("columns given twice (bracket form and key)")
        columns = []
        for col in entry["columns"]:
            if isinstance(col, dict):
                cid, ctype = str(col.get("id", "")), str(col.get("type", "text"))
            elif isinstance(col, (list, tuple)) and len(col) == 2:
                cid, ctype = str(col[0]), str(col[1])
            else:
                raise ModelError(f"bad table column entry {col!r}")
            if not FIELD_ID_RE.match(cid):
                raise ModelError(f"table column id {cid!r} is not snake_case")
            columns.append((cid, _parse_type_string(ctype)))
        base = replace(base, columns=tuple(columns))
    if base.name == "enum" and not base.options:
        raise ModelError("enum type needs at least one option")
    if base.name == "list" and base.element is None:
        base = replace(base, element=TEXT)
    if base.name == "table" and not base.columns:
        raise ModelError("table type needs at least one column")
    return base


_CONSTRAINT_KEYS = (
    "gt", "ge", "lt", "le",
    "min_length", "max_length", "pattern",
    "min_items", "max_items",
)


def load_model(text: str) -> FieldSchemaDoc:
    """Parse a model document. Raises ModelError on any structural problem."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ModelError(f"model document is not valid TOML: {e}") from e

    doc = FieldSchemaDoc()
    seen: set[str] = set()
    for entry in raw.get("var", []):
        if "id" not in entry:
            raise ModelError("[[var]] entry without an id")
        fid = str(entry["id"])
        if not FIELD_ID_RE.match(fid):
            raise ModelError(f"var id {fid!r} is not snake_case")
        if fid in seen:
            raise ModelError(f"duplicate var id {fid!r}")
        seen.add(fid)

        ftype = _finish_type(_parse_type_string(str(entry.get("type", "text"))), entry)
        constraint = FieldConstraint(**{k: entry[k] for k in _CONSTRAINT_KEYS if k in entry})
        _check_constraint_shape(fid, ftype, constraint)
        _check_bounds(fid, constraint)
        if constraint.pattern is not None:
            try:
                re.compile(constraint.pattern)
            except re.error as e:
                raise ModelError(f"{fid}: bad pattern: {e}") from e

        spec = FieldSpec(
            id=fid,
            type=ftype,
            constraint=constraint,
            default=entry.get("default"),
            required=bool(entry.get("required", True)),
        )
        if spec.has_default and spec.default not in DYNAMIC_DEFAULTS:
            v = validate_value(spec, spec.default)
            if v is not None:
                raise ModelError(f"{fid}: default violates its own spec: {v.message}")
        doc.vars.append(spec)

    seen_validators: set[str] = set()
    for entry in raw.get("validator", []):
        for key in ("id", "predicate", "message"):
            if key not in entry:
                raise ModelError(f"[[validator]] entry without {key!r}")
        vid = str(entry["id"])
        if vid in seen_validators:
            raise ModelError(f"duplicate validator id {vid!r}")
        seen_validators.add(vid)
        try:
            ast = parse_expression(str(entry["predicate"]))
        except ExprSyntaxError as e:
            raise ModelError(f"validator {vid}: bad predicate: {e}") from e
        validator = CrossValidator(
            id=vid,
            predicate_text=str(entry["predicate"]),
            message=str(entry["message"]),
            predicate=ast,
        )
        unknown = validator.references() - seen
        if unknown:
            raise ModelError(
                f"validator {vid} references undeclared vars: {', '.join(sorted(unknown))}"
            )
        doc.validators.append(validator)

    if "title" in raw:
        doc.title = str(raw["title"])
    return doc


def _check_constraint_shape(fid: str, t: FieldType, c: FieldConstraint) -> None:
    numeric = t.name in ("integer", "number")
    sized = t.name in ("list", "table") or (t.name == "record_ref" and t.multi)
    for key in ("gt", "ge", "lt", "le"):
        v = getattr(c, key)
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelError(f"{fid}: {key} must be a number")
        if not numeric:
            raise ModelError(f"{fid}: {key} applies only to integer/number fields")
    for key in ("min_length", "max_length"):
        v = getattr(c, key)
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ModelError(f"{fid}: {key} must be a non-negative integer")
        if t.name != "text":
            raise ModelError(f"{fid}: {key} applies only to text fields")
    for key in ("min_items", "max_items"):
        v = getattr(c, key)
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ModelError(f"{fid}: {key} must be a non-negative integer")
        if not sized:
            raise ModelError(f"{fid}: {key} applies only to list-shaped fields")
    if c.pattern is not None and t.name != "text":
        raise ModelError(f"{fid}: pattern applies only to text fields")


def _check_bounds(fid: str, c: FieldConstraint) -> None:
    lo = c.gt if c.gt is not None else c.ge
    hi = c.lt if c.lt is not None else c.le
    if lo is not None and hi is not None and lo > hi:
        raise ModelError(f"{fid}: lower bound {lo} exceeds upper bound {hi}")
    if c.gt is not None and c.lt is not None and c.gt >= c.lt:
        raise ModelError(f"{fid}: gt {c.gt} must be below lt {c.lt}")
    for pair in (("min_length", "max_length"), ("min_items", "max_items")):
        lo_v, hi_v = getattr(c, pair[0]), getattr(c, pair[1])
        if lo_v is not None and hi_v is not None and lo_v > hi_v:
            raise ModelError(f"{fid}: {pair[0]} exceeds {pair[1]}")


def bind(schema: FieldSchemaDoc | None, doc: aimd.ProtocolDoc) -> FieldSchemaDoc:
    """Join a model with the markdown declarations.

    Vars the model does not mention become plain text fields (the
    markdown-only behavior where every value is a string). Model entries
    naming vars the markdown never declares raise BindError.
    """
    schema = schema or FieldSchemaDoc()
    declared = doc.var_ids()
    ghosts = [s.id for s in schema.vars if s.id not in declared]
    if ghosts:
        raise BindError(
            [
                error(f"model declares unknown var {g!r}", rule="ghost_var")
                for g in ghosts
            ]
        )
    by_id = {s.id: s for s in schema.vars}
    bound = FieldSchemaDoc(title=schema.title, validators=list(schema.validators))
    bound.vars = [by_id.get(fid, FieldSpec(id=fid)) for fid in declared]
    return bound


# --------------------------------------------------------------- validation


def validate_value(spec: FieldSpec, value: object) -> Violation | None:
    """Strict check of one value against one field spec; None means ok."""

    def bad(rule: str, message: str) -> Violation:
        return Violation(spec.id, rule, message)

    t = spec.type
    c = spec.constraint

    if t.name == "text":
        if not isinstance(value, str):
            return bad("type", f"{spec.id}: expected text, got {_type_name(value)}")
        return _check_text(spec, value)
    if t.name == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            return bad("type", f"{spec.id}: expected integer, got {_type_name(value)}")
        return _check_range(spec, value)
    if t.name == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return bad("type", f"{spec.id}: expected number, got {_type_name(value)}")
        if isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
            return bad("type", f"{spec.id}: number must be finite")
        return _check_range(spec, value)
    if t.name == "boolean":
        if not isinstance(value, bool):
            return bad("type", f"{spec.id}: expected boolean, got {_type_name(value)}")
        return None
    if t.name == "date":
        if not isinstance(value, str) or not _DATE_RE.match(value):
            return bad("type", f"{spec.id}: expected an ISO date like 2024-01-31")
        try:
            _dt.date.fromisoformat(value)
        except ValueError:
            return bad("type", f"{spec.id}: {value!r} is not a real calendar date")
        return None
    if t.name == "datetime":
        if not isinstance(value, str) or not _is_rfc3339(value):
            return bad(
                "type",
                f"{spec.id}: expected an RFC 3339 timestamp with offset, like 2024-01-01T00:00:00+08:00",
            )
        return None
    if t.name == "enum":
        if not isinstance(value, str):
            return bad("type", f"{spec.id}: expected one of the enum options")
        if value not in t.options:
            return bad(
                "enum",
                f"{spec.id}: {value!r} is not one of: {', '.join(t.options)}",
            )
        return None
    if t.name == "list":
        if not isinstance(value, list):
            return bad("type", f"{spec.id}: expected a list, got {_type_name(value)}")
        v = _check_items(spec, value)
        if v is not None:
            return v
        element_spec = FieldSpec(id=spec.id, type=t.element)
        for i, item in enumerate(value):
            v = validate_value(element_spec, item)
            if v is not None:
                return bad(v.rule, f"{spec.id}[{i}]: {_strip_id(v.message, spec.id)}")
        return None
    if t.name == "table":
        if not isinstance(value, list):
            return bad("type", f"{spec.id}: expected a list of rows, got {_type_name(value)}")
        v = _check_items(spec, value)
        if v is not None:
            return v
        col_ids = [cid for cid, _ in t.columns]
        for i, row in enumerate(value):
            if not isinstance(row, dict):
                return bad("type", f"{spec.id}[{i}]: each row must be an object")
            if set(row) != set(col_ids):
                return bad(
                    "columns",
                    f"{spec.id}[{i}]: row keys must be exactly: {', '.join(col_ids)}",
                )
            for cid, ctype in t.columns:
                cv = validate_value(FieldSpec(id=cid, type=ctype), row[cid])
                if cv is not None:
                    return bad(cv.rule, f"{spec.id}[{i}].{cid}: {_strip_id(cv.message, cid)}")
        return None
    if t.name == "file":
        if not isinstance(value, str) or not value:
            return bad("type", f"{spec.id}: expected a file reference string")
        return None
    if t.name == "record_ref":
        if t.multi:
            if not isinstance(value, list):
                return bad("type", f"{spec.id}: expected a list of record ids")
            v = _check_items(spec, value)
            if v is not None:
                return v
            for i, item in enumerate(value):
                if not isinstance(item, str) or not is_record_id(item):
                    return bad("type", f"{spec.id}[{i}]: not a record id")
            return None
        if not isinstance(value, str) or not is_record_id(value):
            return bad("type", f"{spec.id}: expected a record id")
        return None
    return bad("type", f"{spec.id}: unsupported type {t.describe()!r}")


def _type_name(value) -> str:
    names = {str: "text", bool: "boolean", int: "integer", float: "number",
             list: "list", dict: "object", type(None): "null"}
    return names.get(type(value), type(value).__name__)


def _strip_id(message: str, fid: str) -> str:
    prefix = f"{fid}: "
    return message[len(prefix):] if message.startswith(prefix) else message


def _check_range(spec: FieldSpec, value) -> Violation | None:
    c = spec.constraint
    if c.gt is not None and not value > c.gt:
        return Violation(spec.id, "gt", f"{spec.id}: must be greater than {c.gt}")
    if c.ge is not None and not value >= c.ge:
        return Violation(spec.id, "ge", f"{spec.id}: must be at least {c.ge}")
    if c.lt is not None and not value < c.lt:
        return Violation(spec.id, "lt", f"{spec.id}: must be less than {c.lt}")
    if c.le is not None and not value <= c.le:
        return Violation(spec.id, "le", f"{spec.id}: must be at most {c.le}")
    return None


def _check_text(spec: FieldSpec, value: str) -> Violation | None:
    c = spec.constraint
    if c.min_length is not None and len(value) < c.min_length:
        return Violation(spec.id, "min_length", f"{spec.id}: needs at least {c.min_length} characters")
    if c.max_length is not None and len(value) > c.max_length:
        return Violation(spec.id, "max_length", f"{spec.id}: allows at most {c.max_length} characters")
    if c.pattern is not None and not re.search(c.pattern, value):
        return Violation(spec.id, "pattern", f"{spec.id}: must match pattern {c.pattern}")
    return None


def _check_items(spec: FieldSpec, value: list) -> Violation | None:
    c = spec.constraint
    if c.min_items is not None and len(value) < c.min_items:
        return Violation(spec.id, "min_items", f"{spec.id}: needs at least {c.min_items} items")
    if c.max_items is not None and len(value) > c.max_items:
        return Violation(spec.id, "max_items", f"{spec.id}: allows at most {c.max_items} items")
    return None


def _is_rfc3339(value: str) -> bool:
    if not re.search(r"(Z|[+-]\d{2}:\d{2})$", value):
        return False
    try:
        _dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        return False
    return True


def coerce_value(spec: FieldSpec, raw: object) -> object:
    """Best-effort conversion of form input toward the field's declared type.

    Strings are parsed for numeric/boolean targets (a number-typed field
    turns "1" into 1.0); values already of the right shape pass through.
    Returns the coerced value; validate_value still decides acceptance.
    """
    t = spec.type
    if t.name == "integer":
        if isinstance(raw, str):
            try:
                return int(raw.strip())
            except ValueError:
                return raw
        if isinstance(raw, float) and raw.is_integer():
            return int(raw)
        return raw
    if t.name == "number":
        if isinstance(raw, str):
            try:
                return float(raw.strip())
            except ValueError:
                return raw
        if isinstance(raw, int) and not isinstance(raw, bool):
            return float(raw)
        return raw
    if t.name == "boolean" and isinstance(raw, str):
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        return raw
    if t.name == "list" and t.element is not None and isinstance(raw, list):
        return [coerce_value(FieldSpec(id=spec.id, type=t.element), item) for item in raw]
    return raw


def validate_record_data(
    schema: FieldSchemaDoc, values: dict, *, treat_null_as_missing: bool = True
) -> list[Violation]:
    """Field checks for every var, then cross-field validators; [] means ok."""
    violations: list[Violation] = []
    usable: dict[str, object] = {}
    known = set(schema.var_ids())

    for key in values:
        if key not in known:
            violations.append(Violation(key, "unknown", f"unknown field {key!r}"))

    for spec in schema.vars:
        value = values.get(spec.id)
        if value is None and (treat_null_as_missing or spec.id not in values):
            if spec.required and not spec.has_default:
                violations.append(Violation(spec.id, "required", f"missing: {spec.id}"))
            continue
        v = validate_value(spec, value)
        if v is not None:
            violations.append(v)
        else:
            usable[spec.id] = value

    for validator in schema.validators:
        refs = validator.references()
        if not refs <= set(usable):
            continue  # referenced field missing or invalid; already reported
        try:
            ok = eval_expression(validator.predicate, {k: usable[k] for k in refs})
        except EvalError as e:
            violations.append(
                Violation(validator.id, "validator_error", f"{validator.id}: {e}")
            )
            continue
        if ok is not True:
            violations.append(Violation(validator.id, validator.id, validator.message))
    return violations


# ------------------------------------------------------------ schema output


_JSON_TYPE = {
    "text": "string",
    "integer": "integer",
    "number": "number",
    "boolean": "boolean",
    "date": "string",
    "datetime": "string",
    "enum": "string",
    "file": "string",
}


def _title_case(fid: str) -> str:
    return " ".join(w[:1].upper() + w[1:] for w in fid.split("_") if w)


def _type_entry(t: FieldType) -> dict:
    if t.name == "list":
        return {"type": "array", "items": _type_entry(t.element)}
    if t.name == "table":
        return {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {cid: _type_entry(ct) for cid, ct in t.columns},
                "required": [cid for cid, _ in t.columns],
            },
        }
    if t.name == "record_ref":
        if t.multi:
            return {"type": "array", "items": {"type": "string", "format": "af-record-ref"}}
        return {"type": "string", "format": "af-record-ref"}
    entry: dict = {"type": _JSON_TYPE[t.name]}
    if t.name == "enum":
        entry["enum"] = list(t.options)
    if t.name == "date":
        entry["format"] = "date"
    if t.name == "datetime":
        entry["format"] = "date-time"
    if t.name == "file":
        entry["format"] = f"af-file:{t.file_kind}"
    return entry


def emit_json_schema(schema: FieldSchemaDoc) -> dict:
    """JSON-Schema object for the var fields; deterministic in declaration order."""
    properties: dict[str, dict] = {}
    required: list[str] = []
    for spec in schema.vars:
        entry = _type_entry(spec.type)
        entry["title"] = _title_case(spec.id)
        c = spec.constraint
        numeric = spec.type.name in ("integer", "number")

        def bound(v):
            return float(v) if spec.type.name == "number" else v

        if numeric and c.gt is not None:
            entry["exclusiveMinimum"] = bound(c.gt)
        if numeric and c.ge is not None:
            entry["minimum"] = bound(c.ge)
        if numeric and c.lt is not None:
            entry["exclusiveMaximum"] = bound(c.lt)
        if numeric and c.le is not None:
            entry["maximum"] = bound(c.le)
        if c.min_length is not None:
            entry["minLength"] = c.min_length
        if c.max_length is not None:
            entry["maxLength"] = c.max_length
        if c.pattern is not None:
            entry["pattern"] = c.pattern
        if c.min_items is not None:
            entry["minItems"] = c.min_items
        if c.max_items is not None:
            entry["maxItems"] = c.max_items
        if spec.has_default and spec.default not in DYNAMIC_DEFAULTS:
            entry["default"] = spec.default

        properties[spec.id] = dict(sorted(entry.items()))
        if spec.required and not spec.has_default:
            required.append(spec.id)

    return {
        "properties": properties,
        "required": required,
        "title": schema.title,
        "type": "object",
    }


def resolve_defaults(schema: FieldSchemaDoc, context: dict) -> dict:
    """Materialize defaults: literals copied, $current_user and $now filled
    from the context; fields without defaults are omitted."""
    out: dict[str, object] = {}
    for spec in schema.vars:
        if not spec.has_default:
            continue
        if spec.default == "$current_user":
            out[spec.id] = context["user_id"]
        elif spec.default == "$now":
            out[spec.id] = context["now"]
        else:
            out[spec.id] = spec.default
    return out
