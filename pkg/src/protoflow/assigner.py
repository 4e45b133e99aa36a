"""Assigners: declarative rules computing some fields from others.

An assigner document (`assigners.toml`) holds one `[[assigner]]` table per
rule:

    [[assigner]]
    id = "a1"
    assigned_fields = ["f2", "f3"]
    dependent_fields = ["f1"]
    mode = "auto"
    [assigner.expr]
    f2 = "f1 + 1"
    f3 = "f1 * 2"

A rule may instead name a host plugin (`plugin = "sum_api"`); plugins are
callables registered by the embedding program. The rules over a protocol's
fields induce a dependency graph that must be acyclic with at most one
owner per field; activation events propagate through it to a fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import tomli

from .diagnostics import Diagnostic, error, warning
from .expr import (
    EvalError,
    ExprSyntaxError,
    eval_expression,
    field_refs,
    parse_expression,
)

AUTO = "auto"
MANUAL = "manual"


class AssignerLoadError(ValueError):
    """Raised when an assigner document cannot be loaded."""


class GraphError(ValueError):
    """Raised when the rules do not form a valid dependency graph."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class AssignerSpec:
    id: str
    assigned_fields: tuple[str, ...]
    dependent_fields: tuple[str, ...]
    mode: str = AUTO
    exprs: dict | None = None  # assigned field -> expression AST
    expr_texts: dict | None = None
    plugin: str | None = None


@dataclass(frozen=True)
class AssignerResult:
    success: bool
    assigned_fields: dict = field(default_factory=dict)
    error_message: str = ""

    @staticmethod
    def ok(values: dict) -> "AssignerResult":
        return AssignerResult(True, dict(values))

    @staticmethod
    def fail(message: str) -> "AssignerResult":
        return AssignerResult(False, {}, message)


@dataclass(frozen=True)
class TriggerEntry:
    """One propagation event: an assigner ran, failed, or became eligible."""

    assigner_id: str
    status: str  # ran | failed | eligible_manual
    assigned: dict = field(default_factory=dict)
    error_message: str = ""

    def to_json_obj(self) -> dict:
        obj: dict = {"assigner_id": self.assigner_id, "status": self.status}
        if self.status == "ran":
            obj["assigned"] = self.assigned
        if self.error_message:
            obj["error_message"] = self.error_message
        return obj


@dataclass
class DependencyGraph:
    nodes: set[str]
    specs: dict[str, AssignerSpec]
    owner: dict[str, str]  # field -> assigner id
    topo_order: list[str]  # assigner ids, upstream first
    warnings: list[Diagnostic] = field(default_factory=list)

    def spec_list(self) -> list[AssignerSpec]:
        return [self.specs[sid] for sid in self.topo_order]

    def descendants(self, field_id: str) -> set[str]:
        """Fields transitively assigned downstream of field_id."""
        out: set[str] = set()
        frontier = [field_id]
        while frontier:
            cur = frontier.pop()
            for spec in self.specs.values():
                if cur in spec.dependent_fields:
                    for assigned in spec.assigned_fields:
                        if assigned not in out:
                            out.add(assigned)
                            frontier.append(assigned)
        return out


EMPTY_GRAPH = DependencyGraph(nodes=set(), specs={}, owner={}, topo_order=[])


def load_assigners(text: str) -> list[AssignerSpec]:
    """Parse an assigner document. Raises AssignerLoadError on bad structure."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise AssignerLoadError(f"assigner document is not valid TOML: {e}") from e

    specs: list[AssignerSpec] = []
    seen: set[str] = set()
    for entry in raw.get("assigner", []):
        if "id" not in entry:
            raise AssignerLoadError("[[assigner]] entry without an id")
        aid = str(entry["id"])
        if aid in seen:
            raise AssignerLoadError(f"duplicate assigner id {aid!r}")
        seen.add(aid)

        assigned = tuple(str(f) for f in entry.get("assigned_fields", []))
        dependent = tuple(str(f) for f in entry.get("dependent_fields", []))
        if not assigned or not dependent:
            raise AssignerLoadError(f"{aid}: assigned_fields and dependent_fields must be non-empty")
        if set(assigned) & set(dependent):
            raise AssignerLoadError(f"{aid}: assigned and dependent fields must not overlap")
        if len(set(assigned)) != len(assigned) or len(set(dependent)) != len(dependent):
            raise AssignerLoadError(f"{aid}: repeated field in assigner lists")

        mode = str(entry.get("mode", AUTO))
        if mode not in (AUTO, MANUAL):
            raise AssignerLoadError(f"{aid}: mode must be 'auto' or 'manual', got {mode!r}")

        expr_table = entry.get("expr")
        plugin = entry.get("plugin")
        if (expr_table is None) == (plugin is None):
            raise AssignerLoadError(f"{aid}: exactly one of expr or plugin is required")

        exprs = None
        expr_texts = None
        if expr_table is not None:
            if set(expr_table) != set(assigned):
                raise AssignerLoadError(
                    f"{aid}: expr keys must match assigned_fields exactly"
                )
            exprs = {}
            expr_texts = {}
            for fid, text_expr in expr_table.items():
                try:
                    ast = parse_expression(str(text_expr))
                except ExprSyntaxError as e:
                    raise AssignerLoadError(f"{aid}.{fid}: bad expression: {e}") from e
                refs = field_refs(ast)
                if not refs <= set(dependent):
                    extra = ", ".join(sorted(refs - set(dependent)))
                    raise AssignerLoadError(
                        f"{aid}.{fid}: expression references non-dependent fields: {extra}"
                    )
                exprs[fid] = ast
                expr_texts[fid] = str(text_expr)

        specs.append(
            AssignerSpec(
                id=aid,
                assigned_fields=assigned,
                dependent_fields=dependent,
                mode=mode,
                exprs=exprs,
                expr_texts=expr_texts,
                plugin=str(plugin) if plugin is not None else None,
            )
        )
    return specs


def build_graph(
    specs: list[AssignerSpec],
    declared_vars: set[str],
    plugins: dict | None = None,
) -> DependencyGraph:
    """Check ownership, reference, and acyclicity rules; raises GraphError.

    A spec naming a plugin absent from the registry loads with a warning
    and is demoted to manual mode (running it reports the missing plugin).
    """
    problems: list[Diagnostic] = []
    notes: list[Diagnostic] = []
    owner: dict[str, str] = {}

    effective: dict[str, AssignerSpec] = {}
    for spec in specs:
        for fid in spec.assigned_fields + spec.dependent_fields:
            if fid not in declared_vars:
                problems.append(
                    error(f"assigner {spec.id!r} references unknown field {fid!r}", rule="unknown_field")
                )
        for fid in spec.assigned_fields:
            if fid in owner:
                problems.append(
                    error(
                        f"field {fid!r} is assigned by both {owner[fid]!r} and {spec.id!r}",
                        rule="double_assignment",
                    )
                )
            else:
                owner[fid] = spec.id
        if spec.plugin is not None and (plugins is None or spec.plugin not in plugins):
            notes.append(
                warning(
                    f"assigner {spec.id!r} names unregistered plugin {spec.plugin!r}; demoted to manual",
                    rule="missing_plugin",
                )
            )
            spec = AssignerSpec(
                id=spec.id,
                assigned_fields=spec.assigned_fields,
                dependent_fields=spec.dependent_fields,
                mode=MANUAL,
                exprs=spec.exprs,
                expr_texts=spec.expr_texts,
                plugin=spec.plugin,
            )
        effective[spec.id] = spec

    cycle = _find_cycle(effective.values())
    if cycle:
        problems.append(
            error("dependency cycle: " + " -> ".join(cycle), rule="cycle")
        )
    if problems:
        raise GraphError(problems)

    topo = _topo_sort(effective)
    return DependencyGraph(
        nodes=set(declared_vars),
        specs=effective,
        owner=owner,
        topo_order=topo,
        warnings=notes,
    )


def _field_edges(specs) -> dict[str, set[str]]:
    edges: dict[str, set[str]] = {}
    for spec in specs:
        for dep in spec.dependent_fields:
            edges.setdefault(dep, set()).update(spec.assigned_fields)
    return edges


def _find_cycle(specs) -> list[str] | None:
    """Return one witness cycle in the field graph (a -> b -> a), or None."""
    edges = _field_edges(specs)
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[str, int] = {}
    parent: dict[str, str] = {}

    def visit(start: str) -> list[str] | None:
        stack = [(start, iter(sorted(edges.get(start, ()))))]
        color[start] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color.get(nxt, WHITE) == GRAY:
                    cycle = [nxt]
                    cur = node
                    while cur != nxt:
                        cycle.append(cur)
                        cur = parent[cur]
                    cycle.append(nxt)
                    cycle.reverse()
                    return cycle
                if color.get(nxt, WHITE) == WHITE:
                    color[nxt] = GRAY
                    parent[nxt] = node
                    stack.append((nxt, iter(sorted(edges.get(nxt, ())))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
        return None

    for start in sorted(edges):
        if color.get(start, WHITE) == WHITE:
            found = visit(start)
            if found:
                return found
    return None


def _topo_sort(specs: dict[str, AssignerSpec]) -> list[str]:
    """Order assigner ids so producers come before consumers."""
    produced_by: dict[str, str] = {}
    for spec in specs.values():
        for fid in spec.assigned_fields:
            produced_by[fid] = spec.id
    deps: dict[str, set[str]] = {sid: set() for sid in specs}
    for spec in specs.values():
        for fid in spec.dependent_fields:
            if fid in produced_by:
                deps[spec.id].add(produced_by[fid])
    order: list[str] = []
    ready = sorted(sid for sid, d in deps.items() if not d)
    remaining = {sid: set(d) for sid, d in deps.items()}
    while ready:
        sid = ready.pop(0)
        order.append(sid)
        for other, d in remaining.items():
            if sid in d:
                d.discard(sid)
                if not d and other not in order and other not in ready:
                    ready.append(other)
        ready.sort()
    # acyclicity was checked before, so everything is ordered
    return order


def run_assigner(spec: AssignerSpec, deps: dict, plugins: dict | None = None) -> AssignerResult:
    """Run one rule against its dependency values; failures are results."""
    missing = [f for f in spec.dependent_fields if f not in deps]
    if missing:
        return AssignerResult.fail("missing: " + ", ".join(missing))

    env = {f: deps[f] for f in spec.dependent_fields}
    if spec.plugin is not None:
        fn = (plugins or {}).get(spec.plugin)
        if fn is None:
            return AssignerResult.fail(f"plugin {spec.plugin!r} is not registered")
        try:
            values = fn(env)
        except Exception as e:  # plugin code is host-supplied; contain it
            return AssignerResult.fail(str(e) or type(e).__name__)
        if not isinstance(values, dict) or set(values) != set(spec.assigned_fields):
            return AssignerResult.fail(
                f"plugin {spec.plugin!r} returned wrong fields, expected: "
                + ", ".join(spec.assigned_fields)
            )
        return AssignerResult.ok(values)

    values = {}
    for fid, ast in spec.exprs.items():
        try:
            values[fid] = eval_expression(ast, env)
        except EvalError as e:
            return AssignerResult.fail(f"{spec.id}.{fid}: {e}")
    return AssignerResult.ok(values)


def propagate(
    graph: DependencyGraph,
    states: dict,
    plugins: dict | None = None,
    validate=None,
) -> tuple[dict, list[TriggerEntry]]:
    """Run every auto rule whose inputs are active and outputs incomplete.

    One pass in topologic order reaches the fixpoint (rules form a DAG and
    each rule runs at most once). Failures clear the rule's outputs and are
    logged; manual rules are logged as eligible without running. `validate`
    is an optional callback (field, value) -> violation-or-None used to
    keep invalid computed values out of the active set.
    """
    out = dict(states)
    log: list[TriggerEntry] = []
    for spec in graph.spec_list():
        deps_ready = all(f in out for f in spec.dependent_fields)
        outputs_missing = any(f not in out for f in spec.assigned_fields)
        if not (deps_ready and outputs_missing):
            continue
        if spec.mode == MANUAL:
            log.append(TriggerEntry(spec.id, "eligible_manual"))
            continue
        result = run_assigner(spec, {f: out[f] for f in spec.dependent_fields}, plugins)
        _apply_result(spec, result, out, log, validate)
    return out, log


def _apply_result(spec, result, states, log, validate) -> AssignerResult:
    if result.success and validate is not None:
        for fid, value in result.assigned_fields.items():
            violation = validate(fid, value)
            if violation is not None:
                message = getattr(violation, "message", str(violation))
                result = AssignerResult.fail(f"computed value rejected: {message}")
                break
    if result.success:
        states.update(result.assigned_fields)
        log.append(TriggerEntry(spec.id, "ran", dict(result.assigned_fields)))
    else:
        for fid in spec.assigned_fields:
            states.pop(fid, None)
        log.append(TriggerEntry(spec.id, "failed", error_message=result.error_message))
    return result


def on_field_activated(
    graph: DependencyGraph,
    states: dict,
    changed: str,
    plugins: dict | None = None,
    validate=None,
) -> tuple[dict, list[TriggerEntry]]:
    """Propagate after `changed` became active; states must reflect that."""
    if changed not in states:
        raise ValueError(f"field {changed!r} is not active")
    return propagate(graph, states, plugins, validate)


def reset_descendants(graph: DependencyGraph, states: dict, field_id: str) -> tuple[dict, set[str]]:
    """Clear every field computed downstream of field_id (re-entry rule)."""
    out = dict(states)
    cleared = set()
    for fid in graph.descendants(field_id):
        if fid in out:
            del out[fid]
            cleared.add(fid)
    return out, cleared


def trigger_manual(
    graph: DependencyGraph,
    states: dict,
    spec_id: str,
    plugins: dict | None = None,
    validate=None,
) -> tuple[dict, AssignerResult, list[TriggerEntry]]:
    """Run one manual rule, then let downstream auto rules catch up."""
    spec = graph.specs.get(spec_id)
    if spec is None:
        raise KeyError(f"unknown assigner {spec_id!r}")
    if spec.mode != MANUAL:
        raise ValueError(f"assigner {spec_id!r} is not manual")
    missing = [f for f in spec.dependent_fields if f not in states]
    if missing:
        return dict(states), AssignerResult.fail("missing: " + ", ".join(missing)), []

    out = dict(states)
    log: list[TriggerEntry] = []
    result = run_assigner(spec, {f: out[f] for f in spec.dependent_fields}, plugins)
    result = _apply_result(spec, result, out, log, validate)
    if result.success:
        out, more = propagate(graph, out, plugins, validate)
        log.extend(more)
    return out, result, log
