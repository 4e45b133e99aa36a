"""Protocol workflows and the goal-directed automation loop.

A workflow is declared in a fenced ``workflow`` block as YAML:

    id: cnt_dispersion
    title: ...
    protocols:
      - protocol_index: 1
        protocol_name: ...
        airalogy_protocol_id: airalogy.id.lab....v.0.0.1
    edges:
      - 1 -> 2
      - 2 <-> 4
    logic: |
      free-text rules the decision policy should honor

The engine enforces only graph adjacency on executed paths; the logic text
is advisory input for policies. The loop itself is: obtain a goal, plan a
strategy (or reject the goal), then repeatedly pick the next protocol, set
its parameters, execute it, persist a record of parameters plus feedback,
and conclude the phase, until the policy ends the run or a step limit hits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Protocol as Interface

import yaml

from .ids import parse_protocol_id
from .records import AiralogyRecord, RecordData, RecordStore

END = None  # policies return None to stop

PLANNING = "planning"
RUNNING = "running"
ENDED = "ended"
LIMIT_REACHED = "limit_reached"
GOAL_REJECTED = "goal_rejected"

_EDGE_RE = re.compile(r"^\s*(\d+)\s*(<->|->)\s*(\d+)\s*$")


class WorkflowError(ValueError):
    pass


class PolicyError(ValueError):
    """A decision policy broke the rules (bad selection or parameters)."""


class ExecutorError(ValueError):
    """An executor returned feedback that does not match its manifest."""


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    bidirectional: bool = False

    def allows(self, a: int, b: int) -> bool:
        if self.src == a and self.dst == b:
            return True
        return self.bidirectional and self.src == b and self.dst == a


@dataclass(frozen=True)
class WorkflowProtocol:
    protocol_index: int
    protocol_name: str
    airalogy_protocol_id: str


@dataclass
class WorkflowDef:
    id: str
    title: str
    protocols: list[WorkflowProtocol]
    edges: list[Edge]
    logic: str = ""

    def indices(self) -> list[int]:
        return [p.protocol_index for p in self.protocols]

    def protocol(self, index: int) -> WorkflowProtocol:
        for p in self.protocols:
            if p.protocol_index == index:
                return p
        raise KeyError(index)

    def adjacent(self, a: int, b: int) -> bool:
        return any(e.allows(a, b) for e in self.edges)


@dataclass(frozen=True)
class ParamSplit:
    """Partition of a protocol's variables into inputs and instrument outputs."""

    parameter_fields: frozenset
    feedback_fields: frozenset

    def __post_init__(self):
        overlap = self.parameter_fields & self.feedback_fields
        if overlap:
            raise ValueError(f"parameter/feedback overlap: {sorted(overlap)}")


@dataclass
class RunState:
    workflow: WorkflowDef
    goal: str = ""
    strategy: str | None = None
    path: list[int] = field(default_factory=list)
    records: list[str] = field(default_factory=list)
    phased: list[str] = field(default_factory=list)
    conclusion: str | None = None
    status: str = PLANNING
    record_bodies: list[AiralogyRecord] = field(default_factory=list)

    def to_trace(self) -> dict:
        return {
            "goal": self.goal,
            "strategy": self.strategy,
            "path": list(self.path),
            "records": list(self.records),
            "phased": list(self.phased),
            "conclusion": self.conclusion,
            "status": self.status,
        }


class DecisionPolicy(Interface):
    def propose_goal(self, workflow: WorkflowDef) -> str: ...

    def plan_strategy(self, workflow: WorkflowDef, goal: str) -> str | None: ...

    def select_next(self, workflow: WorkflowDef, run: RunState) -> int | None: ...

    def set_parameters(self, workflow: WorkflowDef, run: RunState, index: int) -> dict: ...

    def phase_conclusion(
        self, workflow: WorkflowDef, run: RunState, index: int, record: AiralogyRecord
    ) -> str: ...

    def final_conclusion(self, workflow: WorkflowDef, run: RunState) -> str: ...


class ProtocolExecutor(Interface):
    manifest: dict  # protocol_index -> ParamSplit

    def execute(self, index: int, parameters: dict) -> dict: ...


# ------------------------------------------------------------------ parsing


def parse_workflow(block: str) -> WorkflowDef:
    """Parse the YAML content of a workflow block. Raises WorkflowError."""
    try:
        raw = yaml.safe_load(block)
    except yaml.YAMLError as e:
        raise WorkflowError(f"workflow block is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise WorkflowError("workflow block must be a YAML mapping")
    if "id" not in raw:
        raise WorkflowError("workflow needs an id")

    protocols: list[WorkflowProtocol] = []
    seen: set[int] = set()
    for entry in raw.get("protocols") or []:
        if not isinstance(entry, dict) or "protocol_index" not in entry:
            raise WorkflowError(f"bad protocol entry: {entry!r}")
        idx = entry["protocol_index"]
        if not isinstance(idx, int) or idx < 1:
            raise WorkflowError(f"protocol_index must be a positive integer, got {idx!r}")
        if idx in seen:
            raise WorkflowError(f"duplicate protocol_index {idx}")
        seen.add(idx)
        protocols.append(
            WorkflowProtocol(
                protocol_index=idx,
                protocol_name=str(entry.get("protocol_name", "")),
                airalogy_protocol_id=str(entry.get("airalogy_protocol_id", "")),
            )
        )
    if not protocols:
        raise WorkflowError("workflow lists no protocols")
    if sorted(seen) != list(range(1, len(seen) + 1)):
        raise WorkflowError("protocol_index values must be contiguous from 1")

    edges: list[Edge] = []
    for line in raw.get("edges") or []:
        m = _EDGE_RE.match(str(line))
        if not m:
            raise WorkflowError(f"bad edge {line!r}, expected 'A -> B' or 'A <-> B'")
        a, arrow, b = int(m.group(1)), m.group(2), int(m.group(3))
        for endpoint in (a, b):
            if endpoint not in seen:
                raise WorkflowError(f"edge {line!r} names unknown protocol_index {endpoint}")
        edges.append(Edge(a, b, bidirectional=(arrow == "<->")))

    return WorkflowDef(
        id=str(raw["id"]),
        title=str(raw.get("title", "")),
        protocols=protocols,
        edges=edges,
        logic=str(raw.get("logic", "")),
    )


@dataclass(frozen=True)
class PathCheck:
    valid: bool
    failed_at: int | None = None  # 1-based position of the first bad element


def validate_path(wf: WorkflowDef, path: list[int]) -> PathCheck:
    """Adjacency check: every consecutive pair must follow an edge."""
    indices = set(wf.indices())
    for pos, idx in enumerate(path, start=1):
        if idx not in indices:
            return PathCheck(False, pos)
        if pos > 1 and not wf.adjacent(path[pos - 2], idx):
            return PathCheck(False, pos)
    return PathCheck(True)


# ----------------------------------------------------------------- run loop


class RunRecorder:
    """Submits one record per executed protocol into a store."""

    def __init__(self, store: RecordStore, user_id: str = "aira", clock=None):
        self.store = store
        self.user_id = user_id
        self._clock = clock or _default_clock()

    def submit(self, wf: WorkflowDef, index: int, values: dict) -> AiralogyRecord:
        ref = parse_protocol_id(wf.protocol(index).airalogy_protocol_id)
        data = RecordData(var=dict(values))
        return self.store.submit_record(ref, data, self.user_id, self._clock())


def _default_clock():
    import datetime as _dt

    counter = {"n": 0}
    base = _dt.datetime(2026, 1, 1, tzinfo=_dt.timezone.utc)

    def tick() -> str:
        counter["n"] += 1
        return (base + _dt.timedelta(seconds=counter["n"])).isoformat()

    return tick


def _check_manifest(wf: WorkflowDef, executor: ProtocolExecutor) -> None:
    missing = [i for i in wf.indices() if i not in executor.manifest]
    if missing:
        raise ExecutorError(f"executor manifest misses protocol indices: {missing}")


def start_run(
    wf: WorkflowDef,
    goal: str | None,
    policy: DecisionPolicy,
) -> RunState:
    run = RunState(workflow=wf)
    run.goal = goal if goal is not None else policy.propose_goal(wf)
    run.strategy = policy.plan_strategy(wf, run.goal)
    if run.strategy is END:
        run.status = GOAL_REJECTED
    else:
        run.status = RUNNING
    return run


def step_aira(
    run: RunState,
    policy: DecisionPolicy,
    executor: ProtocolExecutor,
    recorder: RunRecorder,
) -> RunState:
    """One loop iteration: select, parameterize, execute, record, conclude."""
    if run.status != RUNNING:
        raise ValueError(f"run is not running (status {run.status!r})")
    wf = run.workflow

    nxt = policy.select_next(wf, run)
    if nxt is END:
        run.conclusion = policy.final_conclusion(wf, run)
        run.status = ENDED
        return run
    if nxt not in wf.indices():
        raise PolicyError(f"policy selected unknown protocol index {nxt!r}")
    if run.path and not wf.adjacent(run.path[-1], nxt):
        raise PolicyError(
            f"policy selected protocol {nxt} but there is no edge {run.path[-1]} -> {nxt}"
        )

    split: ParamSplit = executor.manifest[nxt]
    params = policy.set_parameters(wf, run, nxt)
    if set(params) != set(split.parameter_fields):
        raise PolicyError(
            f"parameters for protocol {nxt} must cover exactly: "
            + ", ".join(sorted(split.parameter_fields))
        )
    feedback = executor.execute(nxt, dict(params))
    if set(feedback) != set(split.feedback_fields):
        raise ExecutorError(
            f"feedback for protocol {nxt} must cover exactly: "
            + ", ".join(sorted(split.feedback_fields))
        )

    record = recorder.submit(wf, nxt, {**params, **feedback})
    run.path.append(nxt)
    run.records.append(record.airalogy_record_id)
    run.record_bodies.append(record)
    run.phased.append(policy.phase_conclusion(wf, run, nxt, record))
    return run


def run_aira(
    wf: WorkflowDef,
    goal: str | None,
    policy: DecisionPolicy,
    executor: ProtocolExecutor,
    recorder: RunRecorder,
    max_steps: int = 64,
) -> RunState:
    """Drive the loop to completion (policy End, rejection, or step limit)."""
    _check_manifest(wf, executor)
    run = start_run(wf, goal, policy)
    if run.status == GOAL_REJECTED:
        return run
    while run.status == RUNNING:
        if len(run.path) >= max_steps:
            run.conclusion = policy.final_conclusion(wf, run)
            run.status = LIMIT_REACHED
            break
        step_aira(run, policy, executor, recorder)
    return run
