"""Core domain model: problems, plans, registries, task records.

Everything downstream (orchestrator, scheduler, session service) speaks these
types.  Value objects are frozen dataclasses that validate on construction;
collections are normalized to tuples so instances hash and compare cleanly.

A DecompositionPlan is deliberately permissive at construction time: duplicate
ids, dangling dependencies and cycles are representable, because they arrive
from LLM output and must be *reported* by validate_plan rather than blowing up
in the decoder.  Construction rejects only what would make the value object
itself incoherent (empty text, self-loops, inputs for undeclared deps).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping


def now_ms() -> int:
    """Wall-clock time as integer milliseconds since the epoch."""
    return time.time_ns() // 1_000_000


class AssigneeKind(str, Enum):
    LLM_AGENT = "llm_agent"
    TOOL = "tool"


class TaskStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    SOLVED = "solved"
    FAILED = "failed"
    CANCELLED = "cancelled"


TERMINAL_STATUSES = frozenset(
    {TaskStatus.SOLVED, TaskStatus.FAILED, TaskStatus.CANCELLED}
)


def _fail(path: str, msg: str) -> None:
    raise ValueError(f"{path}: {msg}")


def _req_str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value.strip():
        _fail(path, "expected a non-empty string")
    return value


def _dedupe(items: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for item in items:
        seen.setdefault(item, None)
    return tuple(seen)


@dataclass(frozen=True)
class ProblemStatement:
    """A user problem plus the constraints gathered so far."""

    id: str
    text: str
    constraints: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _req_str(self.id, "problem.id")
        _req_str(self.text, "problem.text")
        object.__setattr__(self, "constraints", _dedupe(self.constraints))

    def with_constraints(self, extra: Iterable[str]) -> ProblemStatement:
        """Constraints only ever grow; duplicates collapse."""
        return ProblemStatement(self.id, self.text, self.constraints + tuple(extra))

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "text": self.text, "constraints": list(self.constraints)}

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ProblemStatement:
        return cls(
            id=_req_str(raw.get("id"), "problem.id"),
            text=_req_str(raw.get("text"), "problem.text"),
            constraints=tuple(_str_list(raw.get("constraints", []), "problem.constraints")),
        )


@dataclass(frozen=True)
class AssigneeRef:
    kind: AssigneeKind
    id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AssigneeKind(self.kind))
        _req_str(self.id, "assignee.id")

    def to_dict(self) -> dict[str, str]:
        return {"kind": self.kind.value, "id": self.id}

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], path: str = "assignee") -> AssigneeRef:
        if not isinstance(raw, Mapping):
            _fail(path, "expected an object with 'kind' and 'id'")
        kind = raw.get("kind")
        if kind not in (AssigneeKind.LLM_AGENT.value, AssigneeKind.TOOL.value):
            _fail(f"{path}.kind", "expected 'llm_agent' or 'tool'")
        return cls(kind=AssigneeKind(kind), id=_req_str(raw.get("id"), f"{path}.id"))


def _str_list(value: Any, path: str) -> list[str]:
    if not isinstance(value, (list, tuple)):
        _fail(path, "expected a list of strings")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, str):
            _fail(f"{path}[{i}]", "expected a string")
        out.append(item)
    return out


@dataclass(frozen=True)
class SubproblemSpec:
    """One node of a decomposition plan.

    inputs maps a dependency id to a note describing how that dependency's
    solution feeds this subproblem; keys must be declared in depends_on.
    """

    id: str
    description: str
    domain_tags: tuple[str, ...] = ()
    depends_on: tuple[str, ...] = ()
    assignee: AssigneeRef | None = None
    inputs: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _req_str(self.id, "subproblem.id")
        _req_str(self.description, f"subproblem[{self.id}].description")
        object.__setattr__(
            self, "domain_tags", _dedupe(t.lower() for t in self.domain_tags)
        )
        deps = _dedupe(self.depends_on)
        if self.id in deps:
            _fail(f"subproblem[{self.id}].depends_on", "self-reference")
        object.__setattr__(self, "depends_on", deps)
        inputs = dict(self.inputs)
        for key in inputs:
            if key not in deps:
                _fail(
                    f"subproblem[{self.id}].inputs",
                    f"note for '{key}' which is not a declared dependency",
                )
        object.__setattr__(self, "inputs", inputs)

    def __hash__(self) -> int:
        return hash((self.id, self.description, self.domain_tags, self.depends_on))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "description": self.description,
            "domain_tags": list(self.domain_tags),
            "depends_on": list(self.depends_on),
            "assignee": self.assignee.to_dict() if self.assignee else None,
            "inputs": dict(self.inputs),
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], path: str = "subproblem") -> SubproblemSpec:
        if not isinstance(raw, Mapping):
            _fail(path, "expected an object")
        assignee_raw = raw.get("assignee")
        assignee = (
            AssigneeRef.from_dict(assignee_raw, f"{path}.assignee")
            if assignee_raw
            else None
        )
        inputs_raw = raw.get("inputs", {})
        if inputs_raw is None:
            inputs_raw = {}
        if not isinstance(inputs_raw, Mapping):
            _fail(f"{path}.inputs", "expected an object of dependency notes")
        for key, note in inputs_raw.items():
            if not isinstance(note, str):
                _fail(f"{path}.inputs[{key}]", "expected a string note")
        return cls(
            id=_req_str(raw.get("id"), f"{path}.id"),
            description=_req_str(raw.get("description"), f"{path}.description"),
            domain_tags=tuple(_str_list(raw.get("domain_tags", []), f"{path}.domain_tags")),
            depends_on=tuple(_str_list(raw.get("depends_on", []), f"{path}.depends_on")),
            assignee=assignee,
            inputs=dict(inputs_raw),
        )


@dataclass(frozen=True)
class DecompositionPlan:
    problem_id: str
    subproblems: tuple[SubproblemSpec, ...]
    rationale: str = ""

    def __post_init__(self) -> None:
        _req_str(self.problem_id, "plan.problem_id")
        object.__setattr__(self, "subproblems", tuple(self.subproblems))
        if not self.subproblems:
            _fail("plan.subproblems", "a plan needs at least one subproblem")

    def subproblem_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.subproblems)

    def get(self, sub_id: str) -> SubproblemSpec:
        for sub in self.subproblems:
            if sub.id == sub_id:
                return sub
        raise KeyError(sub_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem_id": self.problem_id,
            "rationale": self.rationale,
            "subproblems": [s.to_dict() for s in self.subproblems],
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> DecompositionPlan:
        if not isinstance(raw, Mapping):
            _fail("plan", "expected an object")
        subs_raw = raw.get("subproblems")
        if not isinstance(subs_raw, list) or not subs_raw:
            _fail("plan.subproblems", "expected a non-empty list")
        rationale = raw.get("rationale", "")
        if not isinstance(rationale, str):
            _fail("plan.rationale", "expected a string")
        return cls(
            problem_id=_req_str(raw.get("problem_id"), "plan.problem_id"),
            subproblems=tuple(
                SubproblemSpec.from_dict(s, f"plan.subproblems[{i}]")
                for i, s in enumerate(subs_raw)
            ),
            rationale=rationale,
        )


def plan_to_json(plan: DecompositionPlan) -> str:
    return json.dumps(plan.to_dict(), indent=2)


def plan_from_json(text: str) -> DecompositionPlan:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"plan: invalid JSON: {exc}") from exc
    return DecompositionPlan.from_dict(raw)


@dataclass(frozen=True)
class AgentSpec:
    """A specialized LLM worker: persona plus backend routing."""

    id: str
    display_name: str
    domain_tags: tuple[str, ...]
    persona: str
    backend_id: str
    temperature: float = 0.0

    def __post_init__(self) -> None:
        _req_str(self.id, "agent.id")
        _req_str(self.display_name, f"agent[{self.id}].display_name")
        _req_str(self.persona, f"agent[{self.id}].persona")
        _req_str(self.backend_id, f"agent[{self.id}].backend_id")
        tags = _dedupe(t.lower() for t in self.domain_tags)
        if not tags:
            _fail(f"agent[{self.id}].domain_tags", "at least one tag required")
        object.__setattr__(self, "domain_tags", tags)
        if not 0.0 <= self.temperature <= 1.0:
            _fail(f"agent[{self.id}].temperature", "must be within [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "domain_tags": list(self.domain_tags),
            "persona": self.persona,
            "backend_id": self.backend_id,
            "temperature": self.temperature,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> AgentSpec:
        return cls(
            id=_req_str(raw.get("id"), "agent.id"),
            display_name=_req_str(raw.get("display_name"), "agent.display_name"),
            domain_tags=tuple(_str_list(raw.get("domain_tags", []), "agent.domain_tags")),
            persona=_req_str(raw.get("persona"), "agent.persona"),
            backend_id=_req_str(raw.get("backend_id"), "agent.backend_id"),
            temperature=float(raw.get("temperature", 0.0)),
        )


@dataclass(frozen=True)
class ToolSpec:
    """A deterministic, non-LLM capability exposed to the planner."""

    id: str
    domain_tags: tuple[str, ...]
    description: str
    input_contract: str = ""

    def __post_init__(self) -> None:
        _req_str(self.id, "tool.id")
        _req_str(self.description, f"tool[{self.id}].description")
        object.__setattr__(
            self, "domain_tags", _dedupe(t.lower() for t in self.domain_tags)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "domain_tags": list(self.domain_tags),
            "description": self.description,
            "input_contract": self.input_contract,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ToolSpec:
        return cls(
            id=_req_str(raw.get("id"), "tool.id"),
            domain_tags=tuple(_str_list(raw.get("domain_tags", []), "tool.domain_tags")),
            description=_req_str(raw.get("description"), "tool.description"),
            input_contract=str(raw.get("input_contract", "")),
        )


class Registry:
    """All assignable workers.  Agent and tool ids share one namespace so an
    AssigneeRef id is unambiguous on its own."""

    def __init__(self, agents: Iterable[AgentSpec] = (), tools: Iterable[ToolSpec] = ()):
        self.agents: dict[str, AgentSpec] = {}
        self.tools: dict[str, ToolSpec] = {}
        for agent in agents:
            if agent.id in self.agents:
                _fail("registry", f"duplicate agent id '{agent.id}'")
            self.agents[agent.id] = agent
        for tool in tools:
            if tool.id in self.tools or tool.id in self.agents:
                _fail("registry", f"id '{tool.id}' already registered")
            self.tools[tool.id] = tool

    def kind_of(self, ref_id: str) -> AssigneeKind | None:
        if ref_id in self.agents:
            return AssigneeKind.LLM_AGENT
        if ref_id in self.tools:
            return AssigneeKind.TOOL
        return None

    def agent(self, agent_id: str) -> AgentSpec:
        return self.agents[agent_id]

    def tool(self, tool_id: str) -> ToolSpec:
        return self.tools[tool_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "agents": [a.to_dict() for a in self.agents.values()],
            "tools": [t.to_dict() for t in self.tools.values()],
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> Registry:
        return cls(
            agents=[AgentSpec.from_dict(a) for a in raw.get("agents", [])],
            tools=[ToolSpec.from_dict(t) for t in raw.get("tools", [])],
        )


@dataclass(frozen=True)
class TaskRecord:
    """Terminal or in-flight state of one scheduled subproblem."""

    subproblem_id: str
    status: TaskStatus
    solution: str | None = None
    error: str | None = None
    started_at: int | None = None
    finished_at: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", TaskStatus(self.status))
        if (self.solution is not None) != (self.status is TaskStatus.SOLVED):
            _fail(f"task[{self.subproblem_id}]", "solution present iff status is solved")
        if (self.error is not None) != (self.status is TaskStatus.FAILED):
            _fail(f"task[{self.subproblem_id}]", "error present iff status is failed")
        if (
            self.started_at is not None
            and self.finished_at is not None
            and self.finished_at < self.started_at
        ):
            _fail(f"task[{self.subproblem_id}]", "finished_at precedes started_at")

    def to_dict(self) -> dict[str, Any]:
        return {
            "subproblem_id": self.subproblem_id,
            "status": self.status.value,
            "solution": self.solution,
            "error": self.error,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> TaskRecord:
        return cls(
            subproblem_id=_req_str(raw.get("subproblem_id"), "task.subproblem_id"),
            status=TaskStatus(raw.get("status")),
            solution=raw.get("solution"),
            error=raw.get("error"),
            started_at=raw.get("started_at"),
            finished_at=raw.get("finished_at"),
        )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]


def _find_cycle(nodes: list[str], edges: dict[str, list[str]]) -> list[str] | None:
    """First dependency cycle in deterministic order, as [a, b, ..., a]."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    stack: list[str] = []

    def visit(node: str) -> list[str] | None:
        color[node] = GREY
        stack.append(node)
        for dep in edges.get(node, []):
            if color.get(dep, BLACK) == GREY:
                start = stack.index(dep)
                return stack[start:] + [dep]
            if color.get(dep, BLACK) == WHITE:
                found = visit(dep)
                if found:
                    return found
        stack.pop()
        color[node] = BLACK
        return None

    for node in sorted(nodes):
        if color[node] == WHITE:
            found = visit(node)
            if found:
                return found
    return None


def validate_plan(plan: DecompositionPlan, registry: Registry) -> ValidationReport:
    """Collect every structural problem; never raises.

    An empty report means the plan has a topological order and every assignee
    resolves to a registered worker of the declared kind.
    """
    violations: list[Violation] = []
    seen: set[str] = set()
    for sub in plan.subproblems:
        if sub.id in seen:
            violations.append(Violation("duplicate_id", f"duplicate id: {sub.id}"))
        seen.add(sub.id)

    ids = {s.id for s in plan.subproblems}
    for sub in plan.subproblems:
        for dep in sub.depends_on:
            if dep not in ids:
                violations.append(
                    Violation(
                        "dangling_dependency",
                        f"dangling dependency: {sub.id} depends on unknown '{dep}'",
                    )
                )
        if sub.assignee is not None:
            registered = registry.kind_of(sub.assignee.id)
            if registered is None:
                violations.append(
                    Violation(
                        "unknown_assignee",
                        f"unknown assignee: '{sub.assignee.id}' on {sub.id}",
                    )
                )
            elif registered is not sub.assignee.kind:
                violations.append(
                    Violation(
                        "kind_mismatch",
                        f"kind mismatch: '{sub.assignee.id}' on {sub.id} is a "
                        f"{registered.value}, declared {sub.assignee.kind.value}",
                    )
                )

    edges = {
        s.id: [d for d in s.depends_on if d in ids] for s in plan.subproblems
    }
    cycle = _find_cycle(sorted(ids), edges)
    if cycle:
        violations.append(Violation("cycle", "cycle: " + "→".join(cycle)))

    return ValidationReport(tuple(violations))
