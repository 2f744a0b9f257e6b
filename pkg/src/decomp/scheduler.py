"""Concurrent execution of an approved plan.

The dependency graph is executed with per-edge eligibility: a subproblem is
released the moment all of its dependencies are solved, subject to the
max_parallel bound.  One loop thread owns all task state and the trace
(single logical writer); worker threads only compute and report back over a
queue, so no lock discipline leaks into task code.

Failure policy is cancel_dependents: when a task fails (including by
timeout), every transitive dependent that has not started is cancelled
immediately.  Retries are not done here; transient backend trouble is the
gateway's business.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .gateway import ChatMessage, ChatRequest, Gateway, Role
from .model import (
    AssigneeKind,
    DecompositionPlan,
    Registry,
    TaskRecord,
    TaskStatus,
    now_ms,
    validate_plan,
)
from .toolbox import Toolbox

log = logging.getLogger(__name__)


class SchedulerError(Exception):
    pass


class ConfigError(SchedulerError):
    pass


class CyclicPlan(SchedulerError):
    pass


@dataclass(frozen=True)
class ExecutionConfig:
    max_parallel: int = 4
    task_timeout_ms: int = 120_000
    failure_policy: str = "cancel_dependents"

    def __post_init__(self) -> None:
        if self.max_parallel < 1:
            raise ConfigError("max_parallel must be >= 1")
        if self.task_timeout_ms <= 0:
            raise ConfigError("task_timeout_ms must be positive")
        if self.failure_policy != "cancel_dependents":
            raise ConfigError(f"unsupported failure policy: {self.failure_policy}")


@dataclass(frozen=True)
class TraceEvent:
    ts: int
    subproblem_id: str
    transition: str  # running | solved | failed | cancelled


@dataclass
class ExecutionTrace:
    events: list[TraceEvent] = field(default_factory=list)
    records: dict[str, TaskRecord] = field(default_factory=dict)

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps({"ts": e.ts, "id": e.subproblem_id, "transition": e.transition})
            for e in self.events
        )

    def peak_running(self) -> int:
        """Largest number of simultaneously running tasks the trace shows."""
        current = peak = 0
        for event in self.events:
            if event.transition == "running":
                current += 1
                peak = max(peak, current)
            elif event.transition in ("solved", "failed"):
                current -= 1
        return peak


def stages(plan: DecompositionPlan) -> list[set[str]]:
    """Layer subproblems by longest dependency path.  Stage k holds every id
    whose longest chain of prerequisites has length k.  Analysis and display
    only; execution releases per edge, not per stage."""
    deps = {s.id: list(s.depends_on) for s in plan.subproblems}
    depth: dict[str, int] = {}
    visiting: set[str] = set()

    def walk(node: str) -> int:
        if node in depth:
            return depth[node]
        if node in visiting:
            raise CyclicPlan(f"cycle through '{node}'")
        visiting.add(node)
        node_deps = [d for d in deps.get(node, []) if d in deps]
        value = 0 if not node_deps else 1 + max(walk(d) for d in node_deps)
        visiting.discard(node)
        depth[node] = value
        return value

    for node in deps:
        walk(node)
    layers: list[set[str]] = [set() for _ in range(max(depth.values()) + 1)]
    for node, level in depth.items():
        layers[level].add(node)
    return layers


def cancel_dependents(plan: DecompositionPlan, failed_id: str) -> set[str]:
    """Transitive dependents of failed_id (the failed task itself excluded)."""
    ids = {s.id for s in plan.subproblems}
    if failed_id not in ids:
        raise ValueError(f"unknown subproblem: {failed_id}")
    dependents: dict[str, set[str]] = {i: set() for i in ids}
    for sub in plan.subproblems:
        for dep in sub.depends_on:
            if dep in dependents:
                dependents[dep].add(sub.id)
    reached: set[str] = set()
    frontier = [failed_id]
    while frontier:
        node = frontier.pop()
        for child in dependents[node]:
            if child not in reached:
                reached.add(child)
                frontier.append(child)
    return reached


def _compose_task_input(
    sub_id: str, plan: DecompositionPlan, solutions: Mapping[str, str]
) -> str:
    """Description plus each dependency's solution under its declared label;
    the label falls back to the upstream id."""
    sub = plan.get(sub_id)
    parts = [sub.description]
    for dep in sub.depends_on:
        label = sub.inputs.get(dep, dep)
        parts.append(f"{label}:\n{solutions[dep]}")
    return "\n\n".join(parts)


def execute(
    plan: DecompositionPlan,
    registry: Registry,
    gateway: Gateway,
    toolbox: Toolbox | None = None,
    config: ExecutionConfig | None = None,
    on_event: Callable[[TraceEvent], None] | None = None,
    clock: Callable[[], int] = now_ms,
) -> ExecutionTrace:
    """Run every subproblem to a terminal status and return the trace.

    Task-level failures never raise; they land in the records.  Only a
    misconfigured call (invalid plan, missing assignee, bad config) raises
    ConfigError.
    """
    config = config or ExecutionConfig()
    toolbox = toolbox or Toolbox()
    report = validate_plan(plan, registry)
    if not report.ok:
        raise ConfigError("plan failed validation: " + "; ".join(report.messages()))
    for sub in plan.subproblems:
        if sub.assignee is None:
            raise ConfigError(f"subproblem '{sub.id}' has no assignee")

    trace = ExecutionTrace()
    status: dict[str, TaskStatus] = {s.id: TaskStatus.PENDING for s in plan.subproblems}
    solutions: dict[str, str] = {}
    errors: dict[str, str] = {}
    started_at: dict[str, int] = {}
    finished_at: dict[str, int] = {}
    deps = {s.id: set(s.depends_on) for s in plan.subproblems}
    results: queue.Queue[tuple[str, str, str]] = queue.Queue()
    running: set[str] = set()
    deadlines: dict[str, float] = {}
    timeout_s = config.task_timeout_ms / 1000.0

    def emit(sub_id: str, transition: str) -> None:
        event = TraceEvent(clock(), sub_id, transition)
        trace.events.append(event)
        if on_event is not None:
            on_event(event)

    def worker(sub_id: str) -> None:
        sub = plan.get(sub_id)
        try:
            assert sub.assignee is not None
            text = _compose_task_input(sub_id, plan, solutions)
            if sub.assignee.kind is AssigneeKind.TOOL:
                solution = toolbox.invoke(sub.assignee.id, text).text
            else:
                agent = registry.agent(sub.assignee.id)
                response = gateway.complete(
                    ChatRequest(
                        backend_id=agent.backend_id,
                        messages=(
                            ChatMessage(Role.SYSTEM, agent.persona),
                            ChatMessage(Role.USER, text),
                        ),
                        temperature=agent.temperature,
                    )
                )
                solution = response.content
            results.put((sub_id, "ok", solution))
        except Exception as exc:  # noqa: BLE001 - every task failure becomes a record
            results.put((sub_id, "err", f"{type(exc).__name__}: {exc}"))

    def mark_solved(sub_id: str, text: str) -> None:
        status[sub_id] = TaskStatus.SOLVED
        solutions[sub_id] = text
        finished_at[sub_id] = clock()
        running.discard(sub_id)
        deadlines.pop(sub_id, None)
        emit(sub_id, "solved")

    def mark_failed(sub_id: str, error: str) -> None:
        status[sub_id] = TaskStatus.FAILED
        errors[sub_id] = error
        finished_at[sub_id] = clock()
        running.discard(sub_id)
        deadlines.pop(sub_id, None)
        emit(sub_id, "failed")
        for victim in sorted(cancel_dependents(plan, sub_id)):
            if status[victim] is TaskStatus.PENDING:
                mark_cancelled(victim)

    def mark_cancelled(sub_id: str) -> None:
        status[sub_id] = TaskStatus.CANCELLED
        finished_at[sub_id] = clock()
        emit(sub_id, "cancelled")

    def unfinished() -> bool:
        return any(
            s in (TaskStatus.PENDING, TaskStatus.RUNNING) for s in status.values()
        )

    while unfinished():
        for sub_id in sorted(status):
            if len(running) >= config.max_parallel:
                break
            if status[sub_id] is TaskStatus.PENDING and all(
                status[d] is TaskStatus.SOLVED for d in deps[sub_id]
            ):
                status[sub_id] = TaskStatus.RUNNING
                started_at[sub_id] = clock()
                running.add(sub_id)
                deadlines[sub_id] = time.monotonic() + timeout_s
                emit(sub_id, "running")
                threading.Thread(target=worker, args=(sub_id,), daemon=True).start()

        if not running:
            # Remaining pending tasks are unreachable (an upstream did not
            # solve); the cancellation sweep should have got them already.
            for sub_id in sorted(status):
                if status[sub_id] is TaskStatus.PENDING:
                    mark_cancelled(sub_id)
            continue

        now = time.monotonic()
        expired = [s for s in sorted(running) if now >= deadlines[s]]
        if expired:
            for sub_id in expired:
                log.warning("task %s timed out", sub_id)
                mark_failed(sub_id, "timeout")
            continue
        wait = max(min(deadlines[s] for s in running) - now, 0.0)
        try:
            sub_id, kind, payload = results.get(timeout=wait)
        except queue.Empty:
            continue
        if sub_id not in running:
            continue  # late result from a task already failed by timeout
        if kind == "ok":
            mark_solved(sub_id, payload)
        else:
            mark_failed(sub_id, payload)

    for sub in plan.subproblems:
        trace.records[sub.id] = TaskRecord(
            subproblem_id=sub.id,
            status=status[sub.id],
            solution=solutions.get(sub.id),
            error=errors.get(sub.id),
            started_at=started_at.get(sub.id),
            finished_at=finished_at.get(sub.id),
        )
    return trace
