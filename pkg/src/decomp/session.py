"""Event-sourced session service.

Every session is an append-only JSON-lines file of events; all live state
(phase, current plan, final answer) is a pure function of that log, so a
restart reconstructs exactly what a crashed process knew.  Sequence numbers
are 1-based and gapless per session; a gap on load means the file was
tampered with and the session is refused rather than silently repaired.

Phase is derived, not stored: plan_proposed puts the session in
awaiting_approval, plan_approved in executing, final_answer in done (or
failed when the answer is incomplete).  The transient planning phase exists
only while a decompose call is actually in flight, which is why it never
survives a crash: a plan that was never persisted was never proposed.
"""

from __future__ import annotations

import json
import logging
import secrets
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from .gateway import ChatMessage, Gateway, GatewayError, Role
from .model import DecompositionPlan, ProblemStatement, Registry, now_ms
from .orchestrator import (
    ClarificationKind,
    ClarifyState,
    Decision,
    DecompositionFailed,
    Orchestrator,
    confirm_plan,
)
from .scheduler import ExecutionConfig, TraceEvent, execute
from .toolbox import Toolbox

log = logging.getLogger(__name__)


class SessionError(Exception):
    pass


class SessionNotFound(SessionError):
    def __init__(self, session_id: str):
        super().__init__(f"no such session: {session_id}")


class WrongPhase(SessionError):
    pass


class StorageError(SessionError):
    pass


class Phase(str, Enum):
    GATHERING = "gathering"
    PLANNING = "planning"
    AWAITING_APPROVAL = "awaiting_approval"
    EXECUTING = "executing"
    DONE = "done"
    FAILED = "failed"


EVENT_KINDS = frozenset(
    {
        "user_msg",
        "orchestrator_msg",
        "plan_proposed",
        "plan_approved",
        "task_event",
        "final_answer",
    }
)


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    ts: int
    kind: str
    payload: Mapping[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": dict(self.payload)}

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> SessionEvent:
        return cls(
            seq=int(raw["seq"]),
            ts=int(raw["ts"]),
            kind=str(raw["kind"]),
            payload=dict(raw.get("payload", {})),
        )


def derive_phase(events: list[SessionEvent]) -> Phase:
    phase = Phase.GATHERING
    for event in events:
        if event.kind == "plan_proposed":
            phase = Phase.AWAITING_APPROVAL
        elif event.kind == "plan_approved":
            phase = Phase.EXECUTING
        elif event.kind == "final_answer":
            phase = Phase.DONE if event.payload.get("complete") else Phase.FAILED
    return phase


class SessionLog:
    """Append-only per-session event storage, one JSONL file per session."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._events: dict[str, list[SessionEvent]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for path in sorted(self.data_dir.glob("*.jsonl")):
            self._load(path)

    def _load(self, path: Path) -> None:
        session_id = path.stem
        events: list[SessionEvent] = []
        try:
            with path.open("r", encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        events.append(SessionEvent.from_dict(json.loads(line)))
                    except (json.JSONDecodeError, KeyError, ValueError) as exc:
                        raise StorageError(
                            f"{path.name}:{line_no}: unreadable event: {exc}"
                        ) from exc
        except OSError as exc:
            raise StorageError(f"cannot read {path}: {exc}") from exc
        for i, event in enumerate(events, start=1):
            if event.seq != i:
                raise StorageError(
                    f"{path.name}: sequence gap: event {i} has seq {event.seq}"
                )
        self._events[session_id] = events
        self._locks[session_id] = threading.Lock()

    def _path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.jsonl"

    def ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._events)

    def exists(self, session_id: str) -> bool:
        with self._registry_lock:
            return session_id in self._events

    def create(self, session_id: str) -> None:
        with self._registry_lock:
            if session_id in self._events:
                raise StorageError(f"session {session_id} already exists")
            self._events[session_id] = []
            self._locks[session_id] = threading.Lock()
        self._path(session_id).touch()

    def append(self, session_id: str, kind: str, payload: Mapping[str, Any]) -> SessionEvent:
        if kind not in EVENT_KINDS:
            raise StorageError(f"unknown event kind: {kind}")
        lock = self._locks.get(session_id)
        if lock is None:
            raise SessionNotFound(session_id)
        with lock:
            events = self._events[session_id]
            event = SessionEvent(
                seq=len(events) + 1, ts=now_ms(), kind=kind, payload=dict(payload)
            )
            line = json.dumps(event.to_dict(), separators=(",", ":"))
            try:
                with self._path(session_id).open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
            except OSError as exc:
                raise StorageError(f"cannot append to session {session_id}: {exc}") from exc
            events.append(event)
            return event

    def events(self, session_id: str, since_seq: int = 0) -> list[SessionEvent]:
        lock = self._locks.get(session_id)
        if lock is None:
            raise SessionNotFound(session_id)
        with lock:
            return [e for e in self._events[session_id] if e.seq > since_seq]


@dataclass
class SessionView:
    id: str
    phase: Phase
    last_seq: int
    plan: dict[str, Any] | None
    final_answer: dict[str, Any] | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "phase": self.phase.value,
            "last_seq": self.last_seq,
            "plan": self.plan,
            "final_answer": self.final_answer,
        }


class SessionService:
    """Coordinates the orchestrator, scheduler and log for many sessions.

    Each session has one logical writer: post_message holds the session's
    service lock for the whole step, and during execution the only writer is
    the executor thread (user posts are rejected with WrongPhase until the
    final answer lands).
    """

    def __init__(
        self,
        store: SessionLog,
        orchestrator: Orchestrator,
        registry: Registry,
        gateway: Gateway,
        toolbox: Toolbox | None = None,
        exec_config: ExecutionConfig | None = None,
    ):
        self.store = store
        self.orchestrator = orchestrator
        self.registry = registry
        self.gateway = gateway
        self.toolbox = toolbox or Toolbox()
        self.exec_config = exec_config or ExecutionConfig()
        self._clarify: dict[str, ClarifyState] = {}
        self._transient: dict[str, Phase] = {}
        self._service_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self._new_event = threading.Condition()
        self._executors: dict[str, threading.Thread] = {}

    # -- helpers -----------------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            if session_id not in self._service_locks:
                self._service_locks[session_id] = threading.Lock()
            return self._service_locks[session_id]

    def _append(self, session_id: str, kind: str, payload: Mapping[str, Any]) -> SessionEvent:
        event = self.store.append(session_id, kind, payload)
        with self._new_event:
            self._new_event.notify_all()
        return event

    def _require(self, session_id: str) -> None:
        if not self.store.exists(session_id):
            raise SessionNotFound(session_id)

    def phase_of(self, session_id: str) -> Phase:
        transient = self._transient.get(session_id)
        if transient is not None:
            return transient
        return derive_phase(self.store.events(session_id))

    def _current_plan(self, session_id: str) -> DecompositionPlan | None:
        for event in reversed(self.store.events(session_id)):
            if event.kind == "plan_proposed":
                return DecompositionPlan.from_dict(event.payload["plan"])
        return None

    def _clarify_state(self, session_id: str) -> ClarifyState:
        state = self._clarify.get(session_id)
        if state is not None:
            return state
        state = self._rebuild_clarify(session_id)
        self._clarify[session_id] = state
        return state

    def _rebuild_clarify(self, session_id: str) -> ClarifyState:
        """Reconstruct the clarification working state from the log after a
        restart; constraints ride along in orchestrator_msg payloads."""
        events = self.store.events(session_id)
        problem_text = ""
        constraints: list[str] = []
        rounds = 0
        transcript: list[ChatMessage] = []
        for event in events:
            if event.kind == "user_msg":
                text = event.payload.get("text", "")
                if not problem_text:
                    problem_text = text
                elif text.strip():
                    transcript.append(ChatMessage(Role.USER, text))
            elif event.kind == "orchestrator_msg":
                text = event.payload.get("text", "")
                if text.strip():
                    transcript.append(ChatMessage(Role.ASSISTANT, text))
                if not event.payload.get("error"):
                    constraints = list(event.payload.get("constraints", constraints))
                    rounds += 1
            elif event.kind == "plan_proposed":
                constraints = list(event.payload.get("constraints", constraints))
        problem = ProblemStatement(
            id=f"p-{session_id[:12]}", text=problem_text or "(empty)", constraints=tuple(constraints)
        )
        # The opening user turn seeds the transcript the same way a live
        # start_clarification call would have.
        if problem_text:
            transcript.insert(0, ChatMessage(Role.USER, problem_text))
        return ClarifyState(problem=problem, round=rounds, transcript=transcript)

    # -- operations --------------------------------------------------------

    def create_session(self, problem_text: str) -> str:
        if not problem_text or not problem_text.strip():
            raise ValueError("problem text must be non-empty")
        session_id = secrets.token_hex(16)
        self.store.create(session_id)
        self._append(session_id, "user_msg", {"text": problem_text})
        self._clarify[session_id] = ClarifyState(
            problem=ProblemStatement(id=f"p-{session_id[:12]}", text=problem_text)
        )
        return session_id

    def start_clarification(self, session_id: str) -> SessionView:
        """Run the first clarification round against the opening problem
        statement.  Composed with create_session by the API and CLI so the
        orchestrator speaks first, the way a conversation opens."""
        with self._lock_for(session_id):
            self._require(session_id)
            if self.phase_of(session_id) is not Phase.GATHERING:
                raise WrongPhase("clarification already finished")
            problem_text = self._clarify_state(session_id).problem.text
            self._gather_step(session_id, problem_text)
            return self.get_session(session_id)

    def post_message(self, session_id: str, text: str) -> SessionView:
        with self._lock_for(session_id):
            self._require(session_id)
            phase = self.phase_of(session_id)
            if phase in (Phase.DONE, Phase.FAILED):
                raise WrongPhase(f"session is {phase.value}; no further input expected")
            if phase in (Phase.EXECUTING, Phase.PLANNING):
                raise WrongPhase(f"session is {phase.value}; wait for it to finish")
            self._append(session_id, "user_msg", {"text": text})
            if phase is Phase.GATHERING:
                self._gather_step(session_id, text)
            else:
                self._approval_step(session_id, text)
            return self.get_session(session_id)

    def get_session(self, session_id: str) -> SessionView:
        self._require(session_id)
        events = self.store.events(session_id)
        answer = None
        for event in reversed(events):
            if event.kind == "final_answer":
                answer = dict(event.payload)
                break
        plan = self._current_plan(session_id)
        transient = self._transient.get(session_id)
        return SessionView(
            id=session_id,
            phase=transient if transient is not None else derive_phase(events),
            last_seq=events[-1].seq if events else 0,
            plan=plan.to_dict() if plan else None,
            final_answer=answer,
        )

    def get_events(
        self, session_id: str, since_seq: int = 0, wait_ms: int = 0
    ) -> list[SessionEvent]:
        self._require(session_id)
        events = self.store.events(session_id, since_seq)
        if events or wait_ms <= 0:
            return events
        deadline = now_ms() + wait_ms
        with self._new_event:
            while True:
                events = self.store.events(session_id, since_seq)
                if events:
                    return events
                remaining = deadline - now_ms()
                if remaining <= 0:
                    return []
                self._new_event.wait(remaining / 1000.0)

    def wait_until_settled(self, session_id: str, timeout_s: float = 60.0) -> Phase:
        """Block until any background execution for this session finishes."""
        thread = self._executors.get(session_id)
        if thread is not None:
            thread.join(timeout_s)
        return self.phase_of(session_id)

    # -- internals ---------------------------------------------------------

    def _gather_step(self, session_id: str, text: str) -> None:
        state = self._clarify_state(session_id)
        try:
            outcome = self.orchestrator.elicit(state, text)
        except GatewayError as exc:
            self._append(
                session_id,
                "orchestrator_msg",
                {"text": f"The planning backend is unavailable: {exc}", "error": True},
            )
            return
        if outcome.kind is ClarificationKind.NEEDS_QUESTIONS:
            self._append(
                session_id,
                "orchestrator_msg",
                {
                    "text": "\n".join(outcome.questions),
                    "questions": list(outcome.questions),
                    "constraints": list(outcome.updated_constraints),
                },
            )
            return
        self._propose_plan(session_id, state.problem, revision_notes=None)

    def _propose_plan(
        self,
        session_id: str,
        problem: ProblemStatement,
        revision_notes: str | None,
    ) -> None:
        self._transient[session_id] = Phase.PLANNING
        try:
            plan = self.orchestrator.decompose(
                problem, self.registry, revision_notes=revision_notes
            )
        except DecompositionFailed as exc:
            self._append(
                session_id,
                "orchestrator_msg",
                {
                    "text": f"I could not produce a usable plan: {exc.reason}",
                    "error": True,
                },
            )
            return
        except GatewayError as exc:
            self._append(
                session_id,
                "orchestrator_msg",
                {"text": f"The planning backend is unavailable: {exc}", "error": True},
            )
            return
        finally:
            self._transient.pop(session_id, None)
        self._append(
            session_id,
            "plan_proposed",
            {"plan": plan.to_dict(), "constraints": list(problem.constraints)},
        )

    def _approval_step(self, session_id: str, text: str) -> None:
        plan = self._current_plan(session_id)
        assert plan is not None  # phase awaiting_approval implies a proposal
        outcome = confirm_plan(plan, text)
        state = self._clarify_state(session_id)
        if outcome.decision is Decision.APPROVED:
            # The accepting reply usually carries the user's pick; keep it
            # as a constraint so synthesis sees it.
            if outcome.notes.strip():
                state.problem = state.problem.with_constraints([outcome.notes])
            self._append(session_id, "plan_approved", {"note": outcome.notes})
            self._start_execution(session_id, plan, state.problem)
            return
        self._propose_plan(session_id, state.problem, revision_notes=outcome.notes or None)

    def _start_execution(
        self, session_id: str, plan: DecompositionPlan, problem: ProblemStatement
    ) -> None:
        def run() -> None:
            try:
                trace = execute(
                    plan,
                    self.registry,
                    self.gateway,
                    toolbox=self.toolbox,
                    config=self.exec_config,
                    on_event=lambda ev: self._append(
                        session_id,
                        "task_event",
                        {"id": ev.subproblem_id, "transition": ev.transition, "ts": ev.ts},
                    ),
                )
                answer = self.orchestrator.aggregate(plan, trace.records, problem=problem)
                self._append(session_id, "final_answer", answer.to_dict())
            except Exception as exc:  # noqa: BLE001 - a session must always settle
                log.exception("execution for session %s blew up", session_id)
                self._append(
                    session_id,
                    "final_answer",
                    {
                        "text": f"Execution aborted: {type(exc).__name__}: {exc}",
                        "per_subproblem": {},
                        "complete": False,
                    },
                )

        thread = threading.Thread(target=run, daemon=True, name=f"exec-{session_id[:8]}")
        self._executors[session_id] = thread
        thread.start()

    def list_sessions(self) -> list[SessionView]:
        return [self.get_session(sid) for sid in self.store.ids()]
