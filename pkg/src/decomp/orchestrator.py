"""Orchestration brain: clarify, decompose, route, confirm, synthesize.

The orchestrator drives one session through its phases using a single
orchestration backend for its own reasoning.  Specialized agents are never
called from here; executing the plan is the scheduler's job.  The only
shared mutable state between concurrently orchestrated sessions is the
gateway, which is safe to call from many threads.

LLM output is untrusted: plan JSON is extracted tolerantly from prose or
code fences, validated against the registry, and re-requested (with the
failure reason quoted back) a bounded number of times before giving up.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Mapping, Sequence

from .gateway import ChatMessage, ChatRequest, Gateway, Role
from .model import (
    AssigneeKind,
    AssigneeRef,
    DecompositionPlan,
    ProblemStatement,
    Registry,
    SubproblemSpec,
    TaskRecord,
    TaskStatus,
    TERMINAL_STATUSES,
    validate_plan,
)


class OrchestratorError(Exception):
    pass


class DecompositionFailed(OrchestratorError):
    def __init__(self, reason: str, raw: str):
        super().__init__(f"decomposition failed: {reason}")
        self.reason = reason
        self.raw = raw


class NoCandidate(OrchestratorError):
    def __init__(self, subproblem_id: str):
        super().__init__(f"no assignee candidate for subproblem '{subproblem_id}'")


class ClarificationKind(str, Enum):
    NEEDS_QUESTIONS = "needs_questions"
    READY = "ready"


@dataclass(frozen=True)
class ClarificationOutcome:
    kind: ClarificationKind
    questions: tuple[str, ...] = ()
    updated_constraints: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        has_questions = bool(self.questions)
        needs = self.kind is ClarificationKind.NEEDS_QUESTIONS
        if has_questions != needs:
            raise ValueError("questions must be non-empty iff kind is needs_questions")


@dataclass
class ClarifyState:
    """Working state for one session's clarification loop.  Owned by the
    caller (one session, one logical writer); elicit mutates it in place."""

    problem: ProblemStatement
    round: int = 0
    transcript: list[ChatMessage] = field(default_factory=list)


@dataclass(frozen=True)
class AssigneeScore:
    candidate_id: str
    kind: AssigneeKind
    score: float
    matched_tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be within [0, 1]")


class Decision(str, Enum):
    APPROVED = "approved"
    REVISE = "revise"


@dataclass(frozen=True)
class ConfirmationOutcome:
    decision: Decision
    notes: str = ""


@dataclass(frozen=True)
class FinalAnswer:
    text: str
    per_subproblem: Mapping[str, str]
    complete: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "per_subproblem": dict(self.per_subproblem),
            "complete": self.complete,
        }


@dataclass(frozen=True)
class ParseFailure:
    reason: str


REASK_QUESTION = "Could you tell me a bit more about what you need?"

# Plan confirmation lexicon.  Single words match on word boundaries so that
# e.g. "no" does not fire inside "now"; phrases match as plain substrings.
AFFIRMATIVE_MARKERS = ("yes", "ok", "confirm", "book it", "i'll take")
NEGATIVE_MARKERS = ("no", "change", "cancel", "wait")


class PromptLibrary:
    """Loads prompt templates and few-shot exemplars.

    Templates ship inside the package; a prompt_dir override lets a
    deployment swap any of them by file name without touching code.
    """

    EXEMPLARS = ("exemplar_travel.json", "exemplar_research.json")

    def __init__(self, prompt_dir: str | None = None):
        self._override = Path(prompt_dir) if prompt_dir else None

    def text(self, name: str) -> str:
        if self._override is not None:
            candidate = self._override / name
            if candidate.exists():
                return candidate.read_text(encoding="utf-8")
        return (resources.files("decomp") / "prompts" / name).read_text(encoding="utf-8")

    def render(self, name: str, **subs: str) -> str:
        return Template(self.text(name)).substitute(subs)

    def exemplar_block(self) -> str:
        parts = []
        for name in self.EXEMPLARS:
            raw = json.loads(self.text(name))
            parts.append(
                "Example request:\n"
                + raw["problem"]
                + "\nExample plan:\n"
                + json.dumps(raw["plan"], indent=2)
            )
        return "\n\n".join(parts) + "\n\n"


def catalog_text(registry: Registry) -> str:
    lines = ["Agents:"]
    for agent in registry.agents.values():
        lines.append(
            f"- {agent.id} (tags: {', '.join(agent.domain_tags)}): {agent.display_name}"
        )
    if not registry.agents:
        lines.append("- none")
    lines.append("Tools:")
    for tool in registry.tools.values():
        lines.append(
            f"- {tool.id} (tags: {', '.join(tool.domain_tags)}): {tool.description}"
        )
    if not registry.tools:
        lines.append("- none")
    return "\n".join(lines)


def first_json_object(text: str) -> str | None:
    """Extract the first balanced JSON object from free text, tolerating
    surrounding prose and markdown fences.  Returns the raw span or None."""
    for start, ch in enumerate(text):
        if ch != "{":
            continue
        depth = 0
        in_string = False
        escaped = False
        for idx in range(start, len(text)):
            c = text[idx]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
                continue
            if c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    span = text[start : idx + 1]
                    try:
                        json.loads(span)
                    except json.JSONDecodeError:
                        break
                    return span
        # unbalanced or invalid from this '{'; try the next one
    return None


def parse_plan_output(raw: str) -> DecompositionPlan | ParseFailure:
    """Decode an LLM reply into a plan, or say precisely why it cannot be."""
    span = first_json_object(raw)
    if span is None:
        return ParseFailure("no JSON object found in the reply")
    data = json.loads(span)
    if not isinstance(data, dict):
        return ParseFailure("top-level JSON value is not an object")
    try:
        return DecompositionPlan.from_dict(data)
    except ValueError as exc:
        return ParseFailure(str(exc))


def score_assignees(sub: SubproblemSpec, registry: Registry) -> list[AssigneeScore]:
    """Tag-overlap score for every registered worker, in id order."""
    tags = set(sub.domain_tags)
    scores: list[AssigneeScore] = []
    for agent in registry.agents.values():
        matched = tuple(t for t in sub.domain_tags if t in set(agent.domain_tags))
        scores.append(
            AssigneeScore(
                candidate_id=agent.id,
                kind=AssigneeKind.LLM_AGENT,
                score=len(matched) / len(tags) if tags else 0.0,
                matched_tags=matched,
            )
        )
    for tool in registry.tools.values():
        matched = tuple(t for t in sub.domain_tags if t in set(tool.domain_tags))
        scores.append(
            AssigneeScore(
                candidate_id=tool.id,
                kind=AssigneeKind.TOOL,
                score=len(matched) / len(tags) if tags else 0.0,
                matched_tags=matched,
            )
        )
    return sorted(scores, key=lambda s: s.candidate_id)


def pick_best(scores: Sequence[AssigneeScore]) -> AssigneeScore | None:
    """Highest score wins; a tool outranks an agent at equal score; remaining
    ties go to the lexicographically smallest id.  None when nothing scored."""
    contenders = [s for s in scores if s.score > 0.0]
    if not contenders:
        return None
    return min(
        contenders,
        key=lambda s: (-s.score, 0 if s.kind is AssigneeKind.TOOL else 1, s.candidate_id),
    )


def select_assignee(
    sub: SubproblemSpec, registry: Registry, default_agent_id: str | None = None
) -> AssigneeRef:
    best = pick_best(score_assignees(sub, registry))
    if best is not None:
        return AssigneeRef(kind=best.kind, id=best.candidate_id)
    if default_agent_id and default_agent_id in registry.agents:
        return AssigneeRef(kind=AssigneeKind.LLM_AGENT, id=default_agent_id)
    raise NoCandidate(sub.id)


def _word_or_phrase_match(reply_lower: str, marker: str) -> bool:
    if " " in marker or "'" in marker:
        return marker in reply_lower
    return re.search(rf"\b{re.escape(marker)}\b", reply_lower) is not None


def confirm_plan(plan: DecompositionPlan, user_reply: str) -> ConfirmationOutcome:
    """Map a free-text reply to approve/revise.  Negation wins over
    affirmation ("yes, but change the dates" is a revision request), and
    anything ambiguous is treated as a revision request, never an approval."""
    lower = user_reply.lower()
    if any(_word_or_phrase_match(lower, m) for m in NEGATIVE_MARKERS):
        return ConfirmationOutcome(Decision.REVISE, notes=user_reply)
    if any(_word_or_phrase_match(lower, m) for m in AFFIRMATIVE_MARKERS):
        return ConfirmationOutcome(Decision.APPROVED, notes=user_reply)
    return ConfirmationOutcome(Decision.REVISE, notes=user_reply)


@dataclass(frozen=True)
class OrchestratorConfig:
    backend_id: str
    temperature: float = 0.0
    max_rounds: int = 3
    max_reprompts: int = 2
    default_agent_id: str | None = None
    prompt_dir: str | None = None

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.max_reprompts < 0:
            raise ValueError("max_reprompts must be >= 0")


class Orchestrator:
    def __init__(self, gateway: Gateway, config: OrchestratorConfig):
        self.gateway = gateway
        self.config = config
        self.prompts = PromptLibrary(config.prompt_dir)

    def _ask(self, messages: Sequence[ChatMessage]) -> str:
        request = ChatRequest(
            backend_id=self.config.backend_id,
            messages=tuple(messages),
            temperature=self.config.temperature,
        )
        return self.gateway.complete(request).content

    # -- clarification ----------------------------------------------------

    def elicit(self, state: ClarifyState, user_message: str) -> ClarificationOutcome:
        """One clarification round.  Empty input re-asks without burning a
        round; hitting max_rounds degrades to ready instead of looping."""
        if not user_message.strip():
            return ClarificationOutcome(
                ClarificationKind.NEEDS_QUESTIONS,
                questions=(REASK_QUESTION,),
                updated_constraints=state.problem.constraints,
            )
        state.transcript.append(ChatMessage(Role.USER, user_message))
        if state.round >= self.config.max_rounds:
            return ClarificationOutcome(
                ClarificationKind.READY,
                updated_constraints=state.problem.constraints,
            )
        transcript_text = "\n".join(
            f"{'User' if m.role is Role.USER else 'Orchestrator'}: {m.content}"
            for m in state.transcript[:-1]
        )
        user_prompt = self.prompts.render(
            "clarify_user.txt",
            problem=state.problem.text,
            constraints="\n".join(f"- {c}" for c in state.problem.constraints) or "(none)",
            transcript=transcript_text or "(none)",
            message=user_message,
        )
        reply = self._ask(
            [
                ChatMessage(Role.SYSTEM, self.prompts.text("clarify_system.txt")),
                ChatMessage(Role.USER, user_prompt),
            ]
        )
        state.round += 1
        state.transcript.append(ChatMessage(Role.ASSISTANT, reply))
        outcome = self._read_clarifier_reply(reply, state.problem.constraints)
        state.problem = state.problem.with_constraints(outcome.updated_constraints)
        return outcome

    def _read_clarifier_reply(
        self, reply: str, prior: tuple[str, ...]
    ) -> ClarificationOutcome:
        span = first_json_object(reply)
        if span is not None:
            data = json.loads(span)
            status = data.get("status") if isinstance(data, dict) else None
            if status == "ready":
                extra = [c for c in data.get("constraints", []) if isinstance(c, str)]
                return ClarificationOutcome(
                    ClarificationKind.READY,
                    updated_constraints=prior + tuple(extra),
                )
            if status == "questions":
                questions = tuple(
                    q for q in data.get("questions", []) if isinstance(q, str) and q.strip()
                )
                if questions:
                    return ClarificationOutcome(
                        ClarificationKind.NEEDS_QUESTIONS,
                        questions=questions,
                        updated_constraints=prior,
                    )
        # A prose reply is taken at face value: it IS the follow-up question.
        return ClarificationOutcome(
            ClarificationKind.NEEDS_QUESTIONS,
            questions=(reply.strip() or REASK_QUESTION,),
            updated_constraints=prior,
        )

    # -- decomposition -----------------------------------------------------

    def decompose(
        self,
        problem: ProblemStatement,
        registry: Registry,
        revision_notes: str | None = None,
    ) -> DecompositionPlan:
        """Ask the orchestration backend for a plan, re-asking up to
        max_reprompts times with the failure reason quoted verbatim."""
        revision = (
            f"Revision notes from the user:\n{revision_notes}\n\n" if revision_notes else ""
        )
        user_prompt = self.prompts.render(
            "decompose_user.txt",
            problem=problem.text,
            constraints="\n".join(f"- {c}" for c in problem.constraints) or "(none)",
            catalog=catalog_text(registry),
            exemplars=self.prompts.exemplar_block(),
            revision=revision,
        )
        messages: list[ChatMessage] = [
            ChatMessage(
                Role.SYSTEM,
                self.prompts.render(
                    "decompose_system.txt", schema=self.prompts.text("plan_schema.txt")
                ),
            ),
            ChatMessage(Role.USER, user_prompt),
        ]
        reason = "no attempt made"
        raw = ""
        for _ in range(self.config.max_reprompts + 1):
            raw = self._ask(messages)
            parsed = parse_plan_output(raw)
            if isinstance(parsed, ParseFailure):
                reason = parsed.reason
            else:
                plan, fill_errors = self._fill_assignees(parsed, registry)
                report = validate_plan(plan, registry)
                problems = fill_errors + report.messages()
                if not problems:
                    return plan
                reason = "; ".join(problems)
            messages.append(ChatMessage(Role.ASSISTANT, raw))
            messages.append(
                ChatMessage(Role.USER, self.prompts.render("reprompt.txt", reason=reason))
            )
        raise DecompositionFailed(reason=reason, raw=raw)

    def _fill_assignees(
        self, plan: DecompositionPlan, registry: Registry
    ) -> tuple[DecompositionPlan, list[str]]:
        """Honor a valid assignee from the model; route the rest through
        tag scoring.  Unroutable subproblems come back as error strings so
        the reprompt can name them."""
        errors: list[str] = []
        filled: list[SubproblemSpec] = []
        for sub in plan.subproblems:
            assignee = sub.assignee
            valid = (
                assignee is not None
                and registry.kind_of(assignee.id) is assignee.kind
            )
            if not valid:
                try:
                    assignee = select_assignee(
                        sub, registry, self.config.default_agent_id
                    )
                except NoCandidate:
                    errors.append(f"no routable assignee for subproblem '{sub.id}'")
                    assignee = sub.assignee
            if assignee is sub.assignee:
                filled.append(sub)
            else:
                filled.append(
                    SubproblemSpec(
                        id=sub.id,
                        description=sub.description,
                        domain_tags=sub.domain_tags,
                        depends_on=sub.depends_on,
                        assignee=assignee,
                        inputs=sub.inputs,
                    )
                )
        if any(s.assignee is None for s in filled):
            unassigned = [s.id for s in filled if s.assignee is None]
            for sub_id in unassigned:
                msg = f"no routable assignee for subproblem '{sub_id}'"
                if msg not in errors:
                    errors.append(msg)
        return (
            DecompositionPlan(plan.problem_id, tuple(filled), plan.rationale),
            errors,
        )

    # -- synthesis ---------------------------------------------------------

    def aggregate(
        self,
        plan: DecompositionPlan,
        task_records: Mapping[str, TaskRecord],
        problem: ProblemStatement | None = None,
    ) -> FinalAnswer:
        """Fold terminal task records into one answer.  All solved: one
        synthesis call.  Anything failed or cancelled: a deterministic gap
        summary with no LLM call, flagged incomplete."""
        for sub in plan.subproblems:
            record = task_records.get(sub.id)
            if record is None or record.status not in TERMINAL_STATUSES:
                raise ValueError(f"subproblem '{sub.id}' is not terminal")
        solved = {
            sub.id: task_records[sub.id].solution or ""
            for sub in plan.subproblems
            if task_records[sub.id].status is TaskStatus.SOLVED
        }
        if len(solved) == len(plan.subproblems):
            solutions_text = "\n\n".join(
                f"[{sub.id}] {sub.description}\n{solved[sub.id]}"
                for sub in plan.subproblems
            )
            reply = self._ask(
                [
                    ChatMessage(Role.SYSTEM, self.prompts.text("synthesize_system.txt")),
                    ChatMessage(
                        Role.USER,
                        self.prompts.render(
                            "synthesize_user.txt",
                            problem=problem.text if problem else plan.rationale or plan.problem_id,
                            solutions=solutions_text,
                        ),
                    ),
                ]
            )
            return FinalAnswer(text=reply, per_subproblem=solved, complete=True)
        lines = [
            f"Execution incomplete: {len(plan.subproblems) - len(solved)} of "
            f"{len(plan.subproblems)} subproblems did not finish."
        ]
        for sub in plan.subproblems:
            record = task_records[sub.id]
            if record.status is TaskStatus.FAILED:
                lines.append(f"- {sub.id} failed: {record.error}")
            elif record.status is TaskStatus.CANCELLED:
                lines.append(f"- {sub.id} was cancelled")
        if solved:
            lines.append("Partial results are available for: " + ", ".join(sorted(solved)) + ".")
        return FinalAnswer(text="\n".join(lines), per_subproblem=solved, complete=False)
