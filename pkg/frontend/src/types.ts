// Wire types for the session-service JSON API.

export type Phase =
  | "gathering"
  | "planning"
  | "awaiting_approval"
  | "executing"
  | "done"
  | "failed";

export type AssigneeKind = "llm_agent" | "tool";

export interface AssigneeRef {
  kind: AssigneeKind;
  id: string;
}

export interface Subproblem {
  id: string;
  description: string;
  domain_tags: string[];
  depends_on: string[];
  assignee: AssigneeRef | null;
  inputs: Record<string, string>;
}

export interface Plan {
  problem_id: string;
  rationale: string;
  subproblems: Subproblem[];
}

export type EventKind =
  | "user_msg"
  | "orchestrator_msg"
  | "plan_proposed"
  | "plan_approved"
  | "task_event"
  | "final_answer";

export interface SessionEvent {
  seq: number;
  ts: number;
  kind: EventKind;
  // payload shape depends on kind; reduce() narrows it
  payload: Record<string, unknown>;
}

export interface FinalAnswer {
  text: string;
  complete: boolean;
}

export interface SessionView {
  id: string;
  phase: Phase;
  last_seq: number;
  plan: Plan | null;
  final_answer: FinalAnswer | null;
}
