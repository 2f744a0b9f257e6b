// Pure fold from the event log to everything the page shows.  The console
// holds no other state, so replaying the same events always rebuilds the
// same view, and a prefix of the log never shows anything from its future.

import type { FinalAnswer, Phase, Plan, SessionEvent } from "./types";

export type TaskStatus = "pending" | "running" | "solved" | "failed" | "cancelled";

export interface ChatMessage {
  role: "user" | "orchestrator";
  text: string;
  error: boolean;
}

export interface SessionViewModel {
  phase: Phase;
  messages: ChatMessage[];
  plan: Plan | null;
  tasks: Record<string, TaskStatus>;
  finalAnswer: FinalAnswer | null;
  lastSeq: number;
}

export function emptyViewModel(): SessionViewModel {
  return {
    phase: "gathering",
    messages: [],
    plan: null,
    tasks: {},
    finalAnswer: null,
    lastSeq: 0,
  };
}

export function reduce(events: readonly SessionEvent[]): SessionViewModel {
  const vm = emptyViewModel();
  for (const event of events) {
    applyEvent(vm, event);
  }
  return vm;
}

function applyEvent(vm: SessionViewModel, event: SessionEvent): void {
  const p = event.payload;
  switch (event.kind) {
    case "user_msg":
      vm.messages.push({ role: "user", text: String(p.text ?? ""), error: false });
      break;
    case "orchestrator_msg":
      vm.messages.push({
        role: "orchestrator",
        text: String(p.text ?? ""),
        error: p.error === true,
      });
      break;
    case "plan_proposed": {
      // a re-proposal replaces the old plan and its badges atomically
      const plan = p.plan as Plan;
      vm.plan = plan;
      vm.tasks = {};
      for (const sub of plan.subproblems) {
        vm.tasks[sub.id] = "pending";
      }
      vm.phase = "awaiting_approval";
      break;
    }
    case "plan_approved":
      vm.phase = "executing";
      break;
    case "task_event":
      vm.tasks[String(p.id)] = p.transition as TaskStatus;
      break;
    case "final_answer": {
      const answer: FinalAnswer = {
        text: String(p.text ?? ""),
        complete: p.complete === true,
      };
      vm.finalAnswer = answer;
      vm.phase = answer.complete ? "done" : "failed";
      break;
    }
  }
  vm.lastSeq = event.seq;
}
