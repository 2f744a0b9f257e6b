// Reducer tests against a captured session log plus handcrafted flows.
// The core property: the view model is a pure fold, so any prefix of the
// log shows exactly the state known at that point and nothing later.

import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { reduce } from "../src/viewmodel";
import type { Plan, SessionEvent } from "../src/types";

const FLOW: SessionEvent[] = JSON.parse(
  readFileSync(
    fileURLToPath(new URL("./fixtures/research_flow_events.json", import.meta.url)),
    "utf-8",
  ),
);

function ev(seq: number, kind: SessionEvent["kind"], payload: Record<string, unknown>): SessionEvent {
  return { seq, ts: 1000 + seq, kind, payload };
}

const PLAN_A: Plan = {
  problem_id: "p",
  rationale: "first try",
  subproblems: [
    {
      id: "alpha",
      description: "do alpha",
      domain_tags: ["general"],
      depends_on: [],
      assignee: { kind: "llm_agent", id: "helper" },
      inputs: {},
    },
  ],
};

const PLAN_B: Plan = {
  problem_id: "p",
  rationale: "after revision",
  subproblems: [
    {
      id: "beta",
      description: "do beta instead",
      domain_tags: ["general"],
      depends_on: [],
      assignee: { kind: "tool", id: "calculator" },
      inputs: {},
    },
  ],
};

describe("reduce on the captured research flow", () => {
  it("walks the phases in order", () => {
    const phases = FLOW.map((_, i) => reduce(FLOW.slice(0, i + 1)).phase);
    expect(phases[0]).toBe("gathering");
    expect(phases[1]).toBe("awaiting_approval");
    expect(phases[3]).toBe("executing");
    expect(phases[phases.length - 1]).toBe("done");
  });

  it("fills the status board in event order", () => {
    const vm = reduce(FLOW);
    expect(vm.tasks).toEqual({
      literature_review: "solved",
      analysis: "solved",
      writing: "solved",
    });
    // halfway through execution only the first task has finished
    const partial = reduce(FLOW.slice(0, 6));
    expect(partial.tasks.literature_review).toBe("solved");
    expect(partial.tasks.analysis).toBe("pending");
    expect(partial.tasks.writing).toBe("pending");
  });

  it("never shows later state from a prefix", () => {
    for (let i = 0; i < FLOW.length; i++) {
      const vm = reduce(FLOW.slice(0, i));
      const finalSeen = FLOW.slice(0, i).some((e) => e.kind === "final_answer");
      expect(vm.finalAnswer !== null).toBe(finalSeen);
      const planSeen = FLOW.slice(0, i).some((e) => e.kind === "plan_proposed");
      expect(vm.plan !== null).toBe(planSeen);
      expect(vm.lastSeq).toBe(i === 0 ? 0 : FLOW[i - 1]!.seq);
    }
  });

  it("is deterministic: same events, same view model", () => {
    expect(JSON.stringify(reduce(FLOW))).toBe(JSON.stringify(reduce(FLOW)));
  });

  it("keeps the chat transcript in order", () => {
    const vm = reduce(FLOW);
    expect(vm.messages[0]!.role).toBe("user");
    expect(vm.messages[0]!.text).toContain("long-term memory");
    expect(vm.messages[1]!.text).toBe("yes");
  });
});

describe("reduce on handcrafted flows", () => {
  it("treats a re-proposed plan as an atomic replacement", () => {
    const events = [
      ev(1, "user_msg", { text: "problem" }),
      ev(2, "plan_proposed", { plan: PLAN_A, constraints: [] }),
      ev(3, "user_msg", { text: "no, change it" }),
      ev(4, "plan_proposed", { plan: PLAN_B, constraints: [] }),
    ];
    const before = reduce(events.slice(0, 2));
    expect(before.plan?.rationale).toBe("first try");
    expect(before.tasks).toEqual({ alpha: "pending" });

    const after = reduce(events);
    expect(after.phase).toBe("awaiting_approval");
    expect(after.plan?.rationale).toBe("after revision");
    expect(after.tasks).toEqual({ beta: "pending" }); // no stale alpha badge
  });

  it("marks an incomplete final answer as failed", () => {
    const events = [
      ev(1, "user_msg", { text: "p" }),
      ev(2, "plan_proposed", { plan: PLAN_A, constraints: [] }),
      ev(3, "plan_approved", {}),
      ev(4, "task_event", { id: "alpha", transition: "running" }),
      ev(5, "task_event", { id: "alpha", transition: "failed" }),
      ev(6, "final_answer", { text: "Execution incomplete: 1 of 1 subproblems", complete: false }),
    ];
    const vm = reduce(events);
    expect(vm.phase).toBe("failed");
    expect(vm.tasks.alpha).toBe("failed");
    expect(vm.finalAnswer?.complete).toBe(false);
  });

  it("flags orchestrator error messages", () => {
    const events = [
      ev(1, "user_msg", { text: "p" }),
      ev(2, "orchestrator_msg", { text: "backend unavailable", error: true }),
    ];
    const vm = reduce(events);
    expect(vm.phase).toBe("gathering"); // still recoverable
    expect(vm.messages[1]!.error).toBe(true);
  });

  it("starts empty", () => {
    const vm = reduce([]);
    expect(vm.phase).toBe("gathering");
    expect(vm.lastSeq).toBe(0);
    expect(vm.plan).toBeNull();
    expect(vm.finalAnswer).toBeNull();
  });
});
