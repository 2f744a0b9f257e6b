import { describe, expect, it } from "vitest";

import { stages } from "../src/stages";
import type { Plan, Subproblem } from "../src/types";

function sub(id: string, deps: string[] = []): Subproblem {
  return {
    id,
    description: `task ${id}`,
    domain_tags: ["general"],
    depends_on: deps,
    assignee: null,
    inputs: {},
  };
}

function plan(subs: Subproblem[]): Plan {
  return { problem_id: "p", rationale: "r", subproblems: subs };
}

describe("stages", () => {
  it("layers a chain one node per stage", () => {
    const layout = stages(plan([sub("a"), sub("b", ["a"]), sub("c", ["b"])]));
    expect(layout).toEqual([["a"], ["b"], ["c"]]);
  });

  it("puts independent nodes in one stage, sorted", () => {
    const layout = stages(plan([sub("z"), sub("a"), sub("m")]));
    expect(layout).toEqual([["a", "m", "z"]]);
  });

  it("layers the diamond by longest path", () => {
    const layout = stages(
      plan([sub("a"), sub("b", ["a"]), sub("c", ["a"]), sub("d", ["b", "c"])]),
    );
    expect(layout).toEqual([["a"], ["b", "c"], ["d"]]);
  });

  it("uses the longest path, not the shortest", () => {
    // d depends on both a (depth 0) and c (depth 2): d lands at depth 3
    const layout = stages(
      plan([sub("a"), sub("b", ["a"]), sub("c", ["b"]), sub("d", ["a", "c"])]),
    );
    expect(layout).toEqual([["a"], ["b"], ["c"], ["d"]]);
  });

  it("matches the flight-booking plan shape", () => {
    const layout = stages(
      plan([
        sub("flight_search"),
        sub("amenity_preferences", ["flight_search"]),
        sub("booking", ["flight_search", "amenity_preferences"]),
      ]),
    );
    expect(layout).toEqual([["flight_search"], ["amenity_preferences"], ["booking"]]);
  });

  it("throws on cycles and unknown deps", () => {
    expect(() => stages(plan([sub("a", ["b"]), sub("b", ["a"])]))).toThrow(/cycle/);
    expect(() => stages(plan([sub("a", ["ghost"])]))).toThrow(/unknown/);
  });

  it("agrees with a memo-free depth oracle on random DAGs", () => {
    // deterministic LCG so the case set is stable
    let state = 12345;
    const rand = (n: number): number => {
      state = (state * 1103515245 + 12345) % 2147483648;
      return state % n;
    };
    for (let caseNo = 0; caseNo < 200; caseNo++) {
      const n = 1 + rand(8);
      const subs: Subproblem[] = [];
      const ids: string[] = [];
      for (let i = 0; i < n; i++) {
        const id = `t${i}`;
        const deps: string[] = [];
        for (let j = 0; j < i; j++) if (rand(3) === 0) deps.push(ids[j]!);
        subs.push(sub(id, deps));
        ids.push(id);
      }
      const depthOf = (id: string): number => {
        const deps = subs.find((s) => s.id === id)!.depends_on;
        return deps.length === 0 ? 0 : 1 + Math.max(...deps.map(depthOf));
      };
      const layout = stages(plan(subs));
      for (const id of ids) {
        expect(layout[depthOf(id)]).toContain(id);
      }
      expect(layout.flat().sort()).toEqual([...ids].sort());
    }
  });
});
