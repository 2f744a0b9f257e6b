// Longest-path layering for the plan DAG, matching how the scheduler
// groups work: stage k holds every subproblem whose deepest chain of
// prerequisites has length k.  Columns render left to right in this order.

import type { Plan } from "./types";

export function stages(plan: Plan): string[][] {
  const deps = new Map<string, string[]>();
  for (const sub of plan.subproblems) {
    deps.set(sub.id, sub.depends_on);
  }
  const depth = new Map<string, number>();
  const visiting = new Set<string>();

  const walk = (id: string): number => {
    const known = depth.get(id);
    if (known !== undefined) return known;
    if (visiting.has(id)) throw new Error(`cycle through '${id}'`);
    visiting.add(id);
    const ds = deps.get(id);
    if (ds === undefined) throw new Error(`unknown dependency '${id}'`);
    const d = ds.length === 0 ? 0 : 1 + Math.max(...ds.map(walk));
    visiting.delete(id);
    depth.set(id, d);
    return d;
  };

  const layers: string[][] = [];
  for (const sub of plan.subproblems) {
    const d = walk(sub.id);
    while (layers.length <= d) layers.push([]);
    layers[d]!.push(sub.id);
  }
  for (const layer of layers) layer.sort();
  return layers;
}
