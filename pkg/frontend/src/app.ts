// The console page: a chat pane for clarification, the proposed plan as a
// layered DAG with approve / request-changes controls, a live status board,
// and the final answer.  Everything renders from the event log alone, so a
// reload that replays the same events paints the same page.

import { ApiClient } from "./api";
import { followEvents, type Follower, type FollowOptions } from "./follow";
import { stages } from "./stages";
import { emptyViewModel, reduce, type SessionViewModel } from "./viewmodel";
import type { SessionEvent, Subproblem } from "./types";

const NODE_W = 160;
const NODE_H = 56;
const COL_GAP = 48;
const ROW_GAP = 24;

export interface AppOptions extends FollowOptions {
  onSession?: (id: string) => void; // fires when a session is attached
}

export class ConsoleApp {
  sessionId: string | null = null;
  events: SessionEvent[] = [];
  vm: SessionViewModel = emptyViewModel();

  private follower: Follower | null = null;
  private lastAction: (() => Promise<void>) | null = null;
  private readonly el: Record<string, HTMLElement>;

  constructor(
    readonly root: HTMLElement,
    readonly client: ApiClient,
    readonly options: AppOptions = {},
  ) {
    root.innerHTML = SKELETON;
    const grab = (id: string): HTMLElement => {
      const node = root.querySelector<HTMLElement>(`[data-testid="${id}"]`);
      if (!node) throw new Error(`skeleton is missing ${id}`);
      return node;
    };
    this.el = {
      problemForm: grab("problem-form"),
      problemInput: grab("problem-input"),
      problemSubmit: grab("problem-submit"),
      banner: grab("error-banner"),
      bannerText: grab("error-text"),
      retry: grab("retry-button"),
      chat: grab("chat-pane"),
      replyForm: grab("reply-form"),
      replyInput: grab("reply-input"),
      replySend: grab("reply-send"),
      planPane: grab("plan-pane"),
      planRationale: grab("plan-rationale"),
      planGraph: grab("plan-graph"),
      approve: grab("approve-button"),
      reviseInput: grab("revise-input"),
      revise: grab("revise-button"),
      board: grab("status-board"),
      answer: grab("answer-pane"),
    };
    this.bind();
    this.render();
  }

  destroy(): void {
    this.follower?.stop();
    this.follower = null;
  }

  /** Start a brand-new session from a problem statement. */
  async startSession(problem: string): Promise<void> {
    await this.action(async () => {
      const view = await this.client.createSession(problem);
      this.attach(view.id);
    });
  }

  /** Attach to an existing session (the reload path): replay, then follow. */
  openSession(id: string): void {
    this.attach(id);
  }

  private attach(id: string): void {
    this.follower?.stop();
    this.sessionId = id;
    this.events = [];
    this.vm = emptyViewModel();
    this.follower = followEvents(
      this.client,
      id,
      0,
      (batch) => this.ingest(batch),
      () => this.vm.phase === "done" || this.vm.phase === "failed",
      this.options,
    );
    this.render();
    this.options.onSession?.(id);
  }

  private ingest(batch: SessionEvent[]): void {
    for (const event of batch) {
      if (event.seq !== this.events.length + 1) {
        throw new Error(`event gap: got seq ${event.seq} after ${this.events.length}`);
      }
      this.events.push(event);
    }
    this.vm = reduce(this.events);
    this.render();
  }

  private bind(): void {
    this.el.problemInput!.addEventListener("input", () => this.syncControls());
    this.el.problemForm!.addEventListener("submit", (e) => {
      e.preventDefault();
      const text = (this.el.problemInput as HTMLInputElement).value.trim();
      if (text !== "" && this.sessionId === null) void this.startSession(text);
    });
    this.el.replyForm!.addEventListener("submit", (e) => {
      e.preventDefault();
      const input = this.el.replyInput as HTMLInputElement;
      const text = input.value.trim();
      if (text === "" || this.sessionId === null) return;
      input.value = "";
      void this.post(text);
    });
    this.el.approve!.addEventListener("click", () => void this.post("yes"));
    this.el.revise!.addEventListener("click", () => {
      const input = this.el.reviseInput as HTMLTextAreaElement;
      const text = input.value.trim();
      if (text === "") return;
      input.value = "";
      void this.post(text);
    });
    this.el.retry!.addEventListener("click", () => {
      if (this.lastAction) void this.lastAction();
    });
  }

  private async post(text: string): Promise<void> {
    await this.action(async () => {
      if (this.sessionId === null) return;
      await this.client.postMessage(this.sessionId, text);
      this.follower?.nudge();
    });
  }

  // one user action, one API call; failures land in the banner with retry
  private async action(fn: () => Promise<void>): Promise<void> {
    this.lastAction = fn;
    try {
      await fn();
      this.hideBanner();
    } catch (err) {
      this.showBanner(err instanceof Error ? err.message : String(err));
    }
  }

  private showBanner(message: string): void {
    this.el.bannerText!.textContent = message;
    this.el.banner!.hidden = false;
  }

  private hideBanner(): void {
    this.el.banner!.hidden = true;
    this.el.bannerText!.textContent = "";
  }

  // -- rendering, idempotent from this.vm --------------------------------

  private render(): void {
    this.renderChat();
    this.renderPlan();
    this.renderBoard();
    this.renderAnswer();
    this.syncControls();
  }

  private syncControls(): void {
    const phase = this.vm.phase;
    const problemText = (this.el.problemInput as HTMLInputElement).value.trim();
    (this.el.problemSubmit as HTMLButtonElement).disabled =
      problemText === "" || this.sessionId !== null;
    (this.el.problemInput as HTMLInputElement).disabled = this.sessionId !== null;

    const replying = this.sessionId !== null && phase === "gathering";
    (this.el.replyInput as HTMLInputElement).disabled = !replying;
    (this.el.replySend as HTMLButtonElement).disabled = !replying;

    const approving = phase === "awaiting_approval";
    (this.el.approve as HTMLButtonElement).disabled = !approving;
    (this.el.revise as HTMLButtonElement).disabled = !approving;
    (this.el.reviseInput as HTMLTextAreaElement).disabled = !approving;
  }

  private renderChat(): void {
    const chat = this.el.chat!;
    chat.innerHTML = "";
    for (const msg of this.vm.messages) {
      const div = document.createElement("div");
      div.className = `msg ${msg.role}${msg.error ? " error" : ""}`;
      div.textContent = msg.text;
      chat.appendChild(div);
    }
  }

  private renderPlan(): void {
    const pane = this.el.planPane!;
    const plan = this.vm.plan;
    if (!plan) {
      pane.hidden = true;
      return;
    }
    pane.hidden = false;
    this.el.planRationale!.textContent = plan.rationale;

    const layers = stages(plan);
    const col = new Map<string, number>();
    const row = new Map<string, number>();
    layers.forEach((layer, c) =>
      layer.forEach((id, r) => {
        col.set(id, c);
        row.set(id, r);
      }),
    );
    const width = layers.length * (NODE_W + COL_GAP);
    const height = Math.max(...layers.map((l) => l.length)) * (NODE_H + ROW_GAP);

    const graph = this.el.planGraph!;
    graph.innerHTML = "";
    graph.style.position = "relative";
    graph.style.width = `${width}px`;
    graph.style.height = `${height}px`;

    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("class", "plan-edges");
    svg.setAttribute("width", String(width));
    svg.setAttribute("height", String(height));
    for (const sub of plan.subproblems) {
      for (const dep of sub.depends_on) {
        const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
        line.setAttribute("data-edge", `${dep}->${sub.id}`);
        line.setAttribute("x1", String(col.get(dep)! * (NODE_W + COL_GAP) + NODE_W));
        line.setAttribute("y1", String(row.get(dep)! * (NODE_H + ROW_GAP) + NODE_H / 2));
        line.setAttribute("x2", String(col.get(sub.id)! * (NODE_W + COL_GAP)));
        line.setAttribute("y2", String(row.get(sub.id)! * (NODE_H + ROW_GAP) + NODE_H / 2));
        svg.appendChild(line);
      }
    }
    graph.appendChild(svg);

    for (const sub of plan.subproblems) {
      graph.appendChild(this.planNode(sub, col.get(sub.id)!, row.get(sub.id)!));
    }
  }

  private planNode(sub: Subproblem, c: number, r: number): HTMLElement {
    const node = document.createElement("div");
    node.className = "plan-node";
    node.dataset.task = sub.id;
    node.style.position = "absolute";
    node.style.left = `${c * (NODE_W + COL_GAP)}px`;
    node.style.top = `${r * (NODE_H + ROW_GAP)}px`;
    node.style.width = `${NODE_W}px`;

    const title = document.createElement("div");
    title.className = "node-id";
    title.textContent = sub.id;
    const badge = document.createElement("span");
    badge.className = "assignee-badge";
    badge.dataset.kind = sub.assignee?.kind ?? "unassigned";
    badge.textContent = sub.assignee
      ? `${sub.assignee.kind === "tool" ? "tool" : "agent"}: ${sub.assignee.id}`
      : "unassigned";
    title.appendChild(badge);
    const desc = document.createElement("div");
    desc.className = "node-desc";
    desc.textContent = sub.description;
    node.append(title, desc);
    return node;
  }

  private renderBoard(): void {
    const board = this.el.board!;
    board.innerHTML = "";
    const plan = this.vm.plan;
    if (!plan) return;
    for (const sub of plan.subproblems) {
      const badge = document.createElement("span");
      badge.className = "task-badge";
      badge.dataset.task = sub.id;
      badge.dataset.status = this.vm.tasks[sub.id] ?? "pending";
      badge.textContent = `${sub.id}: ${this.vm.tasks[sub.id] ?? "pending"}`;
      board.appendChild(badge);
    }
  }

  private renderAnswer(): void {
    const pane = this.el.answer!;
    const answer = this.vm.finalAnswer;
    if (!answer) {
      pane.hidden = true;
      pane.textContent = "";
      return;
    }
    pane.hidden = false;
    pane.textContent = answer.complete
      ? answer.text
      : `${answer.text}\n(incomplete: some subproblems did not finish)`;
  }
}

const SKELETON = `
<div class="console">
  <form data-testid="problem-form">
    <input data-testid="problem-input" placeholder="What do you need done?">
    <button data-testid="problem-submit" type="submit" disabled>Start</button>
  </form>
  <div data-testid="error-banner" class="banner" hidden>
    <span data-testid="error-text"></span>
    <button data-testid="retry-button" type="button">Retry</button>
  </div>
  <section data-testid="chat-pane" class="chat"></section>
  <form data-testid="reply-form">
    <input data-testid="reply-input" placeholder="Reply">
    <button data-testid="reply-send" type="submit">Send</button>
  </form>
  <section data-testid="plan-pane" hidden>
    <h2>Proposed plan</h2>
    <p data-testid="plan-rationale"></p>
    <div data-testid="plan-graph"></div>
    <div class="plan-actions">
      <button data-testid="approve-button" type="button">Approve</button>
      <textarea data-testid="revise-input" placeholder="What should change?"></textarea>
      <button data-testid="revise-button" type="button">Request changes</button>
    </div>
  </section>
  <section data-testid="status-board" class="board"></section>
  <section data-testid="answer-pane" class="answer" hidden></section>
</div>`;
