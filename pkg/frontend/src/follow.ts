// Follows a session's event log.  Prefers the SSE stream when the host
// provides EventSource, otherwise long-polls; both resume from the last
// seen seq, so a dropped connection never duplicates or skips an event.

import type { ApiClient } from "./api";
import type { SessionEvent } from "./types";

export interface FollowOptions {
  pollIntervalMs?: number; // pause between empty polls (default 1000)
  longPollMs?: number; // server-side wait for the poll transport
  transport?: "auto" | "poll";
  onTransportError?: (err: unknown) => void;
}

export interface Follower {
  stop(): void;
  nudge(): void; // poll right now (after a user action)
}

export function followEvents(
  client: ApiClient,
  sessionId: string,
  fromSeq: number,
  onBatch: (events: SessionEvent[]) => void,
  isDone: () => boolean,
  options: FollowOptions = {},
): Follower {
  const pollInterval = options.pollIntervalMs ?? 1000;
  const longPoll = options.longPollMs ?? 800;
  let lastSeq = fromSeq;
  let stopped = false;
  let source: EventSource | null = null;
  let wake: (() => void) | null = null;

  // keep only the contiguous prefix; a gap means we raced the transport
  // and the next poll from lastSeq will fill it
  const deliver = (raw: SessionEvent[]): void => {
    const fresh = raw
      .filter((e) => e.seq > lastSeq)
      .sort((a, b) => a.seq - b.seq);
    const batch: SessionEvent[] = [];
    for (const event of fresh) {
      if (event.seq !== lastSeq + batch.length + 1) break;
      batch.push(event);
    }
    if (batch.length > 0) {
      lastSeq += batch.length;
      onBatch(batch);
    }
  };

  const pollLoop = async (): Promise<void> => {
    while (!stopped && !isDone()) {
      let got = 0;
      try {
        const events = await client.getEvents(sessionId, lastSeq, longPoll);
        got = events.length;
        deliver(events);
      } catch (err) {
        options.onTransportError?.(err);
      }
      if (stopped || isDone()) return;
      if (got === 0) {
        await new Promise<void>((resolve) => {
          wake = resolve;
          setTimeout(resolve, pollInterval);
        });
        wake = null;
      }
    }
  };

  const startStream = (): boolean => {
    if (options.transport === "poll") return false;
    if (typeof EventSource === "undefined") return false;
    source = new EventSource(client.streamUrl(sessionId, lastSeq));
    source.onmessage = (msg) => {
      deliver([JSON.parse(msg.data) as SessionEvent]);
    };
    source.addEventListener("end", () => {
      source?.close();
      source = null;
      if (!isDone()) void pollLoop(); // ended early: keep following
    });
    source.onerror = () => {
      source?.close();
      source = null;
      if (!stopped) void pollLoop();
    };
    return true;
  };

  if (!startStream()) void pollLoop();

  return {
    stop() {
      stopped = true;
      source?.close();
      source = null;
      wake?.();
    },
    nudge() {
      wake?.();
    },
  };
}
