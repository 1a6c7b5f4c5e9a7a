// Streaming client: replays an activity's history, tails live events, and
// resumes from the last seen sequence number after a drop so nothing is
// rendered twice.

import { getActivity, postCommand } from './api.js';
import type { ApprovalInfo, Decision } from './api.js';
import { Session } from './session.js';
import type { WorkbenchEvent } from './session.js';

export interface StreamHandle {
  stop(): void;
  done: Promise<void>;
}

export interface ConnectOptions {
  /** Called after each newly ingested event (rendering hook). */
  onEvent?: (event: WorkbenchEvent) => void;
  /** Reconnect delay in ms after a dropped stream. */
  retryMs?: number;
  /** Signal test hook fired on each (re)connection attempt. */
  onConnect?: (fromSeq: number) => void;
}

/** Split a byte stream into newline-delimited JSON events. */
export async function* ndjson(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<WorkbenchEvent> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = '';
  try {
    while (true) {
      const { done, value } = await reader.read();
      if (done) {
        break;
      }
      buffer += decoder.decode(value, { stream: true });
      let newline = buffer.indexOf('\n');
      while (newline >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) {
          yield JSON.parse(line) as WorkbenchEvent;
        }
        newline = buffer.indexOf('\n');
      }
    }
    if (buffer.trim()) {
      yield JSON.parse(buffer) as WorkbenchEvent;
    }
  } finally {
    reader.releaseLock();
  }
}

/** Open (and keep open) the event stream for an activity. History replays
 * first; reconnections resume from the last sequence number already held by
 * the session. */
export function connect(
  base: string,
  session: Session,
  options: ConnectOptions = {},
): StreamHandle {
  const controllerRef: { current: AbortController | null } = { current: null };
  let stopped = false;

  const done = (async () => {
    while (!stopped && !session.terminal) {
      const fromSeq = session.lastSeq + 1;
      options.onConnect?.(fromSeq);
      const controller = new AbortController();
      controllerRef.current = controller;
      try {
        const response = await fetch(
          `${base}/activities/${session.activityId}/events?from=${fromSeq}`,
          { signal: controller.signal },
        );
        if (!response.ok || !response.body) {
          throw new Error(`stream failed: ${response.status}`);
        }
        for await (const event of ndjson(response.body)) {
          if (session.ingest(event)) {
            options.onEvent?.(event);
          }
          if (stopped) {
            break;
          }
        }
        if (session.terminal) {
          break;
        }
      } catch (error) {
        if (stopped) {
          break;
        }
      }
      if (!stopped && !session.terminal) {
        await new Promise((resolve) => setTimeout(resolve, options.retryMs ?? 250));
      }
    }
  })();

  return {
    stop: () => {
      stopped = true;
      controllerRef.current?.abort();
    },
    done,
  };
}

/** Seed the session's approval list from the handle (used on first paint,
 * before the stream catches up). */
export async function primeSession(base: string, session: Session): Promise<void> {
  const handle = await getActivity(base, session.activityId);
  session.status = handle.status;
  session.goal = handle.scenario.goal;
  for (const approval of handle.pending_approvals) {
    if (!session.approvals.has(approval.id)) {
      session.approvals.set(approval.id, approval);
    }
  }
}

/** Answer a pending approval. The decision comes back from the service and is
 * recorded verbatim; the console never computes acceptance itself. */
export async function respondApproval(
  base: string,
  session: Session,
  approval: ApprovalInfo,
  verdict: 'Approve' | 'Deny',
): Promise<Decision> {
  const command = {
    kind: verdict,
    aspect: approval.target_aspect,
    issued_at: 'Runtime' as const,
    approval_id: approval.id,
  };
  const decision = await postCommand(base, session.activityId, command);
  session.recordCommand(command, decision);
  return decision;
}

export async function submitCommand(
  base: string,
  session: Session,
  command: Parameters<typeof postCommand>[2],
): Promise<Decision> {
  const decision = await postCommand(base, session.activityId, command);
  session.recordCommand(command, decision);
  return decision;
}
