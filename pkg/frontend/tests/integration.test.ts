// Live round trip against the real Python control service: pending approval
// rendered, Approve yields an accepted gate decision event, activity
// completes; a mid-run reconnect renders no duplicate events.

import { type ChildProcess, spawn } from 'node:child_process';
import { readFileSync } from 'node:fs';
import { createServer } from 'node:net';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { getApprovals, startActivity } from '../src/api.js';
import { connect, primeSession, respondApproval } from '../src/client.js';
import { Session } from '../src/session.js';

const REPO_ROOT = join(__dirname, '..', '..');

let server: ChildProcess;
let base: string;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once('error', reject);
    probe.listen(0, '127.0.0.1', () => {
      const address = probe.address();
      if (address === null || typeof address === 'string') {
        reject(new Error('no port'));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitFor<T>(
  probe: () => Promise<T | undefined | null | false>,
  label: string,
  timeoutMs = 15000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const value = await probe();
      if (value) {
        return value;
      }
    } catch {
      // service still starting or state not there yet
    }
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw new Error(`timed out waiting for ${label}`);
}

function approvalScenario(): unknown {
  return JSON.parse(
    readFileSync(join(REPO_ROOT, 'scenarios', 'approval_gate.json'), 'utf-8'),
  );
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  server = spawn('python3', ['-m', 'aamatrix.cli', 'serve', '--port', String(port)], {
    cwd: REPO_ROOT,
    stdio: 'ignore',
  });
  await waitFor(async () => (await fetch(`${base}/profiles`)).ok, 'service startup');
}, 30000);

afterAll(() => {
  server?.kill();
});

describe('console round trip', () => {
  it('renders the pending approval, approves it, and sees completion', async () => {
    const handle = await startActivity(base, approvalScenario());
    const session = new Session(handle.id);
    const stream = connect(base, session);

    // The pending approval shows up in the session view.
    await waitFor(
      async () => session.pendingApprovals().length > 0,
      'pending approval in session',
    );
    await primeSession(base, session);
    const pending = session.pendingApprovals();
    expect(pending).toHaveLength(1);
    expect(pending[0].juncture).toBe('before_execute');

    // Approve: the service's decision is recorded, not computed locally.
    const decision = await respondApproval(base, session, pending[0], 'Approve');
    expect(decision.accepted).toBe(true);

    await waitFor(async () => session.terminal, 'terminal status');
    expect(session.status).toBe('Completed');
    expect(session.pendingApprovals()).toHaveLength(0);

    // The gate event in the stream carries the exact same decision.
    const gates = session
      .gateEvents()
      .filter((e) => (e.command as Record<string, unknown>).kind === 'Approve');
    expect(gates).toHaveLength(1);
    expect(gates[0].accepted).toBe(decision.accepted);
    expect(gates[0].reason).toBe(decision.reason);

    // The event list is gap-free and strictly ordered.
    const seqs = session.events.map((e) => e.seq);
    expect(seqs).toEqual(Array.from({ length: seqs.length }, (_, i) => i + 1));

    // Responding to an already-resolved approval is a rejection, not a crash.
    const stale = session.approvals.get(pending[0].id);
    expect(stale?.state).toBe('Approved');
    const staleDecision = await respondApproval(base, session, pending[0], 'Approve');
    expect(staleDecision.accepted).toBe(false);
    expect(session.commandHistory.at(-1)?.decision.accepted).toBe(false);

    stream.stop();
    await stream.done;
  }, 30000);

  it('deny skips the gated step and the event reflects the denial', async () => {
    const handle = await startActivity(base, approvalScenario());
    const session = new Session(handle.id);
    const stream = connect(base, session);
    await waitFor(
      async () => session.pendingApprovals().length > 0,
      'pending approval in session',
    );
    const decision = await respondApproval(
      base,
      session,
      session.pendingApprovals()[0],
      'Deny',
    );
    expect(decision.accepted).toBe(true); // the deny command itself is accepted
    await waitFor(async () => session.terminal, 'terminal status');
    const approvalStates = session.events
      .filter((e) => e.type === 'approval')
      .map((e) => e.state);
    expect(approvalStates).toEqual(['Pending', 'Denied']);
    stream.stop();
    await stream.done;
  }, 30000);

  it('reconnecting mid-run renders no duplicate events', async () => {
    const handle = await startActivity(base, approvalScenario());
    const session = new Session(handle.id);
    const reconnects: number[] = [];
    let stream = connect(base, session, { onConnect: (from) => reconnects.push(from) });

    // Wait until some history arrived, then drop the connection mid-run.
    await waitFor(async () => session.events.length >= 2, 'some events');
    stream.stop();
    await stream.done;
    expect(session.terminal).toBe(false);
    const seenBefore = session.events.length;

    // Reconnect: resumes from lastSeq + 1, so nothing repeats.
    stream = connect(base, session, { onConnect: (from) => reconnects.push(from) });
    await waitFor(
      async () => session.pendingApprovals().length > 0,
      'pending approval after reconnect',
    );
    await respondApproval(base, session, session.pendingApprovals()[0], 'Approve');
    await waitFor(async () => session.terminal, 'terminal status');

    expect(reconnects[1]).toBe(seenBefore + 1);
    const seqs = session.events.map((e) => e.seq);
    expect(new Set(seqs).size).toBe(seqs.length);
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
    expect(session.duplicatesDropped).toBe(0);
    expect(session.status).toBe('Completed');

    stream.stop();
    await stream.done;
  }, 30000);
});
