// Session state for one live activity: the event list (ordered by sequence
// number no matter the arrival order), pending approvals, and the history of
// submitted commands with the service's gate decisions.

import type { ApprovalInfo, CommandBody, Decision } from './api.js';

export interface WorkbenchEvent {
  seq: number;
  type: string;
  [key: string]: unknown;
}

export interface CommandRecord {
  command: CommandBody;
  decision: Decision;
}

const TERMINAL = new Set(['Completed', 'Halted', 'NonTermination', 'DeadEnd', 'Error']);

export class Session {
  readonly activityId: string;
  events: WorkbenchEvent[] = [];
  approvals = new Map<string, ApprovalInfo>();
  commandHistory: CommandRecord[] = [];
  status = 'Connecting';
  goal = '';
  duplicatesDropped = 0;
  private seen = new Set<number>();

  constructor(activityId: string) {
    this.activityId = activityId;
  }

  get lastSeq(): number {
    return this.events.length ? this.events[this.events.length - 1].seq : 0;
  }

  get terminal(): boolean {
    return TERMINAL.has(this.status);
  }

  pendingApprovals(): ApprovalInfo[] {
    return [...this.approvals.values()].filter((a) => a.state === 'Pending');
  }

  /** Insert an event in sequence order; duplicates are dropped, never
   * rendered twice. Returns true when the event was new. */
  ingest(event: WorkbenchEvent): boolean {
    if (this.seen.has(event.seq)) {
      this.duplicatesDropped += 1;
      return false;
    }
    this.seen.add(event.seq);
    let index = this.events.length;
    while (index > 0 && this.events[index - 1].seq > event.seq) {
      index -= 1;
    }
    this.events.splice(index, 0, event);
    this.apply(event);
    return true;
  }

  private apply(event: WorkbenchEvent): void {
    switch (event.type) {
      case 'phase':
        this.status = String(event.phase);
        break;
      case 'outcome':
        this.status = String(event.status);
        break;
      case 'approval': {
        const id = String(event.approval_id);
        const existing = this.approvals.get(id);
        this.approvals.set(id, {
          id,
          state: event.state as ApprovalInfo['state'],
          juncture: String(event.juncture ?? existing?.juncture ?? ''),
          target_aspect: String(event.target_aspect ?? existing?.target_aspect ?? ''),
          created_at: Number(event.seq),
          action_preview:
            (event.preview as Record<string, unknown> | null) ??
            existing?.action_preview ??
            null,
        });
        break;
      }
      default:
        break;
    }
  }

  recordCommand(command: CommandBody, decision: Decision): void {
    this.commandHistory.push({ command, decision });
  }

  /** Gate decisions observed in the event stream, for cross-checking against
   * the responses the console received directly. */
  gateEvents(): WorkbenchEvent[] {
    return this.events.filter((e) => e.type === 'gate');
  }
}
