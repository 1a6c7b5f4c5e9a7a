// DOM rendering for the session view. Pure presentation: reads the Session,
// writes HTML, and forwards clicks to the client layer.

import type { ApprovalInfo } from './api.js';
import type { Session, WorkbenchEvent } from './session.js';

export interface UiActions {
  onApprove(approval: ApprovalInfo): void;
  onDeny(approval: ApprovalInfo): void;
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;');
}

function describeEvent(event: WorkbenchEvent): string {
  switch (event.type) {
    case 'phase':
      return `phase -> ${event.phase}`;
    case 'action': {
      const action = event.action as Record<string, unknown>;
      const task = action.task ? ` [${action.task}]` : '';
      return `${action.kind} by ${action.actor}${task}`;
    }
    case 'gate':
      return `${(event.command as Record<string, unknown>).kind}: ${
        event.accepted ? 'accepted' : 'rejected'
      } (${event.reason})`;
    case 'approval':
      return `approval ${event.approval_id}: ${event.state}`;
    case 'utilization':
      return `used ${event.resource}: ${event.result}`;
    case 'guard':
      return `guard fired: ${event.detail}`;
    case 'degrade':
      return `${event.aspect} policy degraded: ${event.detail}`;
    case 'outcome':
      return `outcome: ${event.status} (${event.detail})`;
    case 'note':
      return String(event.text);
    default:
      return event.type;
  }
}

export function render(session: Session, actions: UiActions): void {
  el('status').textContent = session.status;
  el('status').className = `badge ${session.terminal ? 'terminal' : 'live'}`;
  el('goal').textContent = session.goal;

  const eventsNode = el('events');
  eventsNode.innerHTML = session.events
    .map(
      (event) =>
        `<li class="event event-${event.type}"><span class="seq">#${event.seq}</span> ` +
        `${escapeHtml(describeEvent(event))}</li>`,
    )
    .join('');
  eventsNode.scrollTop = eventsNode.scrollHeight;

  const pending = session.pendingApprovals();
  el('approvals').innerHTML = pending.length
    ? pending
        .map(
          (approval) => `
      <div class="approval" data-id="${approval.id}">
        <div>
          <strong>${approval.id}</strong> ${escapeHtml(approval.juncture)}
          on ${escapeHtml(approval.target_aspect)}
        </div>
        <button class="approve" data-id="${approval.id}">Approve</button>
        <button class="deny" data-id="${approval.id}">Deny</button>
      </div>`,
        )
        .join('')
    : '<em>none pending</em>';
  for (const button of el('approvals').querySelectorAll<HTMLButtonElement>('button')) {
    const approval = session.approvals.get(button.dataset.id ?? '');
    if (!approval) {
      continue;
    }
    button.onclick = () =>
      button.classList.contains('approve')
        ? actions.onApprove(approval)
        : actions.onDeny(approval);
  }

  el('commands').innerHTML = session.commandHistory
    .map(
      ({ command, decision }) =>
        `<li>${escapeHtml(command.kind)} -> ` +
        `${decision.accepted ? 'accepted' : 'rejected'}: ${escapeHtml(decision.reason)}</li>`,
    )
    .join('');
}

export function renderRadar(svg: string): void {
  el('radar').innerHTML = svg;
}
