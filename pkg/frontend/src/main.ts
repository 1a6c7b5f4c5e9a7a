// Page bootstrap: read connection parameters, open the stream, wire buttons.

import { fetchScenarioRadar } from './api.js';
import { connect, primeSession, respondApproval } from './client.js';
import { Session } from './session.js';
import { render, renderRadar } from './ui.js';

function params(): { base: string; activity: string } {
  const query = new URLSearchParams(window.location.search);
  return {
    base: query.get('base') ?? window.location.origin,
    activity: query.get('activity') ?? '',
  };
}

async function start(base: string, activityId: string): Promise<void> {
  const session = new Session(activityId);
  const actions = {
    onApprove: (approval: Parameters<typeof respondApproval>[2]) =>
      respondApproval(base, session, approval, 'Approve').then(() =>
        render(session, actions),
      ),
    onDeny: (approval: Parameters<typeof respondApproval>[2]) =>
      respondApproval(base, session, approval, 'Deny').then(() =>
        render(session, actions),
      ),
  };
  try {
    await primeSession(base, session);
  } catch (error) {
    session.status = `connection error: ${error}`;
  }
  render(session, actions);
  fetchScenarioRadar(base, activityId).then(renderRadar, () => undefined);
  connect(base, session, { onEvent: () => render(session, actions) });
}

function init(): void {
  const { base, activity } = params();
  const baseInput = document.getElementById('base-url') as HTMLInputElement;
  const activityInput = document.getElementById('activity-id') as HTMLInputElement;
  baseInput.value = base;
  if (activity) {
    activityInput.value = activity;
    void start(base, activity);
  }
  (document.getElementById('connect') as HTMLButtonElement).onclick = () => {
    if (activityInput.value) {
      void start(baseInput.value.replace(/\/$/, ''), activityInput.value);
    }
  };
}

init();
