// Typed wrappers over the control-service HTTP endpoints. The console holds
// no gating logic of its own: every accept/reject it shows originates from a
// service response or a stream event.

export interface ActivityHandle {
  id: string;
  status: string;
  action_count: number;
  pending_approvals: ApprovalInfo[];
  scenario: { goal: string; protocol: string };
}

export interface ApprovalInfo {
  id: string;
  state: 'Pending' | 'Approved' | 'Denied' | 'Expired';
  juncture: string;
  target_aspect: string;
  created_at: number;
  action_preview: Record<string, unknown> | null;
}

export interface Decision {
  accepted: boolean;
  reason: string;
}

export interface CommandBody {
  kind: string;
  aspect: string;
  issued_at: 'PreRun' | 'Runtime';
  approval_id?: string;
  task_id?: string;
  priority?: number;
  key?: string;
  value?: unknown;
  description?: string;
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw new Error(`${response.status} ${await response.text()}`);
  }
  return (await response.json()) as T;
}

export async function getActivity(base: string, id: string): Promise<ActivityHandle> {
  return asJson(await fetch(`${base}/activities/${id}`));
}

export async function getApprovals(base: string, id: string): Promise<ApprovalInfo[]> {
  return asJson(await fetch(`${base}/activities/${id}/approvals`));
}

export async function postCommand(
  base: string,
  id: string,
  command: CommandBody,
): Promise<Decision> {
  return asJson(
    await fetch(`${base}/activities/${id}/commands`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(command),
    }),
  );
}

export async function startActivity(
  base: string,
  scenario: unknown,
): Promise<ActivityHandle> {
  return asJson(
    await fetch(`${base}/activities`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(scenario),
    }),
  );
}

export function scenarioRadarUrl(base: string, id: string): string {
  return `${base}/activities/${id}/radar.svg`;
}

export async function fetchScenarioRadar(base: string, id: string): Promise<string> {
  const response = await fetch(scenarioRadarUrl(base, id));
  if (!response.ok) {
    throw new Error(`radar fetch failed: ${response.status}`);
  }
  return response.text();
}
