// Typed client for the gateway JSON API. Every mutation the console makes
// goes through here; nothing is computed client-side that the gateway
// already computes (classifications arrive from the server).

export type Classification =
  | "in_range"
  | "low_soft"
  | "high_soft"
  | "low_hard"
  | "high_hard";

export interface RunInfo {
  label: string;
  seed: number | null;
  mode: string;
  readonly: boolean;
  phase: string | null;
  sim_t: number;
  accel: number | null;
  done: boolean;
  preset: string | null;
}

export interface Reading {
  t: number;
  node: number;
  kind: string;
  seq: number;
  value: number;
  classification: Classification | null;
}

export interface Alert {
  id: number;
  severity: "soft" | "hard" | "node_silent";
  direction: "low" | "high" | "none";
  kind: string | null;
  node: number | null;
  value: number | null;
  raised_t: number;
  cleared_t: number | null;
  acked_by: string | null;
  acked_t: number | null;
  open: boolean;
}

export interface NodeCard {
  addr: number;
  sampling_interval_s: number;
  kinds: string[];
  last_contact_t: number | null;
  battery_centi_pct: number | null;
  fault: boolean;
  state: "active" | "sleeping" | "silent";
  counters: { ok: number; duplicate: number; crc_bad: number; decode_bad: number };
}

export interface Band {
  hard_lo: number;
  soft_lo: number;
  soft_hi: number;
  hard_hi: number;
}

export interface Thresholds {
  temperature: Band;
  ph: Band;
  o2: Band;
  light: Band;
  humidity: Band | null;
  [key: string]: unknown;
}

export interface HatchEstimate {
  h_est: number;
  eta_t: number | null;
  last_update_t: number | null;
  first_crossing_t: number | null;
}

export interface CommandTicket {
  command_id: number;
  status: "pending" | "acked" | "timed_out";
}

export interface CommandInfo extends CommandTicket {
  addr: number;
  type: string;
  value: number;
  attempts: number;
  dispatched_t: number;
  resolved_t: number | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = resp.status === 204 ? null : await resp.json().catch(() => null);
  if (!resp.ok) {
    throw new ApiError(resp.status, body && (body as any).detail ? (body as any).detail : body);
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}/api/v1${path}`;
  }

  getRun(): Promise<RunInfo> {
    return request(this.url("/run"));
  }

  getHatch(): Promise<HatchEstimate> {
    return request(this.url("/hatch"));
  }

  getReadings(params: {
    kind?: string;
    node?: number;
    from?: number;
    to?: number;
  }): Promise<{ readings: Reading[]; count: number }> {
    const q = new URLSearchParams();
    if (params.kind !== undefined) q.set("kind", params.kind);
    if (params.node !== undefined) q.set("node", String(params.node));
    if (params.from !== undefined) q.set("from", String(params.from));
    if (params.to !== undefined) q.set("to", String(params.to));
    return request(this.url(`/readings?${q.toString()}`));
  }

  getAlerts(open?: boolean): Promise<{ alerts: Alert[] }> {
    const suffix = open === undefined ? "" : `?open=${open}`;
    return request(this.url(`/alerts${suffix}`));
  }

  ackAlert(id: number, who: string): Promise<Alert> {
    return request(this.url(`/alerts/${id}/ack`), {
      method: "POST",
      body: JSON.stringify({ who }),
    });
  }

  getNodes(): Promise<{ nodes: NodeCard[] }> {
    return request(this.url("/nodes"));
  }

  sendCommand(addr: number, type: string, value = 0): Promise<CommandTicket> {
    return request(this.url(`/nodes/${addr}/command`), {
      method: "POST",
      body: JSON.stringify({ type, value }),
    });
  }

  getCommand(id: number): Promise<CommandInfo> {
    return request(this.url(`/commands/${id}`));
  }

  getThresholds(): Promise<Thresholds> {
    return request(this.url("/thresholds"));
  }

  putThresholds(doc: Thresholds): Promise<Thresholds> {
    return request(this.url("/thresholds"), { method: "PUT", body: JSON.stringify(doc) });
  }

  getPhase(): Promise<{ phase: string; log: { phase: string; t: number }[] }> {
    return request(this.url("/phase"));
  }

  advancePhase(body: { expect_from?: string; aerator_on?: boolean }): Promise<{ phase: string }> {
    return request(this.url("/phase/advance"), { method: "POST", body: JSON.stringify(body) });
  }

  stopRun(): Promise<{ stopping: boolean }> {
    return request(this.url("/run/stop"), { method: "POST", body: JSON.stringify({}) });
  }

  streamUrl(): string {
    return this.url("/stream");
  }
}
