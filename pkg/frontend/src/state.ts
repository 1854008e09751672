// Pure view-state helpers: alert list upserts, command lifecycle tracking,
// and the style mappings driven by server-sent classifications. Kept free
// of DOM so they are trivially testable.

import type { Alert, Classification } from "./api.js";
import type { StreamEvent } from "./stream.js";

export function upsertAlert(alerts: Alert[], incoming: Alert): Alert[] {
  const next = alerts.filter((a) => a.id !== incoming.id);
  next.push(incoming);
  next.sort((a, b) => Number(b.open) - Number(a.open) || b.id - a.id);
  return next;
}

export function alertFromEvent(event: StreamEvent): Alert | null {
  if (event.type !== "alert" || typeof event.id !== "number") {
    return null;
  }
  return event as unknown as Alert;
}

export interface CommandView {
  id: number;
  addr: number;
  type: string;
  value: number;
  status: "pending" | "acked" | "timed_out";
}

export function applyCommandEvent(
  commands: Map<number, CommandView>,
  event: StreamEvent,
): boolean {
  if (event.type !== "command" || typeof event.command_id !== "number") {
    return false;
  }
  commands.set(event.command_id as number, {
    id: event.command_id as number,
    addr: event.addr as number,
    type: String(event.command_type ?? ""),
    value: event.value as number,
    status: event.status as CommandView["status"],
  });
  return true;
}

// classification -> css class; the server decides the classification, the
// console only picks a colour for it
const CLASS_STYLES: Record<Classification, string> = {
  in_range: "ok",
  low_soft: "soft",
  high_soft: "soft",
  low_hard: "hard",
  high_hard: "hard",
};

export function classStyle(cls: Classification | null): string {
  return cls ? CLASS_STYLES[cls] : "unknown";
}

export function batteryWarning(centiPct: number | null): boolean {
  return centiPct !== null && centiPct < 1000; // below 10 %
}

export function formatSimT(t: number): string {
  const h = Math.floor(t / 3600);
  const m = Math.floor((t % 3600) / 60);
  const s = Math.floor(t % 60);
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${pad(h)}:${pad(m)}:${pad(s)}`;
}

export function formatEta(eta: number | null, now: number): string {
  if (eta === null) {
    return "no projection (conditions unsuitable)";
  }
  if (eta <= now) {
    return `reached at ${formatSimT(eta)}`;
  }
  return `~${formatSimT(eta)} (in ${formatSimT(eta - now)})`;
}
