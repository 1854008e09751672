// Wires the API client, the event stream, and the DOM together. All state
// shown here is server truth: readings arrive with their classification,
// alerts/commands update on confirming stream events (never optimistically),
// and a reconnect backfills any chart gap from GET /readings.

import { ApiClient, ApiError } from "./api.js";
import type { Alert, NodeCard, RunInfo, Thresholds } from "./api.js";
import { drawChart } from "./charts.js";
import { SeriesStore } from "./series.js";
import {
  alertFromEvent,
  batteryWarning,
  classStyle,
  formatEta,
  formatSimT,
  upsertAlert,
} from "./state.js";
import { LiveStream, StreamEvent } from "./stream.js";
import { thresholdErrors } from "./validate.js";

const KINDS: { key: string; label: string; unit: string }[] = [
  { key: "temperature_c", label: "Temperature", unit: "degC" },
  { key: "ph", label: "pH", unit: "pH" },
  { key: "o2_mg_l", label: "Dissolved O2", unit: "mg/L" },
  { key: "light_lux", label: "Illumination", unit: "lux" },
  { key: "humidity_pct", label: "Room humidity", unit: "%" },
];

const BAND_KEY: Record<string, string> = {
  temperature_c: "temperature",
  ph: "ph",
  o2_mg_l: "o2",
  light_lux: "light",
  humidity_pct: "humidity",
};

const PHASES = [
  "culture_prep",
  "aeration_on",
  "node_setup",
  "sensor_attach",
  "monitoring",
  "analysis",
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

export class Dashboard {
  private api: ApiClient;
  private series = new SeriesStore(7200);
  private alerts: Alert[] = [];
  private thresholds: Thresholds | null = null;
  private run: RunInfo | null = null;
  private simT = 0;
  private paused = false;
  private stream: LiveStream | null = null;
  private notice = "";

  constructor(base = "") {
    this.api = new ApiClient(base);
  }

  operatorName(): string {
    const input = el<HTMLInputElement>("operator-name");
    return input.value.trim() || "operator";
  }

  async start(): Promise<void> {
    const saved = localStorage.getItem("hatchsens-operator");
    if (saved) {
      el<HTMLInputElement>("operator-name").value = saved;
    }
    el<HTMLInputElement>("operator-name").addEventListener("change", (e) => {
      localStorage.setItem("hatchsens-operator", (e.target as HTMLInputElement).value);
    });
    el<HTMLButtonElement>("chart-pause").addEventListener("click", () => {
      this.paused = !this.paused;
      el<HTMLButtonElement>("chart-pause").textContent = this.paused ? "resume" : "pause";
    });
    el<HTMLSelectElement>("chart-window").addEventListener("change", (e) => {
      this.series.windowS = Number((e.target as HTMLSelectElement).value);
      // widening the window needs history the buffer already trimmed
      void this.backfill(this.simT - this.series.windowS);
    });
    this.buildChartGrid();

    this.run = await this.api.getRun();
    this.simT = this.run.sim_t;
    this.thresholds = await this.api.getThresholds();
    await this.backfill(this.simT - this.series.windowS);
    this.alerts = (await this.api.getAlerts()).alerts;
    await this.refreshNodes();
    await this.refreshHatch();
    this.renderRun();
    this.renderAlerts();
    this.renderThresholdEditor();
    this.wirePhaseControls();

    this.stream = new LiveStream(this.api.streamUrl(), {
      onEvent: (event) => this.onEvent(event),
      onStateChange: (connected) => this.renderConnection(connected),
      onResume: () => {
        const newest = this.series.newestT();
        void this.backfill(newest ?? this.simT - this.series.windowS);
      },
    });
    this.stream.start();

    window.setInterval(() => void this.pollRun(), 5000);
    window.setInterval(() => this.renderCharts(), 500);
  }

  // -- data flow -----------------------------------------------------------

  private async backfill(fromT: number): Promise<void> {
    const resp = await this.api.getReadings({ from: Math.max(0, fromT) });
    this.series.merge(resp.readings);
  }

  private async pollRun(): Promise<void> {
    try {
      this.run = await this.api.getRun();
      this.simT = Math.max(this.simT, this.run.sim_t);
      this.renderRun();
      await this.refreshHatch();
      await this.refreshNodes();
    } catch {
      // transient; the stream banner already shows connectivity
    }
  }

  private onEvent(event: StreamEvent): void {
    if (typeof event.t === "number") {
      this.simT = Math.max(this.simT, event.t as number);
    }
    switch (event.type) {
      case "reading":
        this.series.addReading(event as any);
        this.renderBadge(event as any);
        break;
      case "alert": {
        const alert = alertFromEvent(event);
        if (alert) {
          this.alerts = upsertAlert(this.alerts, alert);
          this.renderAlerts();
        }
        break;
      }
      case "hatch":
        this.renderHatch(event as any);
        break;
      case "phase":
        void this.pollRun();
        break;
      case "node":
      case "command":
        void this.refreshNodes();
        break;
      case "advisory":
        this.setNotice(`feeding advisory: yeast is due (sim ${formatSimT(event.t as number)})`);
        break;
    }
  }

  private async refreshHatch(): Promise<void> {
    this.renderHatch(await this.api.getHatch());
  }

  private async refreshNodes(): Promise<void> {
    const nodes = (await this.api.getNodes()).nodes;
    this.renderNodes(nodes);
  }

  // -- rendering -------------------------------------------------------------

  private buildChartGrid(): void {
    const grid = el<HTMLDivElement>("charts");
    grid.innerHTML = "";
    for (const kind of KINDS) {
      const card = document.createElement("div");
      card.className = "chart-card";
      card.innerHTML = `
        <div class="chart-head">
          <span>${kind.label}</span>
          <span class="badge unknown" id="badge-${kind.key}">--</span>
        </div>
        <canvas id="chart-${kind.key}" width="420" height="150"></canvas>`;
      grid.appendChild(card);
    }
  }

  private renderCharts(): void {
    if (this.paused || !this.thresholds) {
      return;
    }
    this.series.trim(this.simT);
    for (const kind of KINDS) {
      const canvas = el<HTMLCanvasElement>(`chart-${kind.key}`);
      const band = (this.thresholds as any)[BAND_KEY[kind.key]!] ?? null;
      drawChart(canvas, this.series.points(kind.key), this.simT, {
        windowS: this.series.windowS,
        band,
        unit: kind.unit,
      });
    }
  }

  private renderBadge(reading: {
    kind: string;
    value: number;
    classification: string | null;
  }): void {
    const badge = document.getElementById(`badge-${reading.kind}`);
    if (!badge) {
      return;
    }
    badge.textContent = reading.value.toFixed(2);
    badge.className = `badge ${classStyle(reading.classification as any)}`;
  }

  private renderRun(): void {
    if (!this.run) {
      return;
    }
    el("run-label").textContent = `${this.run.label} (seed ${this.run.seed ?? "?"}, ${this.run.mode})`;
    el("sim-clock").textContent = formatSimT(this.simT);
    const banner = el("phase-banner");
    banner.innerHTML = PHASES.map((p) => {
      const cls = p === this.run!.phase ? "phase current" : "phase";
      return `<span class="${cls}">${p.replace("_", " ")}</span>`;
    }).join("<span class='sep'>&rarr;</span>");
    const readonly = this.run.readonly;
    document.querySelectorAll<HTMLButtonElement>("button[data-mutates]").forEach((b) => {
      b.disabled = readonly;
    });
    el("readonly-banner").style.display = readonly ? "block" : "none";
  }

  private renderConnection(connected: boolean): void {
    el("conn-banner").style.display = connected ? "none" : "block";
  }

  private renderHatch(est: { h_est: number; eta_t: number | null }): void {
    const pct = Math.min(100, est.h_est * 100);
    el<HTMLDivElement>("hatch-fill").style.width = `${pct.toFixed(2)}%`;
    el("hatch-text").textContent =
      `hatch estimate ${(est.h_est * 100).toFixed(2)} % | ETA ${formatEta(est.eta_t, this.simT)}`;
  }

  private renderAlerts(): void {
    const tbody = el<HTMLTableSectionElement>("alert-rows");
    tbody.innerHTML = "";
    for (const alert of this.alerts.slice(0, 30)) {
      const row = document.createElement("tr");
      row.className = alert.open ? `sev-${alert.severity}` : "cleared";
      const what =
        alert.severity === "node_silent"
          ? `node ${alert.node} silent`
          : `${alert.kind} ${alert.direction} (${alert.value ?? "?"})`;
      const ackCell = alert.acked_by
        ? `acked by ${alert.acked_by}`
        : alert.open
          ? `<button data-mutates data-ack="${alert.id}">ack</button>`
          : "";
      row.innerHTML = `
        <td>#${alert.id}</td><td>${alert.severity}</td><td>${what}</td>
        <td>${formatSimT(alert.raised_t)}</td>
        <td>${alert.open ? "open" : `cleared ${formatSimT(alert.cleared_t ?? 0)}`}</td>
        <td>${ackCell}</td>`;
      tbody.appendChild(row);
    }
    tbody.querySelectorAll<HTMLButtonElement>("button[data-ack]").forEach((btn) => {
      btn.addEventListener("click", () => void this.ack(Number(btn.dataset.ack)));
    });
    if (this.run?.readonly) {
      tbody.querySelectorAll<HTMLButtonElement>("button").forEach((b) => (b.disabled = true));
    }
  }

  private async ack(alertId: number): Promise<void> {
    try {
      await this.api.ackAlert(alertId, this.operatorName());
      // the confirming stream event updates the row; fall back to a refetch
      this.alerts = (await this.api.getAlerts()).alerts;
      this.renderAlerts();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.setNotice("alert was already acknowledged elsewhere");
        this.alerts = (await this.api.getAlerts()).alerts;
        this.renderAlerts();
      } else {
        this.setNotice(`ack failed: ${err}`);
      }
    }
  }

  private renderNodes(nodes: NodeCard[]): void {
    const host = el<HTMLDivElement>("nodes");
    host.innerHTML = "";
    for (const node of nodes) {
      const card = document.createElement("div");
      const battery =
        node.battery_centi_pct === null ? "?" : (node.battery_centi_pct / 100).toFixed(1);
      const warn = batteryWarning(node.battery_centi_pct) ? " battery-low" : "";
      card.className = `node-card${warn}`;
      card.innerHTML = `
        <div class="node-head">node 0x${node.addr.toString(16).padStart(4, "0")}
          <span class="state-${node.state}">${node.state}</span></div>
        <div>battery ${battery} % ${node.fault ? "| sensor fault" : ""}</div>
        <div>interval ${node.sampling_interval_s} s | ok ${node.counters.ok}
          dup ${node.counters.duplicate} crc ${node.counters.crc_bad}</div>
        <div class="cmd-row">
          <input type="number" value="60" min="5" max="3600" id="ival-${node.addr}" />
          <button data-mutates data-cmd="set_interval" data-addr="${node.addr}">set interval</button>
          <input type="number" value="600" min="0" id="sleep-${node.addr}" />
          <button data-mutates data-cmd="sleep" data-addr="${node.addr}">sleep</button>
          <button data-mutates data-cmd="wake" data-addr="${node.addr}">wake</button>
          <span id="cmd-status-${node.addr}" class="cmd-status"></span>
        </div>`;
      host.appendChild(card);
    }
    host.querySelectorAll<HTMLButtonElement>("button[data-cmd]").forEach((btn) => {
      btn.addEventListener("click", () => {
        const addr = Number(btn.dataset.addr);
        const type = btn.dataset.cmd!;
        const value =
          type === "set_interval"
            ? Number(el<HTMLInputElement>(`ival-${addr}`).value)
            : type === "sleep"
              ? Number(el<HTMLInputElement>(`sleep-${addr}`).value)
              : 0;
        void this.sendCommand(addr, type, value);
      });
    });
    if (this.run?.readonly) {
      host.querySelectorAll<HTMLButtonElement>("button").forEach((b) => (b.disabled = true));
    }
  }

  private async sendCommand(addr: number, type: string, value: number): Promise<void> {
    const status = document.getElementById(`cmd-status-${addr}`);
    try {
      const ticket = await this.api.sendCommand(addr, type, value);
      if (status) {
        status.textContent = `#${ticket.command_id} pending`;
      }
      const poll = window.setInterval(async () => {
        const info = await this.api.getCommand(ticket.command_id);
        if (status) {
          status.textContent = `#${info.command_id} ${info.status}`;
        }
        if (info.status !== "pending") {
          window.clearInterval(poll);
          void this.refreshNodes();
        }
      }, 1000);
    } catch (err) {
      if (status) {
        status.textContent = err instanceof ApiError ? `rejected: ${err.detail}` : String(err);
      }
    }
  }

  private renderThresholdEditor(): void {
    if (!this.thresholds) {
      return;
    }
    const host = el<HTMLTableSectionElement>("threshold-rows");
    host.innerHTML = "";
    for (const name of ["temperature", "ph", "o2", "light", "humidity"]) {
      const band = (this.thresholds as any)[name];
      if (!band) {
        continue;
      }
      const row = document.createElement("tr");
      row.innerHTML =
        `<td>${name}</td>` +
        ["hard_lo", "soft_lo", "soft_hi", "hard_hi"]
          .map(
            (edge) =>
              `<td><input id="thr-${name}-${edge}" type="number" step="any" value="${band[edge]}"/></td>`,
          )
          .join("");
      host.appendChild(row);
    }
    el<HTMLButtonElement>("threshold-submit").onclick = () => void this.submitThresholds();
  }

  private async submitThresholds(): Promise<void> {
    if (!this.thresholds) {
      return;
    }
    const doc: Thresholds = JSON.parse(JSON.stringify(this.thresholds));
    for (const name of ["temperature", "ph", "o2", "light", "humidity"]) {
      const band = (doc as any)[name];
      if (!band) {
        continue;
      }
      for (const edge of ["hard_lo", "soft_lo", "soft_hi", "hard_hi"]) {
        band[edge] = Number(el<HTMLInputElement>(`thr-${name}-${edge}`).value);
      }
    }
    const errors = thresholdErrors(doc);
    const errorHost = el("threshold-errors");
    if (errors.length) {
      errorHost.textContent = errors.join("; ");
      return; // invalid edits never reach the server
    }
    errorHost.textContent = "";
    try {
      this.thresholds = await this.api.putThresholds(doc);
      this.setNotice("thresholds updated");
      this.renderThresholdEditor();
    } catch (err) {
      errorHost.textContent = err instanceof ApiError ? `rejected: ${err.detail}` : String(err);
    }
  }

  private wirePhaseControls(): void {
    el<HTMLButtonElement>("phase-advance").addEventListener("click", async () => {
      if (!window.confirm("Advance the run to the next phase?")) {
        return;
      }
      const aerator = el<HTMLInputElement>("attest-aerator").checked;
      try {
        const resp = await this.api.advancePhase({ aerator_on: aerator });
        this.setNotice(`phase advanced to ${resp.phase}`);
        await this.pollRun();
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          const detail = err.detail as { blockers?: string[] } | string;
          const blockers =
            typeof detail === "object" && detail?.blockers ? detail.blockers : [String(detail)];
          this.setNotice(`gate blocked: ${blockers.join("; ")}`);
        } else {
          this.setNotice(`advance failed: ${err}`);
        }
      }
    });
    el<HTMLButtonElement>("run-stop").addEventListener("click", async () => {
      if (!window.confirm("Stop the run and move to analysis?")) {
        return;
      }
      await this.api.stopRun();
      this.setNotice("stop requested");
    });
  }

  private setNotice(text: string): void {
    this.notice = text;
    el("notice").textContent = this.notice;
  }
}
