// Hand-rolled canvas line charts: shaded soft/hard bands behind the trace,
// fixed time window ending at the current sim clock.

import type { Band } from "./api.js";
import type { SeriesPoint } from "./series.js";

const COLORS = {
  soft: "rgba(74, 160, 104, 0.18)",
  hard: "rgba(222, 168, 62, 0.12)",
  line: "#2b6cb0",
  axis: "#9aa3ad",
  text: "#5a646e",
};

export interface ChartOptions {
  windowS: number;
  band: Band | null;
  unit: string;
}

export function drawChart(
  canvas: HTMLCanvasElement,
  points: SeriesPoint[],
  now: number,
  opts: ChartOptions,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  const t0 = now - opts.windowS;
  const visible = points.filter((p) => p.t >= t0);

  // vertical scale: data extent joined with the soft band, padded
  let lo = Number.POSITIVE_INFINITY;
  let hi = Number.NEGATIVE_INFINITY;
  for (const p of visible) {
    lo = Math.min(lo, p.value);
    hi = Math.max(hi, p.value);
  }
  if (opts.band) {
    lo = Math.min(lo, opts.band.soft_lo);
    hi = Math.max(hi, opts.band.soft_hi);
  }
  if (!Number.isFinite(lo)) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo < 1e-9) {
    hi = lo + 1;
  }
  const pad = (hi - lo) * 0.12;
  lo -= pad;
  hi += pad;

  const x = (t: number) => ((t - t0) / opts.windowS) * (w - 46) + 42;
  const y = (v: number) => h - 16 - ((v - lo) / (hi - lo)) * (h - 24);

  if (opts.band) {
    const clampY = (v: number) => Math.min(h - 16, Math.max(8, y(v)));
    ctx.fillStyle = COLORS.hard;
    ctx.fillRect(42, clampY(opts.band.hard_hi), w - 46, clampY(opts.band.hard_lo) - clampY(opts.band.hard_hi));
    ctx.fillStyle = COLORS.soft;
    ctx.fillRect(42, clampY(opts.band.soft_hi), w - 46, clampY(opts.band.soft_lo) - clampY(opts.band.soft_hi));
  }

  ctx.strokeStyle = COLORS.axis;
  ctx.lineWidth = 1;
  ctx.strokeRect(42, 8, w - 46, h - 24);

  ctx.fillStyle = COLORS.text;
  ctx.font = "10px system-ui, sans-serif";
  ctx.textAlign = "right";
  ctx.fillText(`${hi.toFixed(1)}`, 38, 14);
  ctx.fillText(`${lo.toFixed(1)}`, 38, h - 14);
  ctx.textAlign = "left";
  ctx.fillText(opts.unit, 4, h / 2);

  if (visible.length) {
    ctx.strokeStyle = COLORS.line;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    visible.forEach((p, i) => {
      if (i === 0) {
        ctx.moveTo(x(p.t), y(p.value));
      } else {
        ctx.lineTo(x(p.t), y(p.value));
      }
    });
    ctx.stroke();
  }
}
