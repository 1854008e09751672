// Per-sensor time-series buffers for the charts. Stream events and backfill
// responses both land here; points are identified by (node, seq) so a
// backfill overlapping live events never double-plots, and everything
// outside the selected window is trimmed away (full history stays on the
// server).

import type { Classification, Reading } from "./api.js";

export interface SeriesPoint {
  t: number;
  value: number;
  node: number;
  seq: number;
  classification: Classification | null;
}

export class SeriesStore {
  private byKind = new Map<string, Map<string, SeriesPoint>>();
  private sortedCache = new Map<string, SeriesPoint[]>();

  constructor(public windowS: number = 7200) {}

  private bucket(kind: string): Map<string, SeriesPoint> {
    let bucket = this.byKind.get(kind);
    if (!bucket) {
      bucket = new Map();
      this.byKind.set(kind, bucket);
    }
    return bucket;
  }

  add(kind: string, point: SeriesPoint): void {
    this.bucket(kind).set(`${point.node}:${point.seq}`, point);
    this.sortedCache.delete(kind);
  }

  addReading(r: Reading): void {
    this.add(r.kind, {
      t: r.t,
      value: r.value,
      node: r.node,
      seq: r.seq,
      classification: r.classification,
    });
  }

  merge(readings: Reading[]): void {
    for (const r of readings) {
      this.addReading(r);
    }
  }

  trim(now: number): void {
    const cutoff = now - this.windowS;
    for (const [kind, bucket] of this.byKind) {
      let dropped = false;
      for (const [key, point] of bucket) {
        if (point.t < cutoff) {
          bucket.delete(key);
          dropped = true;
        }
      }
      if (dropped) {
        this.sortedCache.delete(kind);
      }
    }
  }

  points(kind: string): SeriesPoint[] {
    const cached = this.sortedCache.get(kind);
    if (cached) {
      return cached;
    }
    const sorted = [...this.bucket(kind).values()].sort(
      (a, b) => a.t - b.t || a.seq - b.seq,
    );
    this.sortedCache.set(kind, sorted);
    return sorted;
  }

  latest(kind: string): SeriesPoint | null {
    const pts = this.points(kind);
    return pts.length ? pts[pts.length - 1]! : null;
  }

  size(kind: string): number {
    return this.bucket(kind).size;
  }

  /** Largest timestamp currently held for any kind (backfill anchor). */
  newestT(): number | null {
    let newest: number | null = null;
    for (const kind of this.byKind.keys()) {
      const last = this.latest(kind);
      if (last && (newest === null || last.t > newest)) {
        newest = last.t;
      }
    }
    return newest;
  }
}
