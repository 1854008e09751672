// Client-side guard for the threshold editor: the same band ordering rule
// the gateway enforces, checked before submission so an impossible edit
// never leaves the browser.

import type { Band, Thresholds } from "./api.js";

export function bandErrors(name: string, band: Band): string[] {
  const errors: string[] = [];
  const edges: [string, number][] = [
    ["hard_lo", band.hard_lo],
    ["soft_lo", band.soft_lo],
    ["soft_hi", band.soft_hi],
    ["hard_hi", band.hard_hi],
  ];
  for (const [edge, value] of edges) {
    if (!Number.isFinite(value)) {
      errors.push(`${name}.${edge} is not a number`);
    }
  }
  if (errors.length) {
    return errors;
  }
  if (!(band.hard_lo <= band.soft_lo)) {
    errors.push(`${name}: hard_lo must be <= soft_lo`);
  }
  if (!(band.soft_lo <= band.soft_hi)) {
    errors.push(`${name}: soft_lo must be <= soft_hi`);
  }
  if (!(band.soft_hi <= band.hard_hi)) {
    errors.push(`${name}: soft_hi must be <= hard_hi`);
  }
  return errors;
}

export function thresholdErrors(doc: Thresholds): string[] {
  const errors: string[] = [];
  for (const name of ["temperature", "ph", "o2", "light"] as const) {
    errors.push(...bandErrors(name, doc[name]));
  }
  if (doc.humidity) {
    errors.push(...bandErrors("humidity", doc.humidity));
  }
  return errors;
}
