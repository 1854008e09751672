import { describe, expect, it } from "vitest";

import type { Band, Thresholds } from "../src/api.js";
import { bandErrors, thresholdErrors } from "../src/validate.js";

const ok: Band = { hard_lo: 18, soft_lo: 24, soft_hi: 26, hard_hi: 35 };

function thresholds(overrides: Partial<Record<string, Band>> = {}): Thresholds {
  return {
    temperature: ok,
    ph: { hard_lo: 6.5, soft_lo: 7.2, soft_hi: 8.5, hard_hi: 9.2 },
    o2: { hard_lo: 2, soft_lo: 5, soft_hi: 12, hard_hi: 20 },
    light: { hard_lo: 500, soft_lo: 2000, soft_hi: 100000, hard_hi: 200000 },
    humidity: null,
    ...overrides,
  } as Thresholds;
}

describe("band validation", () => {
  it("accepts a well-ordered band", () => {
    expect(bandErrors("temperature", ok)).toEqual([]);
  });

  it("blocks soft_hi below soft_lo", () => {
    const bad = { ...ok, soft_lo: 26, soft_hi: 24 };
    expect(bandErrors("temperature", bad)).toEqual([
      "temperature: soft_lo must be <= soft_hi",
    ]);
  });

  it("blocks soft band outside hard band", () => {
    expect(bandErrors("ph", { hard_lo: 7, soft_lo: 6, soft_hi: 8, hard_hi: 9 })).toHaveLength(1);
    expect(bandErrors("ph", { hard_lo: 6, soft_lo: 7, soft_hi: 9.5, hard_hi: 9 })).toHaveLength(1);
  });

  it("blocks non-numeric edges", () => {
    const bad = { ...ok, soft_hi: Number.NaN };
    expect(bandErrors("o2", bad)).toEqual(["o2.soft_hi is not a number"]);
  });

  it("checks every band in the document", () => {
    const doc = thresholds({ ph: { hard_lo: 9, soft_lo: 7, soft_hi: 8, hard_hi: 9.5 } });
    expect(thresholdErrors(doc)).toEqual(["ph: hard_lo must be <= soft_lo"]);
    expect(thresholdErrors(thresholds())).toEqual([]);
  });

  it("skips an absent humidity band but checks a present one", () => {
    const doc = thresholds({
      humidity: { hard_lo: 50, soft_lo: 30, soft_hi: 85, hard_hi: 95 },
    });
    expect(thresholdErrors(doc)).toEqual(["humidity: hard_lo must be <= soft_lo"]);
  });
});
