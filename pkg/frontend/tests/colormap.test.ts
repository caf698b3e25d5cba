import { describe, expect, it } from "vitest";

import { colormap, gridToRgba, toneMap } from "../src/colormap.js";

describe("toneMap", () => {
  it("is zero at zero and saturates below one", () => {
    expect(toneMap(0, 3)).toBe(0);
    expect(toneMap(100, 3)).toBeLessThanOrEqual(1);
  });

  it("is monotone", () => {
    let prev = -1;
    for (let rho = 0; rho < 5; rho += 0.1) {
      const a = toneMap(rho, 1.7);
      expect(a).toBeGreaterThanOrEqual(prev);
      prev = a;
    }
  });

  it("matches the compositing identity", () => {
    const a = toneMap(0.8, 1.0);
    expect(1 - (1 - a) ** 3).toBeCloseTo(toneMap(3 * 0.8, 1.0), 12);
  });
});

describe("colormap", () => {
  it("clamps and interpolates", () => {
    expect(colormap(-1)).toEqual(colormap(0));
    expect(colormap(2)).toEqual(colormap(1));
    const mid = colormap(0.5);
    expect(mid).toHaveLength(3);
    for (const c of mid) {
      expect(c).toBeGreaterThanOrEqual(0);
      expect(c).toBeLessThanOrEqual(255);
    }
  });

  it("endpoints hit the stops", () => {
    expect(colormap(0)).toEqual([13, 8, 135]);
    expect(colormap(1)).toEqual([240, 249, 33]);
  });
});

describe("gridToRgba", () => {
  it("produces opaque pixels scaled by the grid max", () => {
    const rgba = gridToRgba([0, 1, 2, 4], 2, 2, 5);
    expect(rgba.length).toBe(16);
    expect(rgba[3]).toBe(255);
    // zero density maps to the colormap origin
    expect([rgba[0], rgba[1], rgba[2]]).toEqual([13, 8, 135]);
  });

  it("handles an all-zero grid", () => {
    const rgba = gridToRgba([0, 0], 2, 1, 5);
    expect([rgba[0], rgba[1], rgba[2]]).toEqual([13, 8, 135]);
  });
});
