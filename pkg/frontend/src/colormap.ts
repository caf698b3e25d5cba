/** Density-to-pixel mapping shared by the heatmap, PCP and time panels. */

/** Opacity from density treated as optical depth, like the server's tone map. */
export function toneMap(density: number, gamma: number): number {
  return 1 - Math.exp(-gamma * density);
}

const STOPS: [number, [number, number, number]][] = [
  [0.0, [13, 8, 135]],
  [0.25, [126, 3, 168]],
  [0.5, [204, 71, 120]],
  [0.75, [248, 149, 64]],
  [1.0, [240, 249, 33]],
];

/** Plasma-like colormap over [0, 1]; clamps outside. */
export function colormap(t: number): [number, number, number] {
  const x = Math.max(0, Math.min(1, t));
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    if (x <= t1) {
      const [t0, c0] = STOPS[i - 1];
      const f = t1 === t0 ? 0 : (x - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + f * (c1[0] - c0[0])),
        Math.round(c0[1] + f * (c1[1] - c0[1])),
        Math.round(c0[2] + f * (c1[2] - c0[2])),
      ];
    }
  }
  return STOPS[STOPS.length - 1][1];
}

/** Row-major density grid to RGBA bytes, density scaled by its own max. */
export function gridToRgba(
  values: number[] | Float64Array,
  width: number,
  height: number,
  gamma: number,
): Uint8ClampedArray<ArrayBuffer> {
  let max = 0;
  for (let i = 0; i < values.length; i++) {
    if (values[i] > max) max = values[i];
  }
  const scale = max > 0 ? 1 / max : 0;
  const out = new Uint8ClampedArray(new ArrayBuffer(width * height * 4));
  for (let i = 0; i < width * height; i++) {
    const a = toneMap(values[i] * scale * gamma, 1.0);
    const [r, g, b] = colormap(a);
    out[4 * i] = r;
    out[4 * i + 1] = g;
    out[4 * i + 2] = b;
    out[4 * i + 3] = 255;
  }
  return out;
}
