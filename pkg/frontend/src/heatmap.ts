/** Pixel generation for the embedding-space heatmap. Pure functions over the
 * decoded grid matrix so they are testable without a canvas. */

import type { Matrix } from "./api.js";

/** Range of the finite cells; NaN/inf cells are excluded from autoscaling. */
export function finiteRange(data: Float32Array): { lo: number; hi: number } {
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < data.length; i++) {
    const v = data[i];
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) return { lo: 0, hi: 1 };
  if (lo === hi) return { lo, hi: lo + 1 };
  return { lo, hi };
}

// five-stop approximation of the familiar dark-blue-to-yellow ramp
const STOPS: [number, number, number][] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function colormap(t: number): [number, number, number] {
  const u = Math.min(1, Math.max(0, t)) * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(u));
  const f = u - i;
  const a = STOPS[i];
  const b = STOPS[i + 1];
  return [
    Math.round(a[0] + (b[0] - a[0]) * f),
    Math.round(a[1] + (b[1] - a[1]) * f),
    Math.round(a[2] + (b[2] - a[2]) * f),
  ];
}

/** RGBA pixels for the grid matrix. Row 0 of the matrix is the lowest y
 * value, which lands at the bottom of the image (canvas y grows downward). */
export function matrixToRgba(matrix: Matrix): Uint8ClampedArray<ArrayBuffer> {
  const { rows, cols, data } = matrix;
  const { lo, hi } = finiteRange(data);
  const rgba = new Uint8ClampedArray(rows * cols * 4);
  for (let row = 0; row < rows; row++) {
    const imageRow = rows - 1 - row;
    for (let col = 0; col < cols; col++) {
      const v = data[row * cols + col];
      const out = (imageRow * cols + col) * 4;
      if (!Number.isFinite(v)) {
        rgba[out] = 40;
        rgba[out + 1] = 40;
        rgba[out + 2] = 40;
      } else {
        const [r, g, b] = colormap((v - lo) / (hi - lo));
        rgba[out] = r;
        rgba[out + 1] = g;
        rgba[out + 2] = b;
      }
      rgba[out + 3] = 255;
    }
  }
  return rgba;
}
