/** The canvas <-> embedding affine map.
 *
 * The server renders its grid maps over the bounding box of the learned
 * instrument coordinates expanded 10% (5% per side); a degenerate axis is
 * opened by max(0.05*|lo|, 1e-3). Cell (row, col) of the matrix is sampled
 * at the cell center lo + (i + 0.5) * span / resolution, with rows indexing
 * the y axis. The canvas draws row 0 at the bottom, so y grows upward.
 * These functions replicate that convention bit for bit so a clicked pixel
 * selects exactly the embedding point the server evaluated there.
 */

export interface Bounds {
  lo: [number, number];
  hi: [number, number];
}

export function gridBounds(coordinates: [number, number][]): Bounds {
  if (coordinates.length === 0) throw new Error("no coordinates");
  const lo: [number, number] = [Infinity, Infinity];
  const hi: [number, number] = [-Infinity, -Infinity];
  for (const [x, y] of coordinates) {
    lo[0] = Math.min(lo[0], x);
    lo[1] = Math.min(lo[1], y);
    hi[0] = Math.max(hi[0], x);
    hi[1] = Math.max(hi[1], y);
  }
  for (const axis of [0, 1] as const) {
    const span = hi[axis] - lo[axis];
    const pad = span > 0 ? 0.05 * span : Math.max(0.05 * Math.abs(lo[axis]), 1e-3);
    lo[axis] -= pad;
    hi[axis] += pad;
  }
  return { lo, hi };
}

/** Embedding point at the center of the grid cell under canvas pixel (cx, cy). */
export function pixelToEmbedding(cx: number, cy: number, resolution: number, bounds: Bounds): [number, number] {
  const col = Math.min(resolution - 1, Math.max(0, Math.floor(cx)));
  const row = resolution - 1 - Math.min(resolution - 1, Math.max(0, Math.floor(cy)));
  return [
    bounds.lo[0] + ((col + 0.5) * (bounds.hi[0] - bounds.lo[0])) / resolution,
    bounds.lo[1] + ((row + 0.5) * (bounds.hi[1] - bounds.lo[1])) / resolution,
  ];
}

/** Fractional canvas position of an embedding point (inverse of the above). */
export function embeddingToPixel(point: [number, number], resolution: number, bounds: Bounds): [number, number] {
  const col = ((point[0] - bounds.lo[0]) / (bounds.hi[0] - bounds.lo[0])) * resolution - 0.5;
  const row = ((point[1] - bounds.lo[1]) / (bounds.hi[1] - bounds.lo[1])) * resolution - 0.5;
  return [col, resolution - 1 - row];
}

export function clampToBounds(point: [number, number], bounds: Bounds): [number, number] {
  return [
    Math.min(bounds.hi[0], Math.max(bounds.lo[0], point[0])),
    Math.min(bounds.hi[1], Math.max(bounds.lo[1], point[1])),
  ];
}

export function lerp(a: [number, number], b: [number, number], lam: number): [number, number] {
  return [a[0] + (b[0] - a[0]) * lam, a[1] + (b[1] - a[1]) * lam];
}
