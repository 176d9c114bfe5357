/** Spectrogram image for the Mel matrix returned by /synthesize.
 *
 * The service returns predictions in the compressed domain, nominally in
 * [-1, 1], so the color scale is fixed rather than per-response: the same
 * Mel always renders the same image. Row 0 is the lowest filter and is
 * drawn at the bottom.
 */

import type { Matrix } from "./api.js";
import { colormap } from "./heatmap.js";

export function melToRgba(mel: Matrix): Uint8ClampedArray<ArrayBuffer> {
  const { rows, cols, data } = mel;
  const rgba = new Uint8ClampedArray(rows * cols * 4);
  for (let row = 0; row < rows; row++) {
    const imageRow = rows - 1 - row;
    for (let col = 0; col < cols; col++) {
      const v = data[row * cols + col];
      const t = Number.isFinite(v) ? (v + 1) / 2 : 0;
      const [r, g, b] = colormap(t);
      const out = (imageRow * cols + col) * 4;
      rgba[out] = r;
      rgba[out + 1] = g;
      rgba[out + 2] = b;
      rgba[out + 3] = 255;
    }
  }
  return rgba;
}
