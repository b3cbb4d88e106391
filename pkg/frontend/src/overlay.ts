/**
 * Pure view math: thresholding the 16-bit map and building RGBA overlays.
 * The server is the single source of truth for segmentation; the only
 * computation done here is binarizing its quantized map.
 */

/** Same quantization as the server: floor(t * 65535 + 0.5). */
export function quantizeThreshold(threshold: number): number {
  return Math.floor(threshold * 65535 + 0.5);
}

/** Binarize a decoded 16-bit map; matches the server's thresholded endpoint. */
export function thresholdMask(map: Uint16Array, threshold: number): Uint8Array {
  const level = quantizeThreshold(threshold);
  const out = new Uint8Array(map.length);
  for (let i = 0; i < map.length; i++) {
    out[i] = map[i] >= level ? 1 : 0;
  }
  return out;
}

const MAP_COLOR = [64, 200, 255]; // cyan ramp for the continuous map
const MASK_COLOR = [255, 200, 0]; // amber for binarized masks

/** RGBA overlay whose alpha scales with the map value. */
export function overlayFromMap(map: Uint16Array, opacity: number): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(map.length * 4);
  for (let i = 0; i < map.length; i++) {
    rgba[4 * i] = MAP_COLOR[0];
    rgba[4 * i + 1] = MAP_COLOR[1];
    rgba[4 * i + 2] = MAP_COLOR[2];
    rgba[4 * i + 3] = Math.round((map[i] / 65535) * opacity * 255);
  }
  return rgba;
}

/** RGBA overlay for a binary mask at constant alpha. */
export function overlayFromMask(mask: Uint8Array, opacity: number): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(mask.length * 4);
  const alpha = Math.round(opacity * 255);
  for (let i = 0; i < mask.length; i++) {
    rgba[4 * i] = MASK_COLOR[0];
    rgba[4 * i + 1] = MASK_COLOR[1];
    rgba[4 * i + 2] = MASK_COLOR[2];
    rgba[4 * i + 3] = mask[i] ? alpha : 0;
  }
  return rgba;
}
