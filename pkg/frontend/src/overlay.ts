/** Pure mask-over-image compositing; the canvas glue lives in main.ts. */

import { MaskImage } from "./pgm.js";
import { RgbaImage } from "./ppm.js";

export const DEFAULT_TINT: [number, number, number] = [66, 133, 244];

/**
 * Tint the mask's foreground pixels over the image at the given alpha.
 * alpha 0 returns the raw image unchanged.
 */
export function compositeOverlay(
  image: RgbaImage,
  mask: MaskImage,
  alpha: number,
  tint: [number, number, number] = DEFAULT_TINT,
): Uint8ClampedArray {
  if (image.width !== mask.width || image.height !== mask.height) {
    throw new Error(
      `overlay size ${mask.width}x${mask.height} does not match image ${image.width}x${image.height}`,
    );
  }
  const out = new Uint8ClampedArray(image.rgba);
  if (alpha <= 0) return out;
  const a = Math.min(alpha, 1);
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] !== 1) continue;
    const o = i * 4;
    out[o] = Math.round(out[o] * (1 - a) + tint[0] * a);
    out[o + 1] = Math.round(out[o + 1] * (1 - a) + tint[1] * a);
    out[o + 2] = Math.round(out[o + 2] * (1 - a) + tint[2] * a);
  }
  return out;
}

/** Pixels that differ from the base image (i.e. visibly tinted). */
export function tintedPixelCount(base: RgbaImage, composited: Uint8ClampedArray): number {
  let count = 0;
  for (let i = 0; i < base.rgba.length; i += 4) {
    if (
      base.rgba[i] !== composited[i] ||
      base.rgba[i + 1] !== composited[i + 1] ||
      base.rgba[i + 2] !== composited[i + 2]
    ) {
      count++;
    }
  }
  return count;
}
