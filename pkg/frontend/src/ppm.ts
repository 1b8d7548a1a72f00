/** Decoding for the binary PPM (P6, 8-bit) scene images the service serves. */

import { parseHeader } from "./pgm.js";

export interface RgbaImage {
  width: number;
  height: number;
  /** RGBA, ready for ImageData */
  rgba: Uint8ClampedArray;
}

export function decodePpm(bytes: Uint8Array): RgbaImage {
  const { width, height, offset } = parseHeader(bytes, "P6");
  const n = width * height;
  if (bytes.length < offset + n * 3) throw new Error("truncated PPM payload");
  const rgba = new Uint8ClampedArray(n * 4);
  for (let i = 0; i < n; i++) {
    rgba[i * 4] = bytes[offset + i * 3];
    rgba[i * 4 + 1] = bytes[offset + i * 3 + 1];
    rgba[i * 4 + 2] = bytes[offset + i * 3 + 2];
    rgba[i * 4 + 3] = 255;
  }
  return { width, height, rgba };
}
