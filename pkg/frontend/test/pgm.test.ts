import { describe, expect, it } from "vitest";

import { decodePgm, decodePgmBase64, foregroundCount } from "../src/pgm.js";

function pgmBytes(width: number, height: number, pixels: number[]): Uint8Array {
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n255\n`);
  const out = new Uint8Array(header.length + pixels.length);
  out.set(header);
  out.set(pixels, header.length);
  return out;
}

describe("decodePgm", () => {
  it("decodes a hand-built 2x2 mask", () => {
    const mask = decodePgm(pgmBytes(2, 2, [0, 255, 255, 0]));
    expect(mask.width).toBe(2);
    expect(mask.height).toBe(2);
    expect([...mask.data]).toEqual([0, 1, 1, 0]);
  });

  it("thresholds mid-grey like the server (>127)", () => {
    const mask = decodePgm(pgmBytes(2, 1, [127, 128]));
    expect([...mask.data]).toEqual([0, 1]);
  });

  it("skips header comments", () => {
    const header = new TextEncoder().encode("P5\n# note\n2 1\n255\n");
    const bytes = new Uint8Array([...header, 255, 0]);
    expect([...decodePgm(bytes).data]).toEqual([1, 0]);
  });

  it("rejects wrong magic and truncation", () => {
    expect(() => decodePgm(pgmBytes(2, 2, [0, 0, 0, 0]).fill(0x50, 0, 2))).toThrow();
    expect(() => decodePgm(pgmBytes(4, 4, [0, 0]))).toThrow(/truncated/);
  });

  it("round-trips through base64", () => {
    const bytes = pgmBytes(3, 1, [255, 0, 255]);
    const b64 = btoa(String.fromCharCode(...bytes));
    const mask = decodePgmBase64(b64);
    expect(foregroundCount(mask)).toBe(2);
  });
});
