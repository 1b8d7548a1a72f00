/** Decoding for the binary PGM (P5, 8-bit) mask payloads the service returns. */

export interface MaskImage {
  width: number;
  height: number;
  /** one byte per pixel: 1 foreground, 0 background */
  data: Uint8Array;
}

function parseHeader(bytes: Uint8Array, magic: string): { width: number; height: number; offset: number } {
  if (bytes.length < 2 || String.fromCharCode(bytes[0], bytes[1]) !== magic) {
    throw new Error(`not a ${magic} file`);
  }
  const fields: number[] = [];
  let pos = 2;
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      // comment runs to end of line
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    fields.push(parseInt(new TextDecoder().decode(bytes.subarray(start, pos)), 10));
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (!Number.isFinite(width) || !Number.isFinite(height)) throw new Error("bad PNM header");
  if (maxval !== 255) throw new Error("only 8-bit PNM supported");
  return { width, height, offset: pos };
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x0a || b === 0x0d || b === 0x09;
}

export function decodePgm(bytes: Uint8Array): MaskImage {
  const { width, height, offset } = parseHeader(bytes, "P5");
  const n = width * height;
  if (bytes.length < offset + n) throw new Error("truncated PGM payload");
  const data = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    data[i] = bytes[offset + i] > 127 ? 1 : 0;
  }
  return { width, height, data };
}

export function decodePgmBase64(payload: string): MaskImage {
  const raw = atob(payload);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  return decodePgm(bytes);
}

export function foregroundCount(mask: MaskImage): number {
  let count = 0;
  for (const v of mask.data) count += v;
  return count;
}

export { parseHeader };
