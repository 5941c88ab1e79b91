/**
 * Run-length label-image codec, matching the server's wire format:
 * u16 height, u16 width, then (u16 run, u8 label) records, little-endian.
 */

export interface LabelImage {
  width: number;
  height: number;
  labels: Uint8Array; // row-major, length = width * height
}

export class RleError extends Error {}

export function rleDecode(data: Uint8Array): LabelImage {
  if (data.length < 4) {
    throw new RleError("RLE payload shorter than its header");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const height = view.getUint16(0, true);
  const width = view.getUint16(2, true);
  const expected = width * height;
  const labels = new Uint8Array(expected);
  let pos = 0;
  let offset = 4;
  while (offset < data.length) {
    if (offset + 3 > data.length) {
      throw new RleError(`truncated RLE record at byte ${offset}`);
    }
    const run = view.getUint16(offset, true);
    const value = view.getUint8(offset + 2);
    offset += 3;
    if (pos + run > expected) {
      throw new RleError(`RLE runs overflow ${expected} pixels`);
    }
    labels.fill(value, pos, pos + run);
    pos += run;
  }
  if (pos !== expected) {
    throw new RleError(`RLE runs cover ${pos} of ${expected} pixels`);
  }
  return { width, height, labels };
}

export function rleEncode(img: LabelImage): Uint8Array {
  const out: number[] = [];
  const push16 = (v: number) => {
    out.push(v & 0xff, (v >> 8) & 0xff);
  };
  push16(img.height);
  push16(img.width);
  let i = 0;
  const n = img.labels.length;
  while (i < n) {
    const value = img.labels[i];
    let run = 1;
    while (i + run < n && img.labels[i + run] === value && run < 0xffff) {
      run += 1;
    }
    push16(run);
    out.push(value);
    i += run;
  }
  return new Uint8Array(out);
}

/** Environment-agnostic base64 -> bytes (browser atob or node Buffer). */
export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const bytes = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) {
      bytes[i] = bin.charCodeAt(i);
    }
    return bytes;
  }
  // node
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export interface SegmapPayload {
  w: number;
  h: number;
  rle: string;
  areas: Record<string, number>;
}

export function decodeSegmap(payload: SegmapPayload): LabelImage {
  const img = rleDecode(base64ToBytes(payload.rle));
  if (img.width !== payload.w || img.height !== payload.h) {
    throw new RleError(`decoded ${img.width}x${img.height}, payload declares ${payload.w}x${payload.h}`);
  }
  return img;
}
