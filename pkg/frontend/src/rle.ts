// Decode transmitted region blobs: (y, x0, len) row spans plus
// (r, g, b, count) runs, both big-endian. The console only ever renders
// these blobs, never whole frames.

import type { Evidence } from "./api.js";

export interface RegionImage {
  width: number;
  height: number;
  // RGBA, row-major over the bounding box; non-region pixels transparent
  data: Uint8ClampedArray<ArrayBuffer>;
}

export function decodeBase64(b64: string): Uint8Array {
  const text = atob(b64); // browsers and node >= 16 both provide atob
  const out = new Uint8Array(text.length);
  for (let i = 0; i < text.length; i++) out[i] = text.charCodeAt(i);
  return out;
}

function u16be(bytes: Uint8Array, offset: number): number {
  return (bytes[offset] << 8) | bytes[offset + 1];
}

export function decodeRegion(evidence: Evidence): RegionImage | null {
  if (!evidence.spans_b64 || !evidence.rle_b64) return null;
  const [x0, y0, x1, y1] = evidence.box;
  const width = x1 - x0 + 1;
  const height = y1 - y0 + 1;
  const spans = decodeBase64(evidence.spans_b64);
  const rle = decodeBase64(evidence.rle_b64);
  if (spans.length % 6 !== 0 || rle.length % 5 !== 0) {
    throw new Error("corrupt region blob");
  }

  const data = new Uint8ClampedArray(width * height * 4);
  let run = 0;
  let runLeft = 0;
  const nextPixel = (): [number, number, number] => {
    while (runLeft === 0) {
      if (run * 5 >= rle.length) throw new Error("region values exhausted");
      runLeft = u16be(rle, run * 5 + 3);
      run += 1;
    }
    runLeft -= 1;
    const base = (run - 1) * 5;
    return [rle[base], rle[base + 1], rle[base + 2]];
  };

  for (let s = 0; s < spans.length; s += 6) {
    const y = u16be(spans, s);
    const sx = u16be(spans, s + 2);
    const len = u16be(spans, s + 4);
    for (let i = 0; i < len; i++) {
      const [r, g, b] = nextPixel();
      const px = ((y - y0) * width + (sx + i - x0)) * 4;
      data[px] = r;
      data[px + 1] = g;
      data[px + 2] = b;
      data[px + 3] = 255;
    }
  }
  return { width, height, data };
}
