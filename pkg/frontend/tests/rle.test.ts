import { describe, expect, it } from "vitest";

import { decodeBase64, decodeRegion } from "../src/rle.js";

function b64(bytes: number[]): string {
  return Buffer.from(Uint8Array.from(bytes)).toString("base64");
}

describe("decodeRegion", () => {
  it("returns null when the blob payload is absent (offline evidence)", () => {
    expect(decodeRegion({ box: [0, 0, 3, 3] })).toBeNull();
  });

  it("paints spans with run-length values", () => {
    // box (10,20)-(12,21): width 3, height 2
    // spans: row 20 x 10 len 3; row 21 x 11 len 2
    const spans = b64([0, 20, 0, 10, 0, 3, 0, 21, 0, 11, 0, 2]);
    // runs: red x3, blue x2
    const rle = b64([255, 0, 0, 0, 3, 0, 0, 255, 0, 2]);
    const image = decodeRegion({ box: [10, 20, 12, 21], spans_b64: spans, rle_b64: rle });
    expect(image).not.toBeNull();
    expect(image!.width).toBe(3);
    expect(image!.height).toBe(2);
    const px = (x: number, y: number) =>
      Array.from(image!.data.slice((y * 3 + x) * 4, (y * 3 + x) * 4 + 4));
    expect(px(0, 0)).toEqual([255, 0, 0, 255]);
    expect(px(2, 0)).toEqual([255, 0, 0, 255]);
    expect(px(0, 1)).toEqual([0, 0, 0, 0]); // outside any span: transparent
    expect(px(1, 1)).toEqual([0, 0, 255, 255]);
    expect(px(2, 1)).toEqual([0, 0, 255, 255]);
  });

  it("rejects corrupt blocks", () => {
    expect(() =>
      decodeRegion({
        box: [0, 0, 1, 1],
        spans_b64: b64([1, 2, 3]),
        rle_b64: b64([9, 9, 9, 0, 1]),
      }),
    ).toThrow();
    // span wants 2 pixels, runs only provide 1
    const spans = b64([0, 0, 0, 0, 0, 2]);
    const rle = b64([9, 9, 9, 0, 1]);
    expect(() =>
      decodeRegion({ box: [0, 0, 1, 0], spans_b64: spans, rle_b64: rle }),
    ).toThrow();
  });

  it("decodes base64 in both runtimes", () => {
    expect(Array.from(decodeBase64(b64([1, 2, 250])))).toEqual([1, 2, 250]);
  });
});
