import { describe, expect, it } from "vitest";

import { Point, StrokeBatcher, polygonToBitmap } from "../src/masktools.js";

describe("polygon fill", () => {
  it("fills a rectangle with half-open spans, like the box tool", () => {
    const bits = polygonToBitmap([[2, 3], [10, 3], [10, 8], [2, 8]], 16, 16);
    let count = 0;
    for (let y = 0; y < 16; y++) {
      for (let x = 0; x < 16; x++) {
        const inside = x >= 2 && x < 10 && y >= 3 && y < 8;
        if (bits[y * 16 + x]) count++;
        expect(!!bits[y * 16 + x]).toBe(inside);
      }
    }
    expect(count).toBe(8 * 5);
  });

  it("matches a point-in-polygon oracle on a triangle", () => {
    const tri: Point[] = [[5, 2], [28, 10], [8, 27]];
    const bits = polygonToBitmap(tri, 32, 32);
    const inside = (px: number, py: number) => {
      // ray casting oracle
      let hit = false;
      for (let i = 0, j = tri.length - 1; i < tri.length; j = i++) {
        const [xi, yi] = tri[i];
        const [xj, yj] = tri[j];
        if (yi > py !== yj > py && px < ((xj - xi) * (py - yi)) / (yj - yi) + xi) {
          hit = !hit;
        }
      }
      return hit;
    };
    for (let y = 0; y < 32; y++) {
      for (let x = 0; x < 32; x++) {
        expect(!!bits[y * 32 + x]).toBe(inside(x, y));
      }
    }
  });

  it("handles degenerate inputs", () => {
    expect(polygonToBitmap([], 8, 8).every((v) => v === 0)).toBe(true);
    expect(polygonToBitmap([[1, 1], [2, 2]], 8, 8).every((v) => v === 0)).toBe(true);
  });

  it("clips to image bounds", () => {
    const bits = polygonToBitmap([[-5, -5], [20, -5], [20, 20], [-5, 20]], 8, 8);
    expect(Array.from(bits).reduce((a, b) => a + b, 0)).toBe(64);
  });
});

describe("stroke batcher", () => {
  it("flushes a batch once enough points accumulate", () => {
    const batches: Point[][] = [];
    const batcher = new StrokeBatcher(4, (points) => batches.push(points));
    for (let i = 0; i < 4; i++) batcher.addPoint(i, i);
    expect(batches).toHaveLength(1);
    expect(batches[0]).toHaveLength(4);
  });

  it("keeps segments connected across batches", () => {
    const batches: Point[][] = [];
    const batcher = new StrokeBatcher(3, (points) => batches.push(points));
    for (let i = 0; i < 7; i++) batcher.addPoint(i, 0);
    batcher.end();
    for (let k = 1; k < batches.length; k++) {
      const prevLast = batches[k - 1][batches[k - 1].length - 1];
      expect(batches[k][0]).toEqual(prevLast);
    }
    // every input point appears somewhere
    const seen = new Set(batches.flat().map((p) => p[0]));
    for (let i = 0; i < 7; i++) expect(seen.has(i)).toBe(true);
  });

  it("end flushes the remainder and resets", () => {
    const batches: Point[][] = [];
    const batcher = new StrokeBatcher(10, (points) => batches.push(points));
    batcher.addPoint(1, 2);
    batcher.end();
    expect(batches).toHaveLength(1);
    expect(batcher.bufferedCount).toBe(0);
    batcher.end();
    expect(batches).toHaveLength(1);
  });
});
