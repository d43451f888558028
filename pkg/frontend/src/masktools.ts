/**
 * Client-side mask geometry helpers.
 *
 * Brush and box masks are rasterized server side; the polygon tool fills its
 * outline here and uploads the result as a binary mask. The scanline fill
 * uses the even-odd rule over pixel lattice coordinates, matching the
 * engine's convention that a pixel is addressed by its integer coordinate.
 */

export type Point = [number, number];

/** Even-odd scanline fill of a closed polygon into a width x height bitmap. */
export function polygonToBitmap(
  points: Point[],
  width: number,
  height: number,
): Uint8Array {
  const bits = new Uint8Array(width * height);
  if (points.length < 3) return bits;
  const ys = points.map((p) => p[1]);
  const y0 = Math.max(0, Math.floor(Math.min(...ys)));
  const y1 = Math.min(height - 1, Math.ceil(Math.max(...ys)));

  for (let y = y0; y <= y1; y++) {
    const crossings: number[] = [];
    for (let i = 0; i < points.length; i++) {
      const [ax, ay] = points[i];
      const [bx, by] = points[(i + 1) % points.length];
      if (ay === by) continue;
      // half-open span [min, max) so shared vertices count once
      if (y < Math.min(ay, by) || y >= Math.max(ay, by)) continue;
      crossings.push(ax + ((y - ay) / (by - ay)) * (bx - ax));
    }
    crossings.sort((a, b) => a - b);
    for (let k = 0; k + 1 < crossings.length; k += 2) {
      // half-open span [left, right): lattice points on the left crossing
      // are inside, on the right crossing outside
      const xStart = Math.max(0, Math.ceil(crossings[k]));
      const xEnd = Math.min(width - 1, Math.ceil(crossings[k + 1]) - 1);
      for (let x = xStart; x <= xEnd; x++) {
        bits[y * width + x] = 1;
      }
    }
  }
  return bits;
}

/**
 * Coalesces pointer-move samples into batched stroke segments so a drag
 * becomes a handful of paint requests instead of hundreds.
 */
export class StrokeBatcher {
  private points: Point[] = [];

  constructor(
    private flushSize: number,
    private onFlush: (points: Point[]) => void,
  ) {}

  addPoint(x: number, y: number): void {
    this.points.push([x, y]);
    if (this.points.length >= this.flushSize) {
      this.flushKeepingTail();
    }
  }

  /** Flush a full batch but keep the last point so segments stay connected. */
  private flushKeepingTail(): void {
    const batch = this.points;
    this.points = [batch[batch.length - 1]];
    this.onFlush(batch);
  }

  end(): void {
    if (this.points.length > 0) {
      const batch = this.points;
      this.points = [];
      if (batch.length >= 1) this.onFlush(batch);
    }
  }

  get bufferedCount(): number {
    return this.points.length;
  }
}
