// Synchronized looping playback of a trajectory pair.

export interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

/** Both clips share one cursor, so they can never drift apart. */
export class ClipPair {
  private cursor = 0;

  constructor(
    readonly left: [number, number][],
    readonly right: [number, number][],
  ) {
    if (left.length !== right.length || left.length === 0) {
      throw new Error("clips must be non-empty and equally long");
    }
  }

  get length(): number {
    return this.left.length;
  }

  get leftCursor(): number {
    return this.cursor;
  }

  get rightCursor(): number {
    return this.cursor;
  }

  advance(frames = 1): void {
    this.cursor = (this.cursor + frames) % this.length;
  }

  reset(): void {
    this.cursor = 0;
  }
}

/** Viewing window per environment; falls back to the data's bounding box
 * (plus padding) for unknown environments. */
export function boundsFor(env: string, coords: [number, number][]): Bounds {
  if (env === "point_mass_reach") return { xMin: -2, xMax: 2, yMin: -2, yMax: 2 };
  if (env === "pendulum_swing_up") return { xMin: -1.25, xMax: 1.25, yMin: -1.25, yMax: 1.25 };
  const xs = coords.map((c) => c[0]);
  const ys = coords.map((c) => c[1]);
  const pad = 0.1;
  return {
    xMin: Math.min(...xs) - pad,
    xMax: Math.max(...xs) + pad,
    yMin: Math.min(...ys) - pad,
    yMax: Math.max(...ys) + pad,
  };
}

/** World -> canvas pixels: uniform scale, centered, y flipped so world
 * "up" renders upward. */
export function worldToScreen(
  point: [number, number],
  bounds: Bounds,
  width: number,
  height: number,
): [number, number] {
  const spanX = bounds.xMax - bounds.xMin;
  const spanY = bounds.yMax - bounds.yMin;
  const scale = 0.9 * Math.min(width / spanX, height / spanY);
  const cx = (bounds.xMin + bounds.xMax) / 2;
  const cy = (bounds.yMin + bounds.yMax) / 2;
  return [
    width / 2 + (point[0] - cx) * scale,
    height / 2 - (point[1] - cy) * scale,
  ];
}
