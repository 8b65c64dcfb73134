// Canvas drawing for one trajectory clip: faint full path, bright recent
// trail, highlighted current point.

import { Bounds, worldToScreen } from "./playback.js";

/** Matches the DOM paint-style union so a real 2D context satisfies Ctx2D. */
export type Paint = string | CanvasGradient | CanvasPattern;

/** The subset of CanvasRenderingContext2D the renderer needs (stubbed in
 * tests). */
export interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  strokeStyle: Paint;
  fillStyle: Paint;
  lineWidth: number;
  globalAlpha: number;
}

const TRAIL = 12;

export function drawClip(
  ctx: Ctx2D,
  coords: [number, number][],
  cursor: number,
  bounds: Bounds,
  width: number,
  height: number,
  color = "#2b7de9",
): void {
  ctx.clearRect(0, 0, width, height);
  const pts = coords.map((c) => worldToScreen(c, bounds, width, height));

  ctx.globalAlpha = 0.25;
  ctx.strokeStyle = "#999999";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(pts[0][0], pts[0][1]);
  for (let i = 1; i < pts.length; i++) ctx.lineTo(pts[i][0], pts[i][1]);
  ctx.stroke();

  const start = Math.max(0, cursor - TRAIL);
  if (cursor > start) {
    ctx.globalAlpha = 0.9;
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(pts[start][0], pts[start][1]);
    for (let i = start + 1; i <= cursor; i++) ctx.lineTo(pts[i][0], pts[i][1]);
    ctx.stroke();
  }

  ctx.globalAlpha = 1.0;
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(pts[cursor][0], pts[cursor][1], 5, 0, 2 * Math.PI);
  ctx.fill();
}
