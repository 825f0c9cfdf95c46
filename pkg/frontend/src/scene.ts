/** Scene math and immediate-mode rendering for the operator console.
 *
 * The 3-D task is projected onto the workpiece plane: the canvas shows the
 * (y, z) plane the operator steers within, while the approach axis is shown
 * through the tool arrow's length/shading and the depth bar.  All drawing
 * goes through a minimal 2-D context interface so the logic is testable
 * without a browser canvas.
 */

import { StateFrame, SUBTASK_NAMES } from "./protocol.js";

export const ADAPTATION_THRESHOLD = 0.75;
export const REQUIRED_DEPTH_MM = 4.0;

export interface Layout {
  width: number;
  height: number;
  /** pixels per meter in the plane view */
  scale: number;
  /** canvas position of the world origin's (y, z) */
  cx: number;
  cy: number;
}

export function defaultLayout(width: number, height: number): Layout {
  const side = Math.min(width - 220, height - 80);
  return {
    width,
    height,
    scale: side / 0.3, // 30 cm of workpiece span
    cx: (width - 220) / 2,
    cy: height / 2 + 20,
  };
}

/** World (y, z) in meters to canvas pixels; y grows left, z grows up. */
export function worldToCanvas(layout: Layout, y: number, z: number): [number, number] {
  return [layout.cx - y * layout.scale, layout.cy - z * layout.scale];
}

export function canvasToWorld(layout: Layout, px: number, py: number): [number, number] {
  return [(layout.cx - px) / layout.scale, (layout.cy - py) / layout.scale];
}

export function depthFraction(depthMm: number): number {
  return Math.min(Math.max(depthMm / REQUIRED_DEPTH_MM, 0), 1);
}

export function dampingFraction(b: number): number {
  return Math.min(Math.max((b - 100) / 400, 0), 1);
}

export function subtaskName(index: number): string {
  return SUBTASK_NAMES[index] ?? "?";
}

/** The pre-contact adaptation indicator: estimated progress crossed the
 * threshold while the detector votes Driving. */
export function adaptationLit(frame: StateFrame): boolean {
  return frame.subtask_pred === 2 && frame.progress_pred >= ADAPTATION_THRESHOLD;
}

/** Arrow length encodes distance to the plane along the approach axis. */
export function approachFraction(frame: StateFrame): number {
  const remaining = frame.plane_x - frame.tool[0];
  const span = frame.plane_x > 0 ? frame.plane_x : 1;
  return Math.min(Math.max(1 - remaining / span, 0), 1);
}

/** Subset of CanvasRenderingContext2D the renderer needs (testable). */
export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

const SUBTASK_COLORS = ["#8a8f98", "#caa53d", "#3d9bca", "#ca3d4f"];

export function renderScene(ctx: Draw2D, layout: Layout, frame: StateFrame): void {
  ctx.clearRect(0, 0, layout.width, layout.height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, layout.width, layout.height);

  // prompt
  ctx.fillStyle = frame.prompt === "GO" ? "#58d68d" : "#f5f5f5";
  ctx.font = "bold 28px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(frame.prompt, layout.cx, 40);

  // workpiece square (15 x 15 cm centered on the origin)
  const half = 0.075 + 0.045;
  const [sq0x, sq0y] = worldToCanvas(layout, half, half);
  const side = 2 * half * layout.scale;
  ctx.strokeStyle = "#3c4552";
  ctx.lineWidth = 2;
  ctx.strokeRect(sq0x, sq0y, side, side);

  // red target circle at the frame-specified center and diameter
  const [tx, ty] = worldToCanvas(layout, frame.target[1], frame.target[2]);
  ctx.beginPath();
  ctx.arc(tx, ty, Math.max(frame.target_diameter / 2 * layout.scale, 2), 0, 2 * Math.PI);
  ctx.strokeStyle = "#e74c3c";
  ctx.lineWidth = 3;
  ctx.stroke();

  // tool arrow: position in the plane, length/shade by approach progress
  const [px, py] = worldToCanvas(layout, frame.tool[1], frame.tool[2]);
  const reach = 12 + 26 * approachFraction(frame);
  const shade = Math.round(120 + 135 * approachFraction(frame));
  ctx.strokeStyle = `rgb(${shade},${shade},255)`;
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(px - reach, py + reach);
  ctx.lineTo(px, py);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(px, py, 5, 0, 2 * Math.PI);
  ctx.fillStyle = frame.depth_mm > 0 ? "#e74c3c" : "#d5dbe3";
  ctx.fill();

  // --- right rail -----------------------------------------------------------
  const rail = layout.width - 200;
  ctx.textAlign = "left";
  ctx.font = "13px sans-serif";

  // subtask badge
  const badge = SUBTASK_COLORS[frame.subtask_pred] ?? "#666";
  ctx.fillStyle = badge;
  ctx.fillRect(rail, 60, 180, 30);
  ctx.fillStyle = "#0b0e13";
  ctx.font = "bold 14px sans-serif";
  ctx.fillText(`pred: ${subtaskName(frame.subtask_pred)}`, rail + 8, 80);
  ctx.fillStyle = "#9aa3ad";
  ctx.font = "12px sans-serif";
  ctx.fillText(`truth: ${subtaskName(frame.subtask_true)}`, rail, 108);

  // damping gauge 100..500 Ns/m
  ctx.fillStyle = "#9aa3ad";
  ctx.fillText(`damping ${frame.b.toFixed(0)} Ns/m`, rail, 140);
  ctx.strokeStyle = "#3c4552";
  ctx.strokeRect(rail, 148, 180, 14);
  ctx.fillStyle = "#3d9bca";
  ctx.fillRect(rail, 148, 180 * dampingFraction(frame.b), 14);

  // progress dial
  const lit = adaptationLit(frame);
  ctx.fillStyle = "#9aa3ad";
  const shown = Math.min(Math.max(frame.progress_pred, 0), 1);
  ctx.fillText(`progress ${(shown * 100).toFixed(0)} %`, rail, 192);
  ctx.strokeStyle = "#3c4552";
  ctx.strokeRect(rail, 200, 180, 14);
  ctx.fillStyle = lit ? "#58d68d" : "#caa53d";
  ctx.fillRect(rail, 200, 180 * shown, 14);
  ctx.strokeStyle = "#e74c3c";
  ctx.beginPath();
  ctx.moveTo(rail + 180 * ADAPTATION_THRESHOLD, 198);
  ctx.lineTo(rail + 180 * ADAPTATION_THRESHOLD, 216);
  ctx.stroke();
  if (lit) {
    ctx.fillStyle = "#58d68d";
    ctx.fillText("adaptation armed", rail, 232);
  }

  // depth bar (full exactly at the required depth)
  ctx.fillStyle = "#9aa3ad";
  ctx.fillText(`depth ${frame.depth_mm.toFixed(2)} / ${REQUIRED_DEPTH_MM.toFixed(1)} mm`,
    rail, 264);
  ctx.strokeStyle = "#3c4552";
  ctx.strokeRect(rail, 272, 180, 14);
  ctx.fillStyle = "#ca3d4f";
  ctx.fillRect(rail, 272, 180 * depthFraction(frame.depth_mm), 14);

  if (frame.degraded) {
    ctx.fillStyle = "#e74c3c";
    ctx.fillText("session degraded (loop overruns)", rail, 310);
  }
}
