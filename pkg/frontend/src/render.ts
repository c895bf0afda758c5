// Canvas map rendering: occupancy cells, path polyline, robot triangle
// (estimate) with a ghost for the true pose, detections, goal marker.

import { decodeRle } from "./protocol.js";
import { GridSnapshot, TelemetryRecord } from "./types.js";
import { Viewport, worldToCanvas } from "./transform.js";

const COLORS = {
  unknown: "#dcdcdc",
  free: "#ffffff",
  occupied: "#37474f",
  path: "#1976d2",
  robot: "#2e7d32",
  ghost: "rgba(46, 125, 50, 0.35)",
  detection: "#e65100",
  goal: "#c62828",
};

export function drawScene(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  map: GridSnapshot | null,
  path: Array<[number, number]>,
  rec: TelemetryRecord | null,
): void {
  ctx.fillStyle = COLORS.unknown;
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  if (map) drawGrid(ctx, view, map);
  if (path.length > 1) drawPath(ctx, view, path);
  if (rec) {
    for (const det of rec.detections) {
      drawDetection(ctx, view, det.center, det.footprint);
    }
    if (rec.goal) drawGoal(ctx, view, rec.goal[0], rec.goal[1]);
    drawRobot(ctx, view, rec.pose_true.x, rec.pose_true.y, rec.pose_true.theta, true);
    drawRobot(ctx, view, rec.pose_est.x, rec.pose_est.y, rec.pose_est.theta, false);
  }
}

function drawGrid(ctx: CanvasRenderingContext2D, view: Viewport, map: GridSnapshot): void {
  const cells = decodeRle(map);
  const cell = map.resolution * view.scale;
  for (let ix = 0; ix < map.width; ix++) {
    for (let iy = 0; iy < map.height; iy++) {
      const code = cells[ix * map.height + iy];
      if (code === 0) continue; // leave unknown as the backdrop
      const wx = map.origin[0] + ix * map.resolution;
      const wy = map.origin[1] + iy * map.resolution;
      const [px, py] = worldToCanvas(view, wx, wy + map.resolution);
      ctx.fillStyle = code === 2 ? COLORS.occupied : COLORS.free;
      ctx.fillRect(px, py, cell + 0.5, cell + 0.5);
    }
  }
}

function drawPath(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  path: Array<[number, number]>,
): void {
  ctx.strokeStyle = COLORS.path;
  ctx.lineWidth = 2;
  ctx.beginPath();
  path.forEach(([x, y], i) => {
    const [px, py] = worldToCanvas(view, x, y);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function drawRobot(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  x: number,
  y: number,
  theta: number,
  ghost: boolean,
): void {
  const size = 0.28 * view.scale;
  const [px, py] = worldToCanvas(view, x, y);
  ctx.save();
  ctx.translate(px, py);
  ctx.rotate(-theta); // canvas y is flipped
  ctx.fillStyle = ghost ? COLORS.ghost : COLORS.robot;
  ctx.beginPath();
  ctx.moveTo(size, 0);
  ctx.lineTo(-size * 0.6, size * 0.55);
  ctx.lineTo(-size * 0.6, -size * 0.55);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}

function drawDetection(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  center: [number, number],
  footprint: [number, number],
): void {
  const [px, py] = worldToCanvas(view, center[0] - footprint[0] / 2, center[1] + footprint[1] / 2);
  ctx.strokeStyle = COLORS.detection;
  ctx.lineWidth = 2;
  ctx.strokeRect(px, py, footprint[0] * view.scale, footprint[1] * view.scale);
}

function drawGoal(ctx: CanvasRenderingContext2D, view: Viewport, x: number, y: number): void {
  const [px, py] = worldToCanvas(view, x, y);
  ctx.strokeStyle = COLORS.goal;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(px, py, 0.3 * view.scale, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(px - 6, py);
  ctx.lineTo(px + 6, py);
  ctx.moveTo(px, py - 6);
  ctx.lineTo(px, py + 6);
  ctx.stroke();
}
