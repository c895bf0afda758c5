// World <-> canvas mapping. World y points up, canvas y points down;
// the goal-click path inverts the exact transform used for rendering.

export interface Viewport {
  worldX: number; // world coords of the viewport origin (bottom-left)
  worldY: number;
  scale: number; // pixels per meter
  canvasHeight: number;
}

export function fitViewport(
  bounds: [number, number, number, number],
  canvasWidth: number,
  canvasHeight: number,
): Viewport {
  const [xmin, ymin, xmax, ymax] = bounds;
  const scale = Math.min(canvasWidth / (xmax - xmin), canvasHeight / (ymax - ymin));
  return { worldX: xmin, worldY: ymin, scale, canvasHeight };
}

export function worldToCanvas(v: Viewport, x: number, y: number): [number, number] {
  return [(x - v.worldX) * v.scale, v.canvasHeight - (y - v.worldY) * v.scale];
}

export function canvasToWorld(v: Viewport, px: number, py: number): [number, number] {
  return [px / v.scale + v.worldX, (v.canvasHeight - py) / v.scale + v.worldY];
}
