import type { Point } from "./types.js";

/** Minimal 2D path surface; CanvasRenderingContext2D satisfies it. */
export interface PathSink {
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
}

export interface ArcSink extends PathSink {
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export interface Viewport {
  width: number;
  height: number;
  zoom?: number;
  panX?: number;
  panY?: number;
}

export interface Transform {
  /** Pixels per chord unit, identical for x and y. */
  scale: number;
  ox: number;
  oy: number;
}

const MARGIN = 0.05;

/**
 * Uniform chord-to-pixel transform. One scale serves both axes, so the
 * aspect ratio is locked 1:1 in chord units at any zoom; y points up.
 */
export function chordTransform(vp: Viewport): Transform {
  const zoom = vp.zoom ?? 1;
  const scale = Math.min(vp.width, vp.height) * (1 - 2 * MARGIN) * zoom;
  return {
    scale,
    ox: (vp.width - scale) / 2 + (vp.panX ?? 0),
    oy: vp.height / 2 + (vp.panY ?? 0),
  };
}

export function toScreen(p: Point, t: Transform): Point {
  return [t.ox + p[0] * t.scale, t.oy - p[1] * t.scale];
}

/**
 * Trace the contour into the sink, one vertex per input point, and return
 * the vertex count. The input array is never modified: zoom and pan live
 * entirely in the transform.
 */
export function tracePolyline(sink: PathSink, points: readonly Point[], t: Transform): number {
  sink.beginPath();
  let count = 0;
  for (const p of points) {
    const [sx, sy] = toScreen(p, t);
    if (count === 0) sink.moveTo(sx, sy);
    else sink.lineTo(sx, sy);
    count += 1;
  }
  sink.stroke();
  return count;
}

export function renderAirfoil(sink: PathSink, points: readonly Point[], vp: Viewport): number {
  return tracePolyline(sink, points, chordTransform(vp));
}

const HANDLE_RADIUS = 4;

export function renderHandles(sink: ArcSink, handles: readonly Point[], vp: Viewport): void {
  const t = chordTransform(vp);
  for (const h of handles) {
    const [sx, sy] = toScreen(h, t);
    sink.beginPath();
    sink.arc(sx, sy, HANDLE_RADIUS, 0, 2 * Math.PI);
    sink.fill();
  }
}
