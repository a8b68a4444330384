import { describe, expect, it } from "vitest";

import {
  chordTransform,
  renderAirfoil,
  renderHandles,
  toScreen,
  tracePolyline,
} from "../src/canvas.js";
import type { ArcSink, PathSink } from "../src/canvas.js";
import type { Point } from "../src/types.js";
import { fixture } from "./mock.js";

const gallery = fixture("gallery_n8_seed5.json");
const contour: Point[] = gallery.payload.candidates[0].points;

function recordingSink() {
  const ops: { op: string; args: number[] }[] = [];
  const sink: ArcSink = {
    beginPath: () => ops.push({ op: "beginPath", args: [] }),
    moveTo: (x, y) => ops.push({ op: "moveTo", args: [x, y] }),
    lineTo: (x, y) => ops.push({ op: "lineTo", args: [x, y] }),
    stroke: () => ops.push({ op: "stroke", args: [] }),
    arc: (...args) => ops.push({ op: "arc", args: [...args] }),
    fill: () => ops.push({ op: "fill", args: [] }),
  };
  return { ops, sink };
}

describe("canvas renderer", () => {
  it("traces one vertex per contour point", () => {
    const { ops, sink } = recordingSink();
    const count = renderAirfoil(sink, contour, { width: 800, height: 600 });
    expect(count).toBe(257);
    expect(ops.filter((o) => o.op === "moveTo")).toHaveLength(1);
    expect(ops.filter((o) => o.op === "lineTo")).toHaveLength(256);
    expect(ops[0]!.op).toBe("beginPath");
    expect(ops.at(-1)!.op).toBe("stroke");
  });

  it("locks the aspect ratio 1:1 in chord units for any viewport", () => {
    for (const vp of [
      { width: 800, height: 600 },
      { width: 300, height: 900 },
      { width: 512, height: 512, zoom: 3 },
    ]) {
      const t = chordTransform(vp);
      const o = toScreen([0, 0], t);
      const dx = toScreen([1, 0], t);
      const dy = toScreen([0, 1], t);
      const horizontal = Math.abs(dx[0] - o[0]);
      const vertical = Math.abs(dy[1] - o[1]);
      expect(horizontal).toBeCloseTo(vertical, 12);
      expect(horizontal).toBeCloseTo(t.scale, 12);
    }
  });

  it("flips y so positive camber renders upward", () => {
    const t = chordTransform({ width: 400, height: 400 });
    const low = toScreen([0.5, 0.0], t);
    const high = toScreen([0.5, 0.1], t);
    expect(high[1]).toBeLessThan(low[1]);
  });

  it("zoom scales the drawing without touching the input coordinates", () => {
    const pristine = structuredClone(contour);
    const t1 = chordTransform({ width: 400, height: 400, zoom: 1 });
    const t2 = chordTransform({ width: 400, height: 400, zoom: 2 });

    const a = toScreen(contour[50]!, t1);
    const b = toScreen(contour[100]!, t1);
    const a2 = toScreen(contour[50]!, t2);
    const b2 = toScreen(contour[100]!, t2);
    const dist = Math.hypot(b[0] - a[0], b[1] - a[1]);
    const dist2 = Math.hypot(b2[0] - a2[0], b2[1] - a2[1]);
    expect(dist2).toBeCloseTo(2 * dist, 9);

    const { sink } = recordingSink();
    tracePolyline(sink, contour, t2);
    expect(contour).toEqual(pristine);
  });

  it("draws one handle marker per handle", () => {
    const { ops, sink } = recordingSink();
    const handles: Point[] = [
      [0, 0],
      [0.5, 0.06],
      [1, 0],
    ];
    renderHandles(sink, handles, { width: 640, height: 480 });
    expect(ops.filter((o) => o.op === "arc")).toHaveLength(3);
    expect(ops.filter((o) => o.op === "fill")).toHaveLength(3);
  });
});
