import { describe, expect, it } from "vitest";

import { FrameMessage, WindowStateMessage } from "../src/protocol";
import { computeLayout, runningJerk } from "../src/render";

function frame(i: number, values: number[]): FrameMessage {
  return { type: "frame", frame_index: i, step_index: i, values, alpha_snapshot: 1, control: 0 };
}

describe("runningJerk", () => {
  it("is null until four frames arrived", () => {
    expect(runningJerk([frame(0, [0]), frame(1, [1]), frame(2, [2])], 4)).toBeNull();
  });

  it("is zero for a constant stream", () => {
    const frames = Array.from({ length: 8 }, (_, i) => frame(i, [1.5, -2]));
    const stats = runningJerk(frames, 4)!;
    expect(stats.peak).toBe(0);
    expect(stats.area).toBe(0);
  });

  it("matches the cubic-ramp closed form", () => {
    const fps = 5;
    const frames = Array.from({ length: 10 }, (_, i) => frame(i, [(i / fps) ** 3]));
    const stats = runningJerk(frames, fps)!;
    expect(stats.peak).toBeCloseTo(6, 9);
  });
});

describe("computeLayout", () => {
  const ws: WindowStateMessage = { type: "window_state", t: 2.0, m: 2, n: 6, pending: [] };

  it("handles an empty buffer", () => {
    const layout = computeLayout([], null, [], 800, 300);
    expect(layout.channels).toHaveLength(0);
    expect(layout.windowBand).toBeNull();
    expect(layout.alphaStrip).toHaveLength(0);
  });

  it("produces one polyline per channel inside the canvas", () => {
    const frames = Array.from({ length: 12 }, (_, i) => frame(i, [Math.sin(i / 3), i * 0.1]));
    const layout = computeLayout(frames, ws, [], 800, 300);
    expect(layout.channels).toHaveLength(2);
    for (const pts of layout.channels) {
      expect(pts).toHaveLength(12);
      for (const p of pts) {
        expect(p.x).toBeGreaterThanOrEqual(0);
        expect(p.x).toBeLessThanOrEqual(800);
        expect(p.y).toBeGreaterThanOrEqual(0);
        expect(p.y).toBeLessThanOrEqual(300);
      }
    }
  });

  it("orders the window band and keeps it non-negative in width", () => {
    const frames = Array.from({ length: 8 }, (_, i) => frame(i, [i]));
    const layout = computeLayout(frames, ws, [], 800, 300);
    expect(layout.windowBand).not.toBeNull();
    expect(layout.windowBand!.x1).toBeGreaterThan(layout.windowBand!.x0);
  });

  it("places switch marks at their activation frames", () => {
    const frames = Array.from({ length: 20 }, (_, i) => frame(i, [i]));
    const layout = computeLayout(frames, ws, [{ atActivatedFrame: 10, controlId: 2 }], 800, 300);
    expect(layout.switchMarks).toHaveLength(1);
    expect(layout.switchMarks[0].controlId).toBe(2);
    const frame10x = layout.channels[0][10].x;
    expect(layout.switchMarks[0].x).toBeCloseTo(frame10x, 6);
  });

  it("windows the view to the most recent frames", () => {
    const frames = Array.from({ length: 600 }, (_, i) => frame(i, [i]));
    const layout = computeLayout(frames, null, [], 800, 300, 240);
    expect(layout.firstFrame).toBe(360);
    expect(layout.channels[0]).toHaveLength(240);
  });
});
