/**
 * Chart rendering for the steering UI: per-channel line charts over frame
 * index with the active window and per-frame saturation overlaid, an
 * optional 2-D trajectory view, and running smoothness stats.
 *
 * Layout computation is split from canvas drawing so tests can assert on
 * the computed geometry without a DOM.
 */

import { FrameMessage, WindowStateMessage } from "./protocol";

export interface ChartLayout {
  width: number;
  height: number;
  /** one polyline per feature channel, in pixel coordinates */
  channels: { x: number; y: number }[][];
  /** pixel x-range of the active window [m, n), null when empty */
  windowBand: { x0: number; x1: number } | null;
  /** saturation strip: one cell per visible frame, 0..1 */
  alphaStrip: { x: number; width: number; alpha: number }[];
  /** frame indices of logged control switches that are visible */
  switchMarks: { x: number; controlId: number }[];
  valueRange: { min: number; max: number };
  firstFrame: number;
}

export interface JerkStats {
  peak: number;
  area: number;
}

/** Third-order finite-difference smoothness stats over received frames. */
export function runningJerk(frames: FrameMessage[], fps: number): JerkStats | null {
  if (frames.length < 4) return null;
  const D = frames[0].values.length;
  let peak = 0;
  const perFrame: number[] = [];
  for (let k = 0; k + 3 < frames.length; k++) {
    let best = 0;
    for (let d = 0; d < D; d++) {
      const j =
        (frames[k + 3].values[d] -
          3 * frames[k + 2].values[d] +
          3 * frames[k + 1].values[d] -
          frames[k].values[d]) *
        fps ** 3;
      best = Math.max(best, Math.abs(j));
      peak = Math.max(peak, Math.abs(j));
    }
    perFrame.push(best);
  }
  let area = 0;
  for (let i = 0; i + 1 < perFrame.length; i++) {
    area += 0.5 * (perFrame[i] + perFrame[i + 1]) / fps;
  }
  return { peak, area };
}

export function computeLayout(
  frames: FrameMessage[],
  windowState: WindowStateMessage | null,
  switches: { atActivatedFrame: number; controlId: number }[],
  width: number,
  height: number,
  maxVisible = 240,
): ChartLayout {
  const first = Math.max(0, frames.length - maxVisible);
  const visible = frames.slice(first);
  const lastIndex = windowState ? Math.max(windowState.n, frames.length) : frames.length;
  const span = Math.max(maxVisible, lastIndex - first);
  const xOf = (frame: number) => ((frame - first) / span) * width;

  let min = Infinity;
  let max = -Infinity;
  for (const f of visible) {
    for (const v of f.values) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!isFinite(min)) {
    min = -1;
    max = 1;
  }
  if (max - min < 1e-9) {
    min -= 1;
    max += 1;
  }
  const pad = 0.08 * (max - min);
  min -= pad;
  max += pad;
  const yOf = (v: number) => height - ((v - min) / (max - min)) * height;

  const D = visible.length ? visible[0].values.length : 0;
  const channels: { x: number; y: number }[][] = [];
  for (let d = 0; d < D; d++) {
    channels.push(visible.map((f) => ({ x: xOf(f.frame_index), y: yOf(f.values[d]) })));
  }

  let windowBand: { x0: number; x1: number } | null = null;
  if (windowState && windowState.n > windowState.m) {
    windowBand = { x0: xOf(windowState.m), x1: xOf(windowState.n) };
  }

  const alphaStrip = visible.map((f) => ({
    x: xOf(f.frame_index),
    width: width / span,
    alpha: f.alpha_snapshot,
  }));
  if (windowState) {
    for (const p of windowState.pending) {
      if (p.frame >= first) {
        alphaStrip.push({ x: xOf(p.frame), width: width / span, alpha: 0.5 });
      }
    }
  }

  const switchMarks = switches
    .filter((s) => s.atActivatedFrame >= first)
    .map((s) => ({ x: xOf(s.atActivatedFrame), controlId: s.controlId }));

  return {
    width,
    height,
    channels,
    windowBand,
    alphaStrip,
    switchMarks,
    valueRange: { min, max },
    firstFrame: first,
  };
}

const CHANNEL_COLORS = ["#4cc9f0", "#f72585", "#b5e48c", "#ffd166", "#9d4edd", "#f8961e"];

export function drawChart(ctx: CanvasRenderingContext2D, layout: ChartLayout): void {
  const { width, height } = layout;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10131a";
  ctx.fillRect(0, 0, width, height);

  if (layout.windowBand) {
    ctx.fillStyle = "rgba(76, 201, 240, 0.12)";
    ctx.fillRect(layout.windowBand.x0, 0, layout.windowBand.x1 - layout.windowBand.x0, height);
  }

  layout.channels.forEach((pts, d) => {
    if (pts.length < 2) return;
    ctx.strokeStyle = CHANNEL_COLORS[d % CHANNEL_COLORS.length];
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(pts[0].x, pts[0].y);
    for (const p of pts.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  });

  // saturation strip along the bottom edge
  for (const cell of layout.alphaStrip) {
    const c = Math.round(cell.alpha * 255);
    ctx.fillStyle = `rgb(${c}, ${Math.round(80 + 100 * cell.alpha)}, ${255 - c})`;
    ctx.fillRect(cell.x, height - 6, Math.max(1, cell.width), 6);
  }

  for (const mark of layout.switchMarks) {
    ctx.strokeStyle = "#ffffff";
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(mark.x, 0);
    ctx.lineTo(mark.x, height);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#ffffff";
    ctx.fillText(`c${mark.controlId}`, mark.x + 3, 12);
  }
}

/** 2-D trajectory view for D = 2 streams. */
export function drawTrajectory(
  ctx: CanvasRenderingContext2D,
  frames: FrameMessage[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10131a";
  ctx.fillRect(0, 0, width, height);
  if (!frames.length || frames[0].values.length < 2) return;
  let min = Infinity;
  let max = -Infinity;
  for (const f of frames) {
    for (const v of f.values.slice(0, 2)) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  const span = Math.max(max - min, 1e-9) * 1.15;
  const mid = (min + max) / 2;
  const px = (v: number) => ((v - mid) / span + 0.5) * width;
  const py = (v: number) => height - ((v - mid) / span + 0.5) * height;
  ctx.strokeStyle = "#4cc9f0";
  ctx.lineWidth = 1.2;
  ctx.beginPath();
  ctx.moveTo(px(frames[0].values[0]), py(frames[0].values[1]));
  for (const f of frames.slice(1)) ctx.lineTo(px(f.values[0]), py(f.values[1]));
  ctx.stroke();
  const last = frames[frames.length - 1];
  ctx.fillStyle = "#f72585";
  ctx.beginPath();
  ctx.arc(px(last.values[0]), py(last.values[1]), 4, 0, 2 * Math.PI);
  ctx.fill();
}
