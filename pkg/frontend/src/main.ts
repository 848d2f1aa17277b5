/**
 * Browser entry point: wire the session model, control buttons, and canvas
 * rendering together.  Configuration comes from URL query parameters:
 *
 *   ?service=ws://127.0.0.1:8787/session
 *   &controls=walk,run,turn        human-readable labels for control ids
 *   &seed=7&fps=4
 */

import { computeLayout, drawChart, drawTrajectory, runningJerk } from "./render";
import { SocketLike, UiSessionModel, connectWithRetry } from "./session";

const params = new URLSearchParams(location.search);
const serviceUrl =
  params.get("service") ?? `ws://${location.hostname || "127.0.0.1"}:8787/session`;
const labels = (params.get("controls") ?? "hold,sway,ramp").split(",");
const seed = Number(params.get("seed") ?? Math.floor(Math.random() * 1e6));
const fps = Number(params.get("fps") ?? 4);

const statusEl = document.getElementById("status")!;
const gapEl = document.getElementById("gap")!;
const jerkEl = document.getElementById("jerk")!;
const windowEl = document.getElementById("window")!;
const buttonsEl = document.getElementById("controls")!;
const logEl = document.getElementById("log")!;
const chart = document.getElementById("chart") as HTMLCanvasElement;
const traj = document.getElementById("trajectory") as HTMLCanvasElement;

const model = new UiSessionModel({
  onConnectionChange(state) {
    statusEl.textContent = state;
    statusEl.className = state;
  },
  onError(message) {
    appendLog(`service error: ${message}`);
  },
});

function appendLog(text: string): void {
  const line = document.createElement("div");
  line.textContent = `[${new Date().toLocaleTimeString()}] ${text}`;
  logEl.prepend(line);
  while (logEl.childElementCount > 40) logEl.lastElementChild?.remove();
}

labels.forEach((label, controlId) => {
  const btn = document.createElement("button");
  btn.textContent = `${controlId}: ${label}`;
  btn.onclick = () => {
    model.switchControl(controlId);
    appendLog(`switch -> ${label} (activated frame ${model.windowState?.n ?? "?"})`);
  };
  buttonsEl.appendChild(btn);
});

document.addEventListener("keydown", (ev) => {
  const id = Number(ev.key);
  if (!Number.isNaN(id) && id < labels.length) {
    model.switchControl(id);
    appendLog(`switch -> ${labels[id]} (hotkey)`);
  }
});

document.getElementById("reconnect")!.onclick = () => start();

function dial(): SocketLike {
  return new WebSocket(serviceUrl) as unknown as SocketLike;
}

function start(): void {
  appendLog(`connecting to ${serviceUrl} (fresh session)`);
  connectWithRetry(model, dial, { seed, control_id: 0 });
}

function renderLoop(): void {
  const layout = computeLayout(
    model.frames,
    model.windowState,
    model.switchLog,
    chart.width,
    chart.height,
  );
  drawChart(chart.getContext("2d")!, layout);
  drawTrajectory(traj.getContext("2d")!, model.frames.slice(-400), traj.width, traj.height);

  gapEl.textContent = model.gapDetected ? "GAP DETECTED" : "gap-free";
  gapEl.className = model.gapDetected ? "bad" : "good";
  const ws = model.windowState;
  windowEl.textContent = ws
    ? `t=${ws.t.toFixed(2)}  finalized=${ws.m}  activated=${ws.n}  in-flight=${ws.n - ws.m}`
    : "no window state yet";
  const jerk = runningJerk(model.frames.slice(-200), fps);
  jerkEl.textContent = jerk
    ? `peak jerk ${jerk.peak.toFixed(2)}  area ${jerk.area.toFixed(2)} (local)`
    : "jerk: warming up";
  requestAnimationFrame(renderLoop);
}

start();
requestAnimationFrame(renderLoop);
