/**
 * Wire protocol of the streaming service: one JSON object per WebSocket
 * text message (newline-delimited when multiple objects share a payload).
 */

export interface FrameMessage {
  type: "frame";
  frame_index: number;
  step_index: number;
  values: number[];
  alpha_snapshot: number;
  control: number;
}

export interface WindowStateMessage {
  type: "window_state";
  t: number;
  m: number; // finalized frames
  n: number; // activated frames
  pending: { frame: number; control: number }[];
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export interface EndedMessage {
  type: "ended";
  frames: number;
}

export type ServerMessage = FrameMessage | WindowStateMessage | ErrorMessage | EndedMessage;

export interface StartMessage {
  type: "start";
  seed?: number;
  steps_per_unit?: number;
  cfg_scale?: number;
  control_id?: number;
  throttle_ms?: number;
}

export interface SetControlMessage {
  type: "set_control";
  control_id: number;
}

export type ClientMessage = StartMessage | SetControlMessage | { type: "stop" };

/** Parse one transport payload, which may carry several newline-separated objects. */
export function parseServerPayload(raw: string): ServerMessage[] {
  const out: ServerMessage[] = [];
  for (const line of raw.split("\n")) {
    if (!line.trim()) continue;
    const msg = JSON.parse(line);
    if (!isServerMessage(msg)) {
      throw new Error(`unrecognized server message: ${line.slice(0, 120)}`);
    }
    out.push(msg);
  }
  return out;
}

export function isServerMessage(msg: unknown): msg is ServerMessage {
  if (typeof msg !== "object" || msg === null) return false;
  const t = (msg as { type?: unknown }).type;
  if (t === "frame") {
    const f = msg as FrameMessage;
    return Number.isInteger(f.frame_index) && Array.isArray(f.values);
  }
  return t === "window_state" || t === "error" || t === "ended";
}

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
