/**
 * Live session model: an append-only frame buffer fed by the service, with
 * gap detection, window-state tracking, and control-switch bookkeeping.
 *
 * The model is a pure consumer of the wire protocol: it never mutates
 * received values and only ever sends control messages.  The transport is
 * injected (native WebSocket in the browser, `ws` in tests), so the logic
 * here is testable without a network.
 */

import {
  ClientMessage,
  EndedMessage,
  ErrorMessage,
  FrameMessage,
  ServerMessage,
  WindowStateMessage,
  encodeClientMessage,
  parseServerPayload,
} from "./protocol";

export type ConnectionState = "idle" | "connecting" | "open" | "closed" | "error";

/** Minimal transport surface shared by browser WebSocket and node `ws`. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface SwitchEvent {
  controlId: number;
  /** Latest activated frame (window n) when the switch was sent. */
  atActivatedFrame: number;
  wallTime: number;
}

export interface SessionEvents {
  onFrame?(frame: FrameMessage): void;
  onWindowState?(state: WindowStateMessage): void;
  onError?(message: string): void;
  onEnded?(msg: EndedMessage): void;
  onConnectionChange?(state: ConnectionState): void;
}

export class UiSessionModel {
  connection: ConnectionState = "idle";
  frames: FrameMessage[] = [];
  windowState: WindowStateMessage | null = null;
  selectedControl = 0;
  switchLog: SwitchEvent[] = [];
  /** Set when a frame arrives out of order or with a missing index. */
  gapDetected = false;
  lastError: string | null = null;
  ended: EndedMessage | null = null;

  private socket: SocketLike | null = null;
  private readonly events: SessionEvents;

  constructor(events: SessionEvents = {}) {
    this.events = events;
  }

  /** Number of contiguous frames received starting at index 0. */
  get frameCount(): number {
    return this.frames.length;
  }

  /** Attach a fresh transport and begin a session; clears all prior state. */
  attach(socket: SocketLike, start: Omit<ClientMessage & { type: "start" }, "type"> = {}): void {
    this.reset();
    this.socket = socket;
    this.setConnection("connecting");
    socket.onopen = () => {
      this.setConnection("open");
      this.send({ type: "start", ...start });
      if (start.control_id !== undefined) this.selectedControl = start.control_id;
    };
    socket.onmessage = (ev) => {
      for (const msg of parseServerPayload(String(ev.data))) this.handle(msg);
    };
    socket.onclose = () => this.setConnection("closed");
    socket.onerror = () => {
      this.lastError = "connection error";
      this.setConnection("error");
    };
  }

  reset(): void {
    if (this.socket) {
      try {
        this.socket.close();
      } catch {
        // already closed
      }
    }
    this.socket = null;
    this.frames = [];
    this.windowState = null;
    this.switchLog = [];
    this.gapDetected = false;
    this.lastError = null;
    this.ended = null;
  }

  /** Send a control switch; last writer wins at each frame activation. */
  switchControl(controlId: number): void {
    if (this.connection !== "open") {
      this.lastError = "cannot switch controls: session not open";
      return;
    }
    this.selectedControl = controlId;
    this.switchLog.push({
      controlId,
      atActivatedFrame: this.windowState ? this.windowState.n : this.frames.length,
      wallTime: Date.now(),
    });
    this.send({ type: "set_control", control_id: controlId });
  }

  stop(): void {
    if (this.connection === "open") this.send({ type: "stop" });
  }

  handle(msg: ServerMessage): void {
    switch (msg.type) {
      case "frame": {
        if (msg.frame_index !== this.frames.length) {
          this.gapDetected = true;
        } else {
          this.frames.push(msg);
        }
        this.events.onFrame?.(msg);
        break;
      }
      case "window_state":
        this.windowState = msg;
        this.events.onWindowState?.(msg);
        break;
      case "error":
        this.lastError = (msg as ErrorMessage).message;
        this.events.onError?.(this.lastError);
        break;
      case "ended":
        this.ended = msg;
        this.events.onEnded?.(msg);
        break;
    }
  }

  private send(msg: ClientMessage): void {
    this.socket?.send(encodeClientMessage(msg));
  }

  private setConnection(state: ConnectionState): void {
    this.connection = state;
    this.events.onConnectionChange?.(state);
  }
}

/**
 * Connect with retry: builds a UiSessionModel over a socket factory and
 * re-dials with a delay while the service is unreachable.
 */
export function connectWithRetry(
  model: UiSessionModel,
  dial: () => SocketLike,
  start: { seed?: number; control_id?: number } = {},
  retryMs = 1500,
  schedule: (fn: () => void, ms: number) => void = (fn, ms) => setTimeout(fn, ms),
): void {
  const attempt = () => {
    const sock = dial();
    model.attach(sock, start);
    const prevError = sock.onerror;
    sock.onerror = (ev) => {
      prevError?.(ev);
      schedule(attempt, retryMs);
    };
  };
  attempt();
}
