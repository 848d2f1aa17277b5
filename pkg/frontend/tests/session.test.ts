import { describe, expect, it } from "vitest";

import { FrameMessage, parseServerPayload } from "../src/protocol";
import { SocketLike, UiSessionModel, connectWithRetry } from "../src/session";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.closed = true;
  }
  open(): void {
    this.onopen?.();
  }
  push(msg: object): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }
}

function frame(i: number, values = [0.1 * i, -0.1 * i], control = 0): FrameMessage {
  return {
    type: "frame",
    frame_index: i,
    step_index: 16 + 4 * i,
    values,
    alpha_snapshot: 1.0,
    control,
  };
}

describe("protocol parsing", () => {
  it("splits newline-delimited payloads", () => {
    const msgs = parseServerPayload(
      JSON.stringify(frame(0)) + "\n" + JSON.stringify({ type: "ended", frames: 1 }),
    );
    expect(msgs).toHaveLength(2);
    expect(msgs[0].type).toBe("frame");
    expect(msgs[1].type).toBe("ended");
  });

  it("rejects unknown message shapes", () => {
    expect(() => parseServerPayload('{"type":"mystery"}')).toThrow(/unrecognized/);
  });
});

describe("UiSessionModel", () => {
  it("sends start on open and appends ordered frames", () => {
    const model = new UiSessionModel();
    const sock = new FakeSocket();
    model.attach(sock, { seed: 7 });
    sock.open();
    expect(model.connection).toBe("open");
    expect(JSON.parse(sock.sent[0])).toEqual({ type: "start", seed: 7 });
    sock.push(frame(0));
    sock.push(frame(1));
    expect(model.frameCount).toBe(2);
    expect(model.gapDetected).toBe(false);
  });

  it("flags a gap when an index is skipped", () => {
    const model = new UiSessionModel();
    const sock = new FakeSocket();
    model.attach(sock);
    sock.open();
    sock.push(frame(0));
    sock.push(frame(2));
    expect(model.gapDetected).toBe(true);
    expect(model.frameCount).toBe(1); // buffer stays contiguous
  });

  it("never mutates received frame values", () => {
    const model = new UiSessionModel();
    const sock = new FakeSocket();
    model.attach(sock);
    sock.open();
    const values = [1.25, -2.5];
    sock.push(frame(0, values));
    expect(model.frames[0].values).toEqual([1.25, -2.5]);
  });

  it("logs switches against the latest activated frame, last writer wins", () => {
    const model = new UiSessionModel();
    const sock = new FakeSocket();
    model.attach(sock);
    sock.open();
    sock.push({ type: "window_state", t: 2.5, m: 4, n: 9, pending: [] });
    model.switchControl(1);
    model.switchControl(2);
    expect(model.switchLog).toHaveLength(2);
    expect(model.switchLog[0].atActivatedFrame).toBe(9);
    expect(model.selectedControl).toBe(2);
    const sent = sock.sent.map((s) => JSON.parse(s));
    expect(sent.filter((m) => m.type === "set_control").map((m) => m.control_id)).toEqual([1, 2]);
  });

  it("refuses switches while not open", () => {
    const model = new UiSessionModel();
    model.switchControl(1);
    expect(model.lastError).toMatch(/not open/);
    expect(model.switchLog).toHaveLength(0);
  });

  it("tracks window state and surfaces service errors without closing", () => {
    const model = new UiSessionModel();
    const sock = new FakeSocket();
    model.attach(sock);
    sock.open();
    sock.push({ type: "window_state", t: 1.25, m: 1, n: 5, pending: [{ frame: 4, control: 0 }] });
    expect(model.windowState?.n).toBe(5);
    sock.push({ type: "error", message: "control_id 9 out of range" });
    expect(model.lastError).toMatch(/out of range/);
    expect(model.connection).toBe("open");
  });

  it("reconnect resets the buffer (fresh session semantics)", () => {
    const model = new UiSessionModel();
    const a = new FakeSocket();
    model.attach(a);
    a.open();
    a.push(frame(0));
    expect(model.frameCount).toBe(1);
    const b = new FakeSocket();
    model.attach(b, { seed: 9 });
    expect(a.closed).toBe(true);
    expect(model.frameCount).toBe(0);
    expect(model.gapDetected).toBe(false);
  });

  it("retries dialing after a connection error", () => {
    const model = new UiSessionModel();
    const sockets: FakeSocket[] = [];
    const pending: (() => void)[] = [];
    connectWithRetry(
      model,
      () => {
        const s = new FakeSocket();
        sockets.push(s);
        return s;
      },
      {},
      10,
      (fn) => pending.push(fn),
    );
    expect(sockets).toHaveLength(1);
    sockets[0].onerror?.();
    expect(model.connection).toBe("error");
    expect(pending).toHaveLength(1);
    pending[0]();
    expect(sockets).toHaveLength(2);
    sockets[1].open();
    expect(model.connection).toBe("open");
  });
});
