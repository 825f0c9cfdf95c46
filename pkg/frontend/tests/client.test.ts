import { describe, expect, it, vi } from "vitest";
import { SessionClient, WebSocketLike } from "../src/client.js";

class FakeSocket implements WebSocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  send(data: string) { this.sent.push(data); }
  close() { this.closed = true; this.onclose?.(); }
  open() { this.onopen?.(); }
  push(data: unknown) { this.onmessage?.({ data: JSON.stringify(data) }); }
}

const STATE = {
  type: "state", t: 0.5, tool: [0, 0, 0], v: [0, 0, 0], b: 300,
  subtask_pred: 0, subtask_true: 0, progress_pred: -1, depth_mm: 0,
  phase: "AwaitGrab", prompt: "GRAB THE HANDLE",
  target: [0.18, 0.075, 0.075], target_diameter: 0.012, plane_x: 0.18,
};

function makeClient(opts: { autoPump?: boolean } = {}) {
  const sockets: FakeSocket[] = [];
  let clock = 0;
  const pending: Array<() => void> = [];
  const client = new SessionClient("ws://test/ws", {
    socketFactory: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    now: () => clock,
    scheduler: (fn) => { if (opts.autoPump) pending.push(fn); return 0; },
  });
  return {
    client, sockets,
    tick: (dt: number) => { clock += dt; },
    flush: () => { const fns = pending.splice(0); fns.forEach((f) => f()); },
  };
}

describe("SessionClient", () => {
  it("sends a ready handshake on open", () => {
    const { client, sockets } = makeClient();
    client.connect();
    sockets[0].open();
    expect(JSON.parse(sockets[0].sent[0])).toEqual({ type: "ready" });
    expect(client.state).toBe("open");
  });

  it("keeps only the latest state frame", () => {
    const { client, sockets } = makeClient();
    client.connect();
    sockets[0].open();
    sockets[0].push({ ...STATE, t: 1.0 });
    sockets[0].push({ ...STATE, t: 2.0 });
    expect(client.latest!.t).toBe(2.0);
  });

  it("collects trial reports separately", () => {
    const { client, sockets } = makeClient();
    client.connect();
    sockets[0].open();
    sockets[0].push({ type: "trial_end", report: { valid: true } });
    expect(client.trialReports.length).toBe(1);
    expect(client.latest).toBeNull();
  });

  it("drops malformed frames without crashing", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const { client, sockets } = makeClient();
    client.connect();
    sockets[0].open();
    sockets[0].onmessage?.({ data: "garbage{{" });
    sockets[0].push({ type: "state", t: "NaN" });
    expect(client.latest).toBeNull();
    warn.mockRestore();
  });

  it("produces strictly increasing input timestamps", () => {
    const { client, sockets, tick } = makeClient();
    client.connect();
    sockets[0].open();
    client.setPointer(0.01, 0.02);
    client.sendInputOnce();
    client.sendInputOnce();           // same wall-clock instant
    tick(0.016);
    client.sendInputOnce();
    const frames = sockets[0].sent.slice(1).map((s) => JSON.parse(s));
    expect(frames.length).toBe(3);
    expect(frames[1].ts).toBeGreaterThan(frames[0].ts);
    expect(frames[2].ts).toBeGreaterThan(frames[1].ts);
  });

  it("does not send input before the pointer is active", () => {
    const { client, sockets } = makeClient();
    client.connect();
    sockets[0].open();
    expect(client.sendInputOnce()).toBe(false);
    expect(sockets[0].sent.length).toBe(1); // ready only
  });

  it("reconnects after close and resets the frame buffer", () => {
    const { client, sockets, flush } = makeClient({ autoPump: true });
    client.connect();
    sockets[0].open();
    sockets[0].push(STATE);
    expect(client.latest).not.toBeNull();
    sockets[0].close();
    expect(client.state).toBe("closed");
    expect(client.latest).toBeNull();
    expect(client.lastDisconnectAt).not.toBeNull();
    flush(); // scheduled reconnect
    expect(sockets.length).toBe(2);
    sockets[1].open();
    expect(client.state).toBe("open");
  });

  it("sends grab state with input frames", () => {
    const { client, sockets } = makeClient();
    client.connect();
    sockets[0].open();
    client.setPointer(0, 0);
    client.setGrab(true);
    client.sendInputOnce();
    const frame = JSON.parse(sockets[0].sent[1]);
    expect(frame.grab).toBe(true);
  });
});
