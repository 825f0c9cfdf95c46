/** WebSocket session client: latest-frame buffer, paced input sender,
 * reconnect handling.  The server is authoritative for all dynamics; this
 * client only forwards operator input and renders what it is told. */

import { buildInputFrame, parseServerFrame, ServerFrame, StateFrame, TrialEndFrame } from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export interface ClientOptions {
  /** injectable for tests; defaults to the browser WebSocket */
  socketFactory?: (url: string) => WebSocketLike;
  /** input frames per second while the pointer is active */
  inputHz?: number;
  /** monotonic clock in seconds; defaults to performance.now()/1000 */
  now?: () => number;
  reconnectDelayMs?: number;
  scheduler?: (fn: () => void, ms: number) => unknown;
}

export class SessionClient {
  readonly url: string;
  state: ConnectionState = "connecting";
  latest: StateFrame | null = null;
  trialReports: TrialEndFrame[] = [];
  /** trials are aborted server-side on disconnect; surfaced for the banner */
  lastDisconnectAt: number | null = null;
  pointer: [number, number] = [0, 0];
  grab = false;
  pointerActive = false;

  private socket: WebSocketLike | null = null;
  private readonly makeSocket: (url: string) => WebSocketLike;
  private readonly now: () => number;
  private readonly inputPeriodMs: number;
  private readonly reconnectDelayMs: number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;
  private lastTs = -Infinity;
  private stopped = false;

  constructor(url: string, opts: ClientOptions = {}) {
    this.url = url;
    this.makeSocket = opts.socketFactory
      ?? ((u: string) => new WebSocket(u) as unknown as WebSocketLike);
    this.now = opts.now ?? (() => performance.now() / 1000);
    this.inputPeriodMs = 1000 / (opts.inputHz ?? 60);
    this.reconnectDelayMs = opts.reconnectDelayMs ?? 1000;
    this.schedule = opts.scheduler ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.state = "connecting";
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.state = "open";
      sock.send(JSON.stringify({ type: "ready" }));
      this.pumpInput();
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onerror = () => { /* onclose follows; banner handled there */ };
    sock.onclose = () => {
      this.state = "closed";
      this.lastDisconnectAt = this.now();
      this.latest = null; // a fresh trial begins on reconnect
      if (!this.stopped) {
        this.schedule(() => this.connect(), this.reconnectDelayMs);
      }
    };
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
  }

  handleMessage(text: string): void {
    const frame: ServerFrame | null = parseServerFrame(text);
    if (frame === null) return;
    if (frame.type === "state") {
      this.latest = frame; // latest-frame buffer: render loop reads at its own pace
    } else {
      this.trialReports.push(frame);
    }
  }

  setPointer(y: number, z: number): void {
    this.pointer = [y, z];
    this.pointerActive = true;
  }

  setGrab(grab: boolean): void {
    this.grab = grab;
  }

  /** Strictly increasing timestamps so the server can drop reordered frames. */
  nextTimestamp(): number {
    const ts = Math.max(this.now(), this.lastTs + 1e-6);
    this.lastTs = ts;
    return ts;
  }

  sendInputOnce(): boolean {
    if (this.state !== "open" || !this.socket || !this.pointerActive) return false;
    this.socket.send(buildInputFrame(this.pointer, this.grab, this.nextTimestamp()));
    return true;
  }

  private pumpInput(): void {
    if (this.stopped || this.state !== "open") return;
    this.sendInputOnce();
    this.schedule(() => this.pumpInput(), this.inputPeriodMs);
  }
}
