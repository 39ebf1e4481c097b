// Wire protocol types and the client session. Mirrors the JSON frames the
// retargeting service emits; fields not listed here are passed through as-is.

export type DeviceName = 'headset' | 'left_controller' | 'right_controller' | 'waist';

export const DEVICES: DeviceName[] = ['headset', 'left_controller', 'right_controller', 'waist'];

export interface Pose {
  position: [number, number, number];
  orientation: [number, number, number, number];
}

export interface HelloFrame {
  kind: 'hello';
  seq: number;
  proto_version: number;
  model: string;
  n_joints: number;
  joint_names: string[];
  rate: number;
  lockstep: boolean;
  dt: number;
}

export interface FramePose {
  position: number[];
  orientation: number[];
}

export interface BodyState {
  name: string;
  kind: 'sphere' | 'capsule';
  p0: number[];
  p1: number[];
  radius: number;
}

export interface StateUpdateFrame {
  kind: 'state_update';
  seq: number;
  tick: number;
  t: number;
  q: number[];
  qdot: number[];
  frames: Record<string, FramePose>;
  bodies: BodyState[];
  pair_h: number[];
  min_h: number;
  channels: Record<string, string>;
  locked: boolean;
  grasp: Record<string, string>;
}

export interface DiagnosticsFrame {
  kind: 'diagnostics';
  seq: number;
  [key: string]: unknown;
}

export interface ErrorFrame {
  kind: 'error';
  seq: number;
  message: string;
  in_reply_to?: number;
}

export type ServerFrame = HelloFrame | StateUpdateFrame | DiagnosticsFrame | ErrorFrame;

export interface TrackerButtons {
  clutch?: boolean;
  lock?: boolean;
  grasp?: boolean;
}

export type CommandName =
  | 'tick'
  | 'reset'
  | 'clutch_engage'
  | 'clutch_release'
  | 'lock_engage'
  | 'lock_release'
  | 'grasp_cycle'
  | 'diagnostics';

export type SessionStatus = 'connecting' | 'open' | 'closed' | 'stale';

export interface SessionEvents {
  onHello?: (f: HelloFrame) => void;
  onState?: (f: StateUpdateFrame) => void;
  onDiagnostics?: (f: DiagnosticsFrame) => void;
  onError?: (f: ErrorFrame) => void;
  onStatus?: (s: SessionStatus) => void;
}

// Minimal socket surface, satisfied by both the browser WebSocket and the
// 'ws' package, so the session can be driven from node tests.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  readyState: number;
}

export type SocketFactory = (url: string) => SocketLike;

/**
 * Trailing-edge rate limiter for tracker samples. The first sample in a quiet
 * period goes out immediately; later samples inside the interval replace the
 * pending one and are flushed when the interval elapses, so the receiver
 * always ends up with the newest pose and never sees more than `hz` sends
 * per second.
 */
export class SampleThrottle {
  private lastSent = -Infinity;
  private pending: string | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private readonly intervalMs: number;

  constructor(
    hz: number,
    private readonly send: (payload: string) => void,
    private readonly clock: () => number = () => Date.now(),
  ) {
    if (!(hz > 0)) throw new Error('throttle rate must be positive');
    this.intervalMs = 1000 / hz;
  }

  offer(payload: string): void {
    const now = this.clock();
    if (now - this.lastSent >= this.intervalMs) {
      this.lastSent = now;
      this.send(payload);
      return;
    }
    this.pending = payload;
    if (this.timer === null) {
      const wait = this.intervalMs - (now - this.lastSent);
      this.timer = setTimeout(() => this.flush(), Math.max(0, wait));
    }
  }

  private flush(): void {
    this.timer = null;
    if (this.pending === null) return;
    const now = this.clock();
    const remaining = this.intervalMs - (now - this.lastSent);
    if (remaining > 1e-9) {
      // timer fired early (clamping, rounding); hold the line on the rate
      this.timer = setTimeout(() => this.flush(), remaining);
      return;
    }
    this.lastSent = now;
    const payload = this.pending;
    this.pending = null;
    this.send(payload);
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.pending = null;
  }
}

const RECONNECT_BASE_MS = 250;
const RECONNECT_MAX_MS = 5000;
const STALE_AFTER_MS = 1000;

/**
 * One operator connection. Owns the socket, reconnects with exponential
 * backoff after drops, throttles outgoing tracker samples per device, and
 * flags the stream stale when no state_update arrives for over a second.
 */
export class UiSession {
  private ws: SocketLike | null = null;
  private backoffMs = RECONNECT_BASE_MS;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private staleTimer: ReturnType<typeof setInterval> | null = null;
  private lastStateAt = 0;
  private staleFlagged = false;
  private closedByUser = false;
  private throttles = new Map<DeviceName, SampleThrottle>();
  seq = 0;
  hello: HelloFrame | null = null;

  constructor(
    private readonly url: string,
    private readonly events: SessionEvents = {},
    private readonly makeSocket: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
    private readonly clock: () => number = () => Date.now(),
    sampleHz = 60,
  ) {
    for (const d of DEVICES) {
      this.throttles.set(d, new SampleThrottle(sampleHz, (p) => this.sendRaw(p), clock));
    }
  }

  connect(): void {
    this.closedByUser = false;
    this.events.onStatus?.('connecting');
    const ws = this.makeSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = RECONNECT_BASE_MS;
      this.lastStateAt = this.clock();
      this.staleFlagged = false;
      this.events.onStatus?.('open');
      this.startStaleWatch();
    };
    ws.onmessage = (ev) => this.handleMessage(String(ev.data));
    ws.onerror = () => {};
    ws.onclose = () => {
      this.stopStaleWatch();
      this.events.onStatus?.('closed');
      if (!this.closedByUser) this.scheduleReconnect();
    };
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.reconnectTimer = null;
    this.stopStaleWatch();
    for (const t of this.throttles.values()) t.dispose();
    this.ws?.close();
    this.ws = null;
  }

  private scheduleReconnect(): void {
    if (this.reconnectTimer !== null) return;
    const wait = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, RECONNECT_MAX_MS);
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, wait);
  }

  private startStaleWatch(): void {
    this.stopStaleWatch();
    this.staleTimer = setInterval(() => {
      if (this.staleFlagged) return;
      if (this.clock() - this.lastStateAt > STALE_AFTER_MS) {
        this.staleFlagged = true;
        this.events.onStatus?.('stale');
      }
    }, 250);
  }

  private stopStaleWatch(): void {
    if (this.staleTimer !== null) clearInterval(this.staleTimer);
    this.staleTimer = null;
  }

  private handleMessage(text: string): void {
    let frame: ServerFrame;
    try {
      frame = JSON.parse(text) as ServerFrame;
    } catch {
      return;
    }
    switch (frame.kind) {
      case 'hello':
        this.hello = frame;
        this.events.onHello?.(frame);
        break;
      case 'state_update':
        this.lastStateAt = this.clock();
        if (this.staleFlagged) {
          this.staleFlagged = false;
          this.events.onStatus?.('open');
        }
        this.events.onState?.(frame);
        break;
      case 'diagnostics':
        this.events.onDiagnostics?.(frame);
        break;
      case 'error':
        this.events.onError?.(frame);
        break;
    }
  }

  private sendRaw(payload: string): void {
    if (this.ws && this.ws.readyState === 1) this.ws.send(payload);
  }

  private samplePayload(device: DeviceName, pose: Pose, buttons?: TrackerButtons): string {
    this.seq += 1;
    const frame: Record<string, unknown> = {
      kind: 'tracker_sample',
      seq: this.seq,
      device,
      stamp: this.clock() / 1000,
      position: pose.position,
      orientation: pose.orientation,
    };
    if (buttons) frame.buttons = buttons;
    return JSON.stringify(frame);
  }

  /** Gizmo path: rate-capped per device, newest pose wins. */
  sendSample(device: DeviceName, pose: Pose, buttons?: TrackerButtons): void {
    this.throttles.get(device)!.offer(this.samplePayload(device, pose, buttons));
  }

  /** Unthrottled path for calibration bursts and scripted tests. */
  sendSampleNow(device: DeviceName, pose: Pose, buttons?: TrackerButtons): void {
    this.sendRaw(this.samplePayload(device, pose, buttons));
  }

  command(name: CommandName, target?: string): void {
    this.seq += 1;
    const frame: Record<string, unknown> = { kind: 'command', seq: this.seq, name };
    if (target !== undefined) frame.target = target;
    this.sendRaw(JSON.stringify(frame));
  }
}

export function identityPose(position: [number, number, number] = [0, 0, 0]): Pose {
  return { position, orientation: [0, 0, 0, 1] };
}
