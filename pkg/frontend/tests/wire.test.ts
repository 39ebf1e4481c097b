// Client-side wire behavior with a mock socket and fake timers: outbound
// sample rate cap, reconnect backoff, and staleness flagging.

import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';
import { SampleThrottle, UiSession, identityPose, type SocketLike } from '../src/wire.js';

class MockSocket implements SocketLike {
  sent: string[] = [];
  readyState = 0;
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  deliver(frame: unknown): void {
    this.onmessage?.({ data: JSON.stringify(frame) });
  }

  drop(): void {
    this.readyState = 3;
    this.onclose?.();
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.drop();
  }
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe('SampleThrottle', () => {
  it('sends the first sample immediately and trails with the newest', () => {
    const sent: string[] = [];
    const th = new SampleThrottle(60, (p) => sent.push(p));
    th.offer('a');
    expect(sent).toEqual(['a']);
    th.offer('b');
    th.offer('c');
    expect(sent).toEqual(['a']);
    vi.advanceTimersByTime(20);
    expect(sent).toEqual(['a', 'c']);
  });

  it('caps a one-second flood at the configured rate', () => {
    const sent: string[] = [];
    const th = new SampleThrottle(60, (p) => sent.push(p));
    for (let k = 0; k < 1000; k++) {
      th.offer(`s${k}`);
      vi.advanceTimersByTime(1);
    }
    expect(sent.length).toBeLessThanOrEqual(61);
    expect(sent.length).toBeGreaterThan(40);
    vi.advanceTimersByTime(20);
    expect(sent[sent.length - 1]).toBe('s999');
  });
});

describe('UiSession', () => {
  function makeSession(hz = 60) {
    const sockets: MockSocket[] = [];
    const statuses: string[] = [];
    const session = new UiSession(
      'ws://test/ws',
      { onStatus: (s) => statuses.push(s) },
      () => {
        const s = new MockSocket();
        sockets.push(s);
        return s;
      },
      () => Date.now(),
      hz,
    );
    return { session, sockets, statuses };
  }

  it('caps the outbound tracker sample rate per device', () => {
    const { session, sockets } = makeSession(60);
    session.connect();
    sockets[0].open();
    for (let k = 0; k < 500; k++) {
      session.sendSample('left_controller', identityPose([k * 0.001, 0, 0]));
      vi.advanceTimersByTime(2);
    }
    vi.advanceTimersByTime(20);
    const samples = sockets[0].sent
      .map((s) => JSON.parse(s))
      .filter((f) => f.kind === 'tracker_sample');
    // 1 s of 500 Hz input must shrink to at most 60 Hz plus the trailing send
    expect(samples.length).toBeLessThanOrEqual(62);
    expect(samples.length).toBeGreaterThan(30);
    const last = samples[samples.length - 1];
    expect(last.position[0]).toBeCloseTo(0.499, 9);
    session.close();
  });

  it('does not throttle across devices or commands', () => {
    const { session, sockets } = makeSession(60);
    session.connect();
    sockets[0].open();
    session.sendSample('left_controller', identityPose());
    session.sendSample('right_controller', identityPose());
    session.sendSample('headset', identityPose());
    session.command('tick');
    session.command('tick');
    expect(sockets[0].sent.length).toBe(5);
    session.close();
  });

  it('reconnects with exponential backoff after a drop', () => {
    const { session, sockets, statuses } = makeSession();
    session.connect();
    expect(sockets.length).toBe(1);
    sockets[0].open();
    sockets[0].drop();
    expect(statuses).toEqual(['connecting', 'open', 'closed']);

    vi.advanceTimersByTime(249);
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(2);
    expect(sockets.length).toBe(2);

    sockets[1].drop(); // never opened; next wait doubles to 500 ms
    vi.advanceTimersByTime(499);
    expect(sockets.length).toBe(2);
    vi.advanceTimersByTime(2);
    expect(sockets.length).toBe(3);

    sockets[2].open();
    sockets[2].drop(); // successful open resets the backoff
    vi.advanceTimersByTime(251);
    expect(sockets.length).toBe(4);
    session.close();
  });

  it('flags the stream stale after a second without states', () => {
    const { session, sockets, statuses } = makeSession();
    session.connect();
    sockets[0].open();
    sockets[0].deliver({ kind: 'state_update', seq: 2, tick: 0, q: [], frames: {}, pair_h: [], min_h: 1 });
    vi.advanceTimersByTime(900);
    expect(statuses).not.toContain('stale');
    vi.advanceTimersByTime(400);
    expect(statuses).toContain('stale');
    // a fresh state clears the flag
    sockets[0].deliver({ kind: 'state_update', seq: 3, tick: 1, q: [], frames: {}, pair_h: [], min_h: 1 });
    expect(statuses[statuses.length - 1]).toBe('open');
    session.close();
  });

  it('dispatches frames by kind', () => {
    const received: string[] = [];
    const sockets: MockSocket[] = [];
    const session = new UiSession(
      'ws://test/ws',
      {
        onHello: () => received.push('hello'),
        onState: () => received.push('state'),
        onDiagnostics: () => received.push('diag'),
        onError: (e) => received.push('error:' + e.message),
      },
      () => {
        const s = new MockSocket();
        sockets.push(s);
        return s;
      },
    );
    session.connect();
    sockets[0].open();
    sockets[0].deliver({ kind: 'hello', seq: 1, proto_version: 1 });
    sockets[0].deliver({ kind: 'state_update', seq: 2, q: [], frames: {}, pair_h: [], min_h: 1 });
    sockets[0].deliver({ kind: 'diagnostics', seq: 3 });
    sockets[0].deliver({ kind: 'error', seq: 4, message: 'nope' });
    expect(received).toEqual(['hello', 'state', 'diag', 'error:nope']);
    expect(session.hello?.proto_version).toBe(1);
    session.close();
  });
});
