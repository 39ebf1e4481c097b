// End-to-end against the real backend: spawn the Python service in lockstep
// mode, connect through UiSession with a node WebSocket, and script the two
// operator flows the console must support: a left-hand gizmo drag and the
// hand-offset lock.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { spawn, type ChildProcess } from 'node:child_process';
import WebSocket from 'ws';
import * as THREE from 'three';
import {
  UiSession,
  identityPose,
  type HelloFrame,
  type Pose,
  type SocketLike,
  type StateUpdateFrame,
} from '../src/wire.js';

const PORT = 8741 + (process.pid % 211);
const BASE = `http://127.0.0.1:${PORT}`;

const SERVER_SCRIPT = `
import json
import uvicorn
from teleik.kinematics import bundled_model_path, load_model
from teleik.service import create_app

doc = json.load(open(bundled_model_path()))
model = load_model(bundled_model_path())
app = create_app(model, model_doc=doc, rate=0.0)
uvicorn.run(app, host="127.0.0.1", port=${PORT}, log_level="error")
`;

let server: ChildProcess;
let serverLog = '';
let modelDoc: { groups: Record<string, number[]>; joints: unknown[] };

class FrameQueue<T> {
  private items: T[] = [];
  private waiters: { resolve: (v: T) => void; timer: NodeJS.Timeout }[] = [];

  push(v: T): void {
    const w = this.waiters.shift();
    if (w) {
      clearTimeout(w.timer);
      w.resolve(v);
    } else {
      this.items.push(v);
    }
  }

  next(timeoutMs = 8000): Promise<T> {
    const item = this.items.shift();
    if (item !== undefined) return Promise.resolve(item);
    return new Promise<T>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error('timed out waiting for frame')), timeoutMs);
      this.waiters.push({ resolve, timer });
    });
  }
}

interface Client {
  session: UiSession;
  hellos: FrameQueue<HelloFrame>;
  states: FrameQueue<StateUpdateFrame>;
  errors: string[];
}

function openClient(): Promise<Client> {
  const hellos = new FrameQueue<HelloFrame>();
  const states = new FrameQueue<StateUpdateFrame>();
  const opened = new FrameQueue<string>();
  const errors: string[] = [];
  const session = new UiSession(
    `ws://127.0.0.1:${PORT}/ws`,
    {
      onHello: (h) => hellos.push(h),
      onState: (s) => states.push(s),
      onStatus: (st) => {
        if (st === 'open') opened.push(st);
      },
      onError: (e) => errors.push(e.message),
    },
    (url) => new WebSocket(url) as unknown as SocketLike,
  );
  session.connect();
  return opened.next().then(() => ({ session, hellos, states, errors }));
}

async function tick(c: Client): Promise<StateUpdateFrame> {
  c.session.command('tick');
  return c.states.next();
}

async function calibrate(c: Client): Promise<StateUpdateFrame> {
  for (const device of ['headset', 'left_controller', 'right_controller', 'waist'] as const) {
    c.session.sendSampleNow(device, identityPose());
  }
  return tick(c);
}

function framePose(s: StateUpdateFrame, name: string): { p: THREE.Vector3; q: THREE.Quaternion } {
  const f = s.frames[name];
  return {
    p: new THREE.Vector3(f.position[0], f.position[1], f.position[2]),
    q: new THREE.Quaternion(f.orientation[0], f.orientation[1], f.orientation[2], f.orientation[3]),
  };
}

function relativeHandPose(s: StateUpdateFrame): { t: THREE.Vector3; q: THREE.Quaternion } {
  const l = framePose(s, 'l_hand');
  const r = framePose(s, 'r_hand');
  const invL = l.q.clone().invert();
  return {
    t: r.p.clone().sub(l.p).applyQuaternion(invL),
    q: invL.clone().multiply(r.q),
  };
}

beforeAll(async () => {
  server = spawn('python3', ['-c', SERVER_SCRIPT], { stdio: ['ignore', 'pipe', 'pipe'] });
  server.stdout!.on('data', (d) => (serverLog += d));
  server.stderr!.on('data', (d) => (serverLog += d));
  const deadline = Date.now() + 25000;
  for (;;) {
    try {
      const resp = await fetch(`${BASE}/model`);
      if (resp.ok) {
        modelDoc = (await resp.json()) as typeof modelDoc;
        break;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service did not come up on ${BASE}\n${serverLog}`);
    }
    await new Promise((r) => setTimeout(r, 200));
  }
});

afterAll(() => {
  server?.kill('SIGTERM');
  setTimeout(() => server?.kill('SIGKILL'), 2000).unref();
});

describe('operator console round trip', () => {
  it('drag of the left gizmo moves the left hand and only left-arm joints', async () => {
    const c = await openClient();
    const hello = await c.hellos.next();
    expect(hello.proto_version).toBe(1);
    expect(hello.lockstep).toBe(true);
    expect(hello.n_joints).toBe(17);

    const s0 = await calibrate(c);
    expect(Object.values(s0.channels)).toContain('active');
    const q0 = s0.q;
    const l0 = framePose(s0, 'l_hand').p;

    // scripted drag: ramp the left tracker to +8 cm x, +2 cm z over 30 ticks
    const target: Pose = identityPose([0.08, 0, 0.02]);
    let s1 = s0;
    for (let k = 1; k <= 30; k++) {
      const a = k / 30;
      c.session.sendSampleNow('left_controller', identityPose([a * 0.08, 0, a * 0.02]));
      s1 = await tick(c);
    }

    const l1 = framePose(s1, 'l_hand').p;
    const goal = l0.clone().add(new THREE.Vector3(...target.position));
    const before = l0.distanceTo(goal);
    const after = l1.distanceTo(goal);
    expect(after).toBeLessThan(before - 0.02); // clearly moved toward the command
    expect(l1.x - l0.x).toBeGreaterThan(0.02);

    const lArm = new Set(modelDoc.groups.l_arm);
    for (let i = 0; i < q0.length; i++) {
      if (lArm.has(i)) continue;
      // unchanged at displayed precision (three decimals)
      expect(Math.abs(s1.q[i] - q0[i]), `joint ${i}`).toBeLessThan(1e-3);
    }
    const movedInArm = Math.max(...[...lArm].map((i) => Math.abs(s1.q[i] - q0[i])));
    expect(movedInArm).toBeGreaterThan(0.05);
    expect(c.errors).toEqual([]);
    c.session.close();
  });

  it('hand lock produces rigid co-motion of both hand frames', async () => {
    const c = await openClient();
    await c.hellos.next();
    await calibrate(c);

    c.session.command('lock_engage');
    const sLock = await tick(c);
    expect(sLock.locked).toBe(true);
    const rel0 = relativeHandPose(sLock);
    const r0 = framePose(sLock, 'r_hand').p;

    let s = sLock;
    for (let k = 1; k <= 20; k++) {
      const a = k / 20;
      c.session.sendSampleNow('left_controller', identityPose([a * 0.06, 0, a * 0.03]));
      s = await tick(c);
    }
    for (let k = 0; k < 15; k++) {
      c.session.sendSampleNow('left_controller', identityPose([0.06, 0, 0.03]));
      s = await tick(c);
    }

    expect(s.locked).toBe(true);
    const rel1 = relativeHandPose(s);
    const r1 = framePose(s, 'r_hand').p;
    expect(rel1.t.distanceTo(rel0.t)).toBeLessThan(2e-3); // relative offset held
    expect(rel0.q.angleTo(rel1.q)).toBeLessThan(2e-3); // relative rotation held
    expect(r1.distanceTo(r0)).toBeGreaterThan(0.02); // the right hand came along
    expect(c.errors).toEqual([]);
    c.session.close();
  });

  it('reset returns the session to awaiting calibration', async () => {
    const c = await openClient();
    await c.hellos.next();
    const s0 = await calibrate(c);
    expect(Object.values(s0.channels)).toContain('active');
    c.session.command('reset');
    const s1 = await tick(c);
    expect(Object.values(s1.channels)).toContain('awaiting');
    c.session.close();
  });
});
