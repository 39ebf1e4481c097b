// Browser entrypoint: wires the scene graph, gizmos, HUD, and the WebSocket
// session together. The robot on screen always shows the latest received
// state_update; there is no client-side prediction.

import * as THREE from 'three';
import { OrbitControls } from 'three/examples/jsm/controls/OrbitControls.js';
import { RobotSceneGraph, clearanceLevel, type ModelDoc } from './robot.js';
import { TrackerGizmo, GizmoDragger } from './gizmos.js';
import { Hud } from './hud.js';
import { UiSession, DEVICES, type DeviceName, type StateUpdateFrame } from './wire.js';

const FRAME_FOR_DEVICE: Record<DeviceName, string> = {
  headset: 'head',
  left_controller: 'l_hand',
  right_controller: 'r_hand',
  waist: 'torso',
};

const GIZMO_COLORS: Record<DeviceName, number> = {
  headset: 0xf2d43d,
  left_controller: 0x4da6f2,
  right_controller: 0xf24d88,
  waist: 0x5fce7a,
};

function wsUrl(): string {
  const param = new URLSearchParams(window.location.search).get('ws');
  if (param) return param;
  const proto = window.location.protocol === 'https:' ? 'wss' : 'ws';
  return `${proto}://${window.location.host}/ws`;
}

async function boot(): Promise<void> {
  const sceneHost = document.getElementById('scene')!;
  const panelHost = document.getElementById('panel')!;

  const modelResp = await fetch('/model');
  if (!modelResp.ok) throw new Error(`GET /model failed: ${modelResp.status}`);
  const doc = (await modelResp.json()) as ModelDoc;

  const renderer = new THREE.WebGLRenderer({ antialias: true });
  renderer.setPixelRatio(window.devicePixelRatio);
  sceneHost.appendChild(renderer.domElement);

  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x14171c);
  scene.add(new THREE.HemisphereLight(0xdfe8f0, 0x20242a, 1.1));
  const key = new THREE.DirectionalLight(0xffffff, 1.4);
  key.position.set(2, 1.5, 3);
  scene.add(key);
  const grid = new THREE.GridHelper(3, 30, 0x3a4250, 0x262c36);
  grid.rotation.x = Math.PI / 2; // model z is up
  scene.add(grid);

  const robot = new RobotSceneGraph(doc);
  scene.add(robot.root);

  const camera = new THREE.PerspectiveCamera(50, 1, 0.01, 50);
  camera.up.set(0, 0, 1);
  camera.position.set(1.6, -1.4, 1.3);
  const orbit = new OrbitControls(camera, renderer.domElement);
  orbit.target.set(0, 0, 0.9);
  let headCam = false;

  const gizmos = DEVICES.map((d) => new TrackerGizmo(d, GIZMO_COLORS[d]));
  for (const g of gizmos) scene.add(g.group);
  const dragger = new GizmoDragger(renderer.domElement, camera, gizmos);

  let latest: StateUpdateFrame | null = null;

  const placeGizmosAtFrames = (send: boolean) => {
    if (!latest) return;
    for (const g of gizmos) {
      const f = latest.frames[FRAME_FOR_DEVICE[g.device]];
      if (!f) continue;
      g.group.position.set(f.position[0], f.position[1], f.position[2]);
      g.group.quaternion.set(f.orientation[0], f.orientation[1], f.orientation[2], f.orientation[3]);
      if (send) session.sendSampleNow(g.device, g.pose());
    }
  };

  const hud = new Hud(panelHost, {
    onCommand: (name, target) => session.command(name, target),
    onToggleHeadCam: (on) => {
      headCam = on;
      orbit.enabled = !on;
    },
    onResetGizmos: () => placeGizmosAtFrames(true),
  });

  let calibrated = false;
  const session = new UiSession(wsUrl(), {
    onHello: (h) => {
      document.title = `${h.model} console`;
      calibrated = false;
      session.command('diagnostics');
    },
    onState: (u) => {
      latest = u;
      robot.applyState(u);
      hud.applyState(u, clearanceLevel(u, robot.barrierDelta));
      if (!calibrated) {
        calibrated = true;
        placeGizmosAtFrames(true);
      }
    },
    onDiagnostics: (d) => {
      const solver = (d as Record<string, unknown>).solver as { delta?: number } | undefined;
      if (solver && typeof solver.delta === 'number') robot.barrierDelta = solver.delta;
      hud.applyDiagnostics(d);
    },
    onError: (e) => hud.showError(e.message),
    onStatus: (s) => hud.setStatus(s),
  });

  for (const g of gizmos) {
    g.onMove = (device, pose) => session.sendSample(device, pose);
  }

  const resize = () => {
    const w = sceneHost.clientWidth;
    const h = sceneHost.clientHeight;
    renderer.setSize(w, h);
    camera.aspect = w / Math.max(1, h);
    camera.updateProjectionMatrix();
  };
  window.addEventListener('resize', resize);
  resize();

  const headPos = new THREE.Vector3();
  const headQuat = new THREE.Quaternion();
  const animate = () => {
    requestAnimationFrame(animate);
    if (headCam) {
      const pose = robot.worldPoseOf('head');
      headPos.lerp(pose.position, 0.35);
      headQuat.slerp(pose.quaternion, 0.35);
      camera.position.copy(headPos);
      camera.quaternion.copy(headQuat);
    } else if (!dragger.dragging) {
      orbit.update();
    }
    renderer.render(scene, camera);
  };
  session.connect();
  animate();
}

boot().catch((err) => {
  const panel = document.getElementById('panel');
  if (panel) panel.textContent = String(err);
  console.error(err);
});
