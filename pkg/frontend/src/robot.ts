// Robot scene graph built from the service's model document. Joint values
// come exclusively from received state_update frames; nothing here predicts
// or integrates on its own.

import * as THREE from 'three';
import type { StateUpdateFrame } from './wire.js';

export interface JointDoc {
  name: string;
  kind: 'revolute' | 'prismatic';
  parent: string;
  child: string;
  axis: number[];
  origin: { position: number[]; orientation: number[] };
  position_limits: [number, number];
  velocity_limit: number;
}

export interface BodyDoc {
  name: string;
  link: string;
  kind: 'sphere' | 'capsule';
  center?: number[];
  a?: number[];
  b?: number[];
  radius: number;
}

export interface PairDoc {
  a: string;
  b: string;
  margin: number;
}

export interface ModelDoc {
  name: string;
  links: string[];
  joints: JointDoc[];
  frames: Record<string, { link: string; origin: { position: number[]; orientation: number[] } }>;
  groups: Record<string, number[]>;
  home: Record<string, number>;
  collision_bodies: BodyDoc[];
  collision_pairs: PairDoc[];
}

export type ClearanceLevel = 'ok' | 'near' | 'critical';

const BODY_COLOR = 0x6c8ea4;
const NEAR_COLOR = 0xd9a441;
const CRITICAL_COLOR = 0xc94f4f;

function vec(v: number[]): THREE.Vector3 {
  return new THREE.Vector3(v[0], v[1], v[2]);
}

function quat(q: number[]): THREE.Quaternion {
  return new THREE.Quaternion(q[0], q[1], q[2], q[3]);
}

/**
 * Kinematic tree as three.js nodes. Each joint contributes a fixed origin
 * node plus a motion node; the child link frame is the motion node, so
 * setting joint angles and calling updateMatrixWorld reproduces the
 * service's forward kinematics.
 */
export class RobotSceneGraph {
  readonly root = new THREE.Group();
  readonly jointNodes: THREE.Object3D[] = [];
  readonly linkNodes = new Map<string, THREE.Object3D>();
  readonly frameNodes = new Map<string, THREE.Object3D>();
  readonly bodyMeshes = new Map<string, THREE.Mesh>();
  private readonly jointAxes: THREE.Vector3[] = [];
  private readonly jointKinds: ('revolute' | 'prismatic')[] = [];
  lastUpdate: StateUpdateFrame | null = null;

  constructor(readonly doc: ModelDoc, public barrierDelta = 1e-4) {
    this.root.name = 'robot';
    const base = new THREE.Group();
    base.name = 'link/' + this.doc.links[0];
    this.root.add(base);
    this.linkNodes.set(this.doc.links[0], base);

    for (const j of doc.joints) {
      const parent = this.linkNodes.get(j.parent);
      if (!parent) throw new Error(`joint ${j.name}: unknown parent link ${j.parent}`);
      const origin = new THREE.Object3D();
      origin.name = 'origin/' + j.name;
      origin.position.copy(vec(j.origin.position));
      origin.quaternion.copy(quat(j.origin.orientation));
      parent.add(origin);

      const motion = new THREE.Object3D();
      motion.name = 'joint/' + j.name;
      motion.userData.joint = j.name;
      origin.add(motion);

      this.jointNodes.push(motion);
      this.jointAxes.push(vec(j.axis).normalize());
      this.jointKinds.push(j.kind);
      this.linkNodes.set(j.child, motion);
    }

    for (const [name, f] of Object.entries(doc.frames)) {
      const link = this.linkNodes.get(f.link);
      if (!link) throw new Error(`frame ${name}: unknown link ${f.link}`);
      const node = new THREE.Object3D();
      node.name = 'frame/' + name;
      node.position.copy(vec(f.origin.position));
      node.quaternion.copy(quat(f.origin.orientation));
      link.add(node);
      this.frameNodes.set(name, node);
    }

    for (const b of doc.collision_bodies) this.addBody(b);
  }

  private addBody(b: BodyDoc): void {
    const link = this.linkNodes.get(b.link);
    if (!link) throw new Error(`body ${b.name}: unknown link ${b.link}`);
    const material = new THREE.MeshStandardMaterial({
      color: BODY_COLOR,
      transparent: true,
      opacity: 0.85,
    });
    let mesh: THREE.Mesh;
    if (b.kind === 'sphere') {
      mesh = new THREE.Mesh(new THREE.SphereGeometry(b.radius, 24, 16), material);
      mesh.position.copy(vec(b.center ?? [0, 0, 0]));
    } else {
      const a = vec(b.a!);
      const e = vec(b.b!);
      const seg = e.clone().sub(a);
      const len = seg.length();
      // CapsuleGeometry's axis is local +Y with the given cylinder length.
      mesh = new THREE.Mesh(new THREE.CapsuleGeometry(b.radius, len, 8, 16), material);
      mesh.position.copy(a.clone().add(e).multiplyScalar(0.5));
      if (len > 0) {
        mesh.quaternion.setFromUnitVectors(new THREE.Vector3(0, 1, 0), seg.normalize());
      }
    }
    mesh.name = 'body/' + b.name;
    mesh.userData.body = b.name;
    mesh.userData.highlight = 'ok';
    link.add(mesh);
    this.bodyMeshes.set(b.name, mesh);
  }

  get jointCount(): number {
    return this.jointNodes.length;
  }

  setJointPositions(q: number[]): void {
    if (q.length !== this.jointNodes.length) {
      throw new Error(`expected ${this.jointNodes.length} joint values, got ${q.length}`);
    }
    for (let i = 0; i < q.length; i++) {
      const node = this.jointNodes[i];
      if (this.jointKinds[i] === 'revolute') {
        node.quaternion.setFromAxisAngle(this.jointAxes[i], q[i]);
      } else {
        node.position.copy(this.jointAxes[i]).multiplyScalar(q[i]);
      }
    }
  }

  /** Apply a received state verbatim and refresh highlight flags. */
  applyState(update: StateUpdateFrame): void {
    this.setJointPositions(update.q);
    this.root.updateMatrixWorld(true);
    this.lastUpdate = update;
    this.refreshHighlights(update);
  }

  private refreshHighlights(update: StateUpdateFrame): void {
    const flagged = new Map<string, ClearanceLevel>();
    for (const name of this.bodyMeshes.keys()) flagged.set(name, 'ok');
    update.pair_h.forEach((h, i) => {
      const pair = this.doc.collision_pairs[i];
      if (!pair) return;
      const level = pairLevel(h, this.barrierDelta);
      if (level === 'ok') return;
      for (const name of [pair.a, pair.b]) {
        const prev = flagged.get(name);
        if (prev !== 'critical') flagged.set(name, level === 'critical' ? 'critical' : 'near');
      }
    });
    for (const [name, level] of flagged) {
      const mesh = this.bodyMeshes.get(name)!;
      mesh.userData.highlight = level;
      const mat = mesh.material as THREE.MeshStandardMaterial;
      mat.color.setHex(level === 'critical' ? CRITICAL_COLOR : level === 'near' ? NEAR_COLOR : BODY_COLOR);
    }
  }

  worldPoseOf(frame: string): { position: THREE.Vector3; quaternion: THREE.Quaternion } {
    const node = this.frameNodes.get(frame);
    if (!node) throw new Error(`unknown frame ${frame}`);
    const position = new THREE.Vector3();
    const quaternion = new THREE.Quaternion();
    const scale = new THREE.Vector3();
    node.matrixWorld.decompose(position, quaternion, scale);
    return { position, quaternion };
  }

  worldBodyEndpoints(body: string): { p0: THREE.Vector3; p1: THREE.Vector3; radius: number } {
    const mesh = this.bodyMeshes.get(body);
    const doc = this.doc.collision_bodies.find((b) => b.name === body);
    if (!mesh || !doc) throw new Error(`unknown body ${body}`);
    if (doc.kind === 'sphere') {
      const c = mesh.getWorldPosition(new THREE.Vector3());
      return { p0: c.clone(), p1: c.clone(), radius: doc.radius };
    }
    const a = vec(doc.a!);
    const e = vec(doc.b!);
    const len = a.distanceTo(e);
    const p0 = new THREE.Vector3(0, -len / 2, 0).applyMatrix4(mesh.matrixWorld);
    const p1 = new THREE.Vector3(0, len / 2, 0).applyMatrix4(mesh.matrixWorld);
    return { p0, p1, radius: doc.radius };
  }
}

export function pairLevel(h: number, delta: number): ClearanceLevel {
  if (h < delta) return 'critical';
  if (h < 2 * delta) return 'near';
  return 'ok';
}

export function clearanceLevel(update: StateUpdateFrame, delta: number): ClearanceLevel {
  return pairLevel(update.min_h, delta);
}
