// Draggable tracker gizmos. Dragging translates on a camera-facing plane;
// holding Shift while dragging rotates instead. Every change is reported
// through onMove so the session can stream the pose.

import * as THREE from 'three';
import type { DeviceName, Pose } from './wire.js';

export class TrackerGizmo {
  readonly group = new THREE.Group();
  readonly handle: THREE.Mesh;
  private yaw = 0;
  private pitch = 0;

  constructor(
    readonly device: DeviceName,
    color: number,
    public onMove: (device: DeviceName, pose: Pose) => void = () => {},
  ) {
    this.group.name = 'gizmo/' + device;
    this.handle = new THREE.Mesh(
      new THREE.SphereGeometry(0.035, 16, 12),
      new THREE.MeshStandardMaterial({ color, roughness: 0.4 }),
    );
    this.handle.userData.gizmo = device;
    this.group.add(this.handle);
    this.group.add(new THREE.AxesHelper(0.09));
  }

  setPosition(p: THREE.Vector3): void {
    this.group.position.copy(p);
    this.emit();
  }

  rotateBy(dYaw: number, dPitch: number): void {
    this.yaw += dYaw;
    this.pitch = Math.max(-1.4, Math.min(1.4, this.pitch + dPitch));
    const e = new THREE.Euler(this.pitch, 0, this.yaw, 'ZYX');
    this.group.quaternion.setFromEuler(e);
    this.emit();
  }

  pose(): Pose {
    const p = this.group.position;
    const q = this.group.quaternion;
    return { position: [p.x, p.y, p.z], orientation: [q.x, q.y, q.z, q.w] };
  }

  emit(): void {
    this.onMove(this.device, this.pose());
  }
}

export class GizmoDragger {
  private raycaster = new THREE.Raycaster();
  private pointer = new THREE.Vector2();
  private active: TrackerGizmo | null = null;
  private rotating = false;
  private plane = new THREE.Plane();
  private grabOffset = new THREE.Vector3();
  private lastX = 0;
  private lastY = 0;
  /** true while a drag is in progress; orbit controls should pause then. */
  dragging = false;

  constructor(
    private readonly dom: HTMLElement,
    private readonly camera: THREE.Camera,
    private readonly gizmos: TrackerGizmo[],
  ) {
    dom.addEventListener('pointerdown', (e) => this.onDown(e));
    dom.addEventListener('pointermove', (e) => this.onMove(e));
    dom.addEventListener('pointerup', () => this.onUp());
    dom.addEventListener('pointerleave', () => this.onUp());
  }

  private updatePointer(e: PointerEvent): void {
    const r = this.dom.getBoundingClientRect();
    this.pointer.x = ((e.clientX - r.left) / r.width) * 2 - 1;
    this.pointer.y = -((e.clientY - r.top) / r.height) * 2 + 1;
  }

  private onDown(e: PointerEvent): void {
    this.updatePointer(e);
    this.raycaster.setFromCamera(this.pointer, this.camera);
    const handles = this.gizmos.map((g) => g.handle);
    const hits = this.raycaster.intersectObjects(handles, false);
    if (hits.length === 0) return;
    const device = hits[0].object.userData.gizmo as string;
    this.active = this.gizmos.find((g) => g.device === device) ?? null;
    if (!this.active) return;
    this.dragging = true;
    this.rotating = e.shiftKey;
    this.lastX = e.clientX;
    this.lastY = e.clientY;
    const normal = new THREE.Vector3();
    this.camera.getWorldDirection(normal);
    this.plane.setFromNormalAndCoplanarPoint(normal, this.active.group.position);
    this.grabOffset.copy(hits[0].point).sub(this.active.group.position);
    this.dom.setPointerCapture?.(e.pointerId);
  }

  private onMove(e: PointerEvent): void {
    if (!this.active) return;
    if (this.rotating) {
      const dx = e.clientX - this.lastX;
      const dy = e.clientY - this.lastY;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      this.active.rotateBy(-dx * 0.01, -dy * 0.01);
      return;
    }
    this.updatePointer(e);
    this.raycaster.setFromCamera(this.pointer, this.camera);
    const hit = new THREE.Vector3();
    if (this.raycaster.ray.intersectPlane(this.plane, hit)) {
      this.active.setPosition(hit.sub(this.grabOffset));
    }
  }

  private onUp(): void {
    this.active = null;
    this.dragging = false;
  }
}
