// Side panel DOM: connection status, clearance readout, channel states, and
// the command buttons. Pure DOM manipulation, no scene access.

import type { ClearanceLevel } from './robot.js';
import type { CommandName, DiagnosticsFrame, SessionStatus, StateUpdateFrame } from './wire.js';

export interface HudHooks {
  onCommand: (name: CommandName, target?: string) => void;
  onToggleHeadCam: (enabled: boolean) => void;
  onResetGizmos: () => void;
}

export class Hud {
  private statusEl: HTMLElement;
  private clearanceEl: HTMLElement;
  private tickEl: HTMLElement;
  private channelsEl: HTMLElement;
  private lockEl: HTMLElement;
  private graspEl: HTMLElement;
  private errorEl: HTMLElement;
  private headCamOn = false;

  constructor(root: HTMLElement, private readonly hooks: HudHooks) {
    root.innerHTML = `
      <h1>Operator Console</h1>
      <div class="row"><span class="label">link</span><span id="hud-status" class="status">connecting</span></div>
      <div class="row"><span class="label">tick</span><span id="hud-tick">-</span></div>
      <div class="row"><span class="label">clearance</span><span id="hud-clearance">-</span></div>
      <div class="row"><span class="label">lock</span><span id="hud-lock">off</span></div>
      <div class="row"><span class="label">grasp</span><span id="hud-grasp">-</span></div>
      <div id="hud-channels" class="channels"></div>
      <div id="hud-error" class="error"></div>
      <div class="buttons">
        <button id="btn-clutch-on">Clutch engage</button>
        <button id="btn-clutch-off">Clutch release</button>
        <button id="btn-lock">Lock</button>
        <button id="btn-unlock">Unlock</button>
        <button id="btn-grasp-l">Grasp left</button>
        <button id="btn-grasp-r">Grasp right</button>
        <button id="btn-reset">Reset session</button>
        <button id="btn-headcam">Head cam: off</button>
        <button id="btn-gizmos">Recenter gizmos</button>
      </div>
      <p class="hint">Drag a sphere to move its tracker. Shift-drag rotates.</p>
    `;
    const el = (id: string) => root.querySelector('#' + id) as HTMLElement;
    this.statusEl = el('hud-status');
    this.clearanceEl = el('hud-clearance');
    this.tickEl = el('hud-tick');
    this.channelsEl = el('hud-channels');
    this.lockEl = el('hud-lock');
    this.graspEl = el('hud-grasp');
    this.errorEl = el('hud-error');

    const cmd = (id: string, name: CommandName, target?: string) =>
      el(id).addEventListener('click', () => hooks.onCommand(name, target));
    cmd('btn-clutch-on', 'clutch_engage');
    cmd('btn-clutch-off', 'clutch_release');
    cmd('btn-lock', 'lock_engage');
    cmd('btn-unlock', 'lock_release');
    cmd('btn-grasp-l', 'grasp_cycle', 'left');
    cmd('btn-grasp-r', 'grasp_cycle', 'right');
    cmd('btn-reset', 'reset');
    el('btn-gizmos').addEventListener('click', () => hooks.onResetGizmos());
    el('btn-headcam').addEventListener('click', () => {
      this.headCamOn = !this.headCamOn;
      el('btn-headcam').textContent = this.headCamOn ? 'Head cam: on' : 'Head cam: off';
      hooks.onToggleHeadCam(this.headCamOn);
    });
  }

  setStatus(s: SessionStatus): void {
    this.statusEl.textContent = s;
    this.statusEl.className = 'status status-' + s;
  }

  showError(message: string): void {
    this.errorEl.textContent = message;
    setTimeout(() => {
      if (this.errorEl.textContent === message) this.errorEl.textContent = '';
    }, 4000);
  }

  applyState(update: StateUpdateFrame, level: ClearanceLevel): void {
    this.tickEl.textContent = `${update.tick} (t=${update.t.toFixed(2)}s)`;
    this.clearanceEl.textContent = `${(update.min_h * 1000).toFixed(1)} mm`;
    this.clearanceEl.className = 'clearance-' + level;
    this.lockEl.textContent = update.locked ? 'ENGAGED' : 'off';
    this.graspEl.textContent = Object.entries(update.grasp)
      .map(([side, mode]) => `${side}: ${mode}`)
      .join('  ');
    this.channelsEl.innerHTML = Object.entries(update.channels)
      .map(([name, st]) => `<span class="chan chan-${st}">${name}: ${st}</span>`)
      .join('');
  }

  applyDiagnostics(d: DiagnosticsFrame): void {
    const overruns = (d as Record<string, unknown>).overruns;
    if (typeof overruns === 'number' && overruns > 0) {
      this.showError(`tick overruns: ${overruns}`);
    }
  }
}
