// DOM + canvas rendering. The map pane draws local ENU positions on a
// plain canvas (offline-friendly, no tile service). Telemetry repaints are
// throttled to at most 10 per second per UAV regardless of topic rate.

import { FleetState, UavView } from './state';
import { MODES, SERVICES } from './types';

const ORIGIN_LAT = 26.5123;
const ORIGIN_LON = 80.2329;
const M_PER_DEG_LAT = 111320;
const RENDER_MIN_INTERVAL_MS = 100;

export class Renderer {
  private lastPaint = new Map<string, number>();
  private dirty = true;
  private selected: string | null = null;

  constructor(
    private root: HTMLElement,
    private issue: (uav: string, service: string, args: string | null) => void,
  ) {
    root.innerHTML = `
      <div id="banner" class="banner hidden">bridge disconnected, retrying…</div>
      <div class="layout">
        <div class="pane"><h2>Fleet</h2><table id="roster"><tbody></tbody></table></div>
        <div class="pane"><h2>Map</h2><canvas id="map" width="420" height="420"></canvas></div>
        <div class="pane"><h2>Commands</h2><div id="commands"></div><div id="toasts"></div></div>
      </div>`;
    requestAnimationFrame(() => this.frame());
  }

  private state: FleetState | null = null;

  update(state: FleetState, connected: boolean): void {
    this.state = state;
    this.dirty = true;
    const banner = this.root.querySelector('#banner') as HTMLElement;
    banner.classList.toggle('hidden', connected);
  }

  private frame(): void {
    if (this.dirty && this.state) {
      this.paint(this.state);
      this.dirty = false;
    }
    requestAnimationFrame(() => this.frame());
  }

  private paint(state: FleetState): void {
    const now = performance.now();
    const body = this.root.querySelector('#roster tbody') as HTMLElement;
    const rows: string[] = [];
    for (const view of state.roster()) {
      const last = this.lastPaint.get(view.uav) ?? 0;
      if (now - last < RENDER_MIN_INTERVAL_MS && body.children.length > 0) continue;
      this.lastPaint.set(view.uav, now);
      rows.push(this.rosterRow(view));
    }
    if (rows.length) {
      body.innerHTML = state.roster().map((v) => this.rosterRow(v)).join('');
      for (const el of body.querySelectorAll('tr[data-uav]')) {
        el.addEventListener('click', () => {
          this.selected = (el as HTMLElement).dataset.uav ?? null;
          this.dirty = true;
        });
      }
    }
    this.paintCommands(state);
    this.paintToasts(state);
    this.paintMap(state);
  }

  private rosterRow(view: UavView): string {
    const cls = view.online ? 'online' : 'offline';
    const battery = view.batteryV !== undefined ? `${view.batteryV.toFixed(2)} V` : '—';
    const badge = view.armed ? '<span class="badge armed">ARMED</span>' : '<span class="badge">disarmed</span>';
    return `<tr data-uav="${view.uav}" class="${cls} ${this.selected === view.uav ? 'selected' : ''}">
      <td>${view.uav}</td><td>${view.online ? 'ONLINE' : 'OFFLINE'}</td>
      <td>${battery}</td><td>${view.mode}</td><td>${badge}</td></tr>`;
  }

  private paintCommands(state: FleetState): void {
    const pane = this.root.querySelector('#commands') as HTMLElement;
    const target = this.selected ?? state.roster()[0]?.uav;
    if (!target) {
      pane.innerHTML = '<em>no UAVs yet</em>';
      return;
    }
    const mode = (pane.querySelector('#mode-select') as HTMLSelectElement | null)?.value ?? 'GUIDED';
    pane.innerHTML = `
      <div>target: <b>${target}</b></div>
      <select id="mode-select">${MODES.map((m) => `<option ${m === mode ? 'selected' : ''}>${m}</option>`).join('')}</select>
      <div class="buttons">${SERVICES.map((s) => {
        const enabled = state.canCommand(target, s);
        const pendingMark = state.pending.has(`${target}|${s}`) ? ' …' : '';
        return `<button data-service="${s}" ${enabled ? '' : 'disabled'}>${s}${pendingMark}</button>`;
      }).join('')}</div>`;
    for (const el of pane.querySelectorAll('button[data-service]')) {
      el.addEventListener('click', () => {
        const service = (el as HTMLElement).dataset.service!;
        const args = service === 'SET_MODE'
          ? (pane.querySelector('#mode-select') as HTMLSelectElement).value
          : null;
        this.issue(target, service, args);
      });
    }
  }

  private paintToasts(state: FleetState): void {
    const pane = this.root.querySelector('#toasts') as HTMLElement;
    pane.innerHTML = state.toasts
      .slice(-6)
      .map(
        (t) =>
          `<div class="toast ${t.status.toLowerCase()}">${t.uav} ${t.service}: ${t.status}` +
          `${t.detail ? ` (${t.detail})` : ''} — ${t.rttMs.toFixed(0)} ms</div>`,
      )
      .join('');
  }

  private paintMap(state: FleetState): void {
    const canvas = this.root.querySelector('#map') as HTMLCanvasElement;
    const ctx = canvas.getContext('2d');
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = '#2a4';
    ctx.strokeRect(0.5, 0.5, canvas.width - 1, canvas.height - 1);
    const scale = 0.5; // px per meter, 420 px ~ 840 m
    for (const view of state.roster()) {
      if (!view.position) continue;
      const [lat, lon] = view.position;
      const north = (lat - ORIGIN_LAT) * M_PER_DEG_LAT;
      const east = (lon - ORIGIN_LON) * M_PER_DEG_LAT * Math.cos((ORIGIN_LAT * Math.PI) / 180);
      const x = canvas.width / 2 + east * scale;
      const y = canvas.height / 2 - north * scale;
      ctx.fillStyle = view.online ? '#2a4' : '#999';
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, Math.PI * 2);
      ctx.fill();
      ctx.fillStyle = '#ddd';
      ctx.fillText(view.uav, x + 8, y + 3);
    }
  }
}
