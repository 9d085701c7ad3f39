// Fleet view state as a pure function of the bridge op stream plus the
// local pending-command set. Replayable: feeding a recorded stream yields
// the exact final state the live session would have shown.

import {
  BridgeOp,
  DiagnosticPayload,
  RosterRow,
  ServiceAckOp,
  TelemetryPayload,
  TopicOp,
  isDiagnostic,
  isTelemetry,
} from './types';

export interface UavView {
  uav: string;
  online: boolean;
  lastSeenMs: number;
  position?: [number, number, number];
  batteryV?: number;
  lastTelemetryAt?: number;
  armed: boolean;
  mode: string;
  seqByTopic: Map<string, number>;
}

export interface Toast {
  uav: string;
  service: string;
  status: ServiceAckOp['status'];
  detail: string;
  rttMs: number;
}

export interface PendingCommand {
  tag: string;
  uav: string;
  service: string;
  args: string | null;
}

export interface SeqWarning {
  uav: string;
  topic: string;
  expected: number;
  got: number;
}

export class FleetState {
  uavs = new Map<string, UavView>();
  toasts: Toast[] = [];
  pending = new Map<string, PendingCommand>(); // key: `${uav}|${service}`
  seqWarnings: SeqWarning[] = [];
  connected = false;
  staleDrops = 0;

  private ensure(uav: string): UavView {
    let view = this.uavs.get(uav);
    if (!view) {
      view = {
        uav,
        online: false,
        lastSeenMs: 0,
        armed: false,
        mode: 'STABILIZE',
        seqByTopic: new Map(),
      };
      this.uavs.set(uav, view);
    }
    return view;
  }

  roster(): UavView[] {
    return [...this.uavs.values()].sort((a, b) => a.uav.localeCompare(b.uav));
  }

  /** Commands require an ONLINE target and no in-flight request for the
   * same (uav, service). */
  canCommand(uav: string, service: string): boolean {
    const view = this.uavs.get(uav);
    if (!view || !view.online) return false;
    return !this.pending.has(`${uav}|${service}`);
  }

  /** Register a locally issued command; returns false (and ignores the
   * gesture) when the single-in-flight rule blocks it. */
  issue(uav: string, service: string, tag: string, args: string | null = null): boolean {
    if (!this.canCommand(uav, service)) return false;
    this.pending.set(`${uav}|${service}`, { tag, uav, service, args });
    return true;
  }

  apply(op: BridgeOp): void {
    switch (op.op) {
      case 'roster':
        this.applyRoster(op.uavs);
        return;
      case 'topic':
        this.applyTopic(op);
        return;
      case 'publish_snapshot':
        for (const msg of op.messages) this.applyTopic(msg);
        return;
      case 'service_ack':
        this.applyAck(op);
        return;
    }
  }

  private applyRoster(rows: RosterRow[]): void {
    for (const row of rows) {
      const view = this.ensure(row.uav);
      view.online = row.online;
      view.lastSeenMs = row.last_seen_ms;
    }
  }

  private applyTopic(op: TopicOp): void {
    const view = this.ensure(op.uav);
    const last = view.seqByTopic.get(op.topic);
    if (last !== undefined && op.seq <= last) {
      this.staleDrops += 1; // displayed seq never decreases
      return;
    }
    if (last !== undefined && op.seq !== last + 1) {
      this.seqWarnings.push({ uav: op.uav, topic: op.topic, expected: last + 1, got: op.seq });
    }
    view.seqByTopic.set(op.topic, op.seq);
    const payload = op.payload;
    if (isTelemetry(payload)) {
      const t = payload as TelemetryPayload;
      view.position = t.position;
      view.batteryV = t.battery_voltage;
      view.lastTelemetryAt = op.sent_at;
    } else if (isDiagnostic(payload)) {
      const d = payload as DiagnosticPayload;
      const match = /voltage=([0-9.]+)/.exec(d.text);
      if (match) view.batteryV = parseFloat(match[1]);
    }
  }

  private applyAck(op: ServiceAckOp): void {
    const key = `${op.uav}|${op.service}`;
    const pending = this.pending.get(key);
    this.pending.delete(key);
    this.toasts.push({
      uav: op.uav,
      service: op.service,
      status: op.status,
      detail: op.detail,
      rttMs: op.rtt_ms,
    });
    if (op.status === 'SUCCESS') {
      const view = this.ensure(op.uav);
      if (op.service === 'ARM_THROTTLE') view.armed = true;
      if (op.service === 'SET_MODE' && pending?.args) view.mode = pending.args;
      if (op.service === 'LAND') view.mode = 'LAND';
    }
  }
}

/** Replay a recorded stream (array of {t_ms, msg} rows) into fresh state. */
export function replay(rows: Array<{ t_ms: number; msg: BridgeOp }>): FleetState {
  const state = new FleetState();
  for (const row of rows) state.apply(row.msg);
  return state;
}
