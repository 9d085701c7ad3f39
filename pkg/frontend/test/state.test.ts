// Replay acceptance: feed the recorded 3-UAV bridge stream through the
// reducer and assert the rendered invariants.

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';

import { FleetState, replay } from '../src/state';
import { BridgeOp, RosterOp, ServiceAckOp, TopicOp } from '../src/types';

const here = dirname(fileURLToPath(import.meta.url));

function loadRecording(): Array<{ t_ms: number; msg: BridgeOp }> {
  const text = readFileSync(join(here, 'fixtures', 'three_uav_run.jsonl'), 'utf-8');
  return text
    .trim()
    .split('\n')
    .map((line) => JSON.parse(line));
}

describe('recorded 3-UAV run replay', () => {
  const rows = loadRecording();

  it('renders a roster of exactly three UAVs', () => {
    const state = replay(rows);
    expect(state.roster().map((v) => v.uav)).toEqual(['uav:1', 'uav:2', 'uav:3']);
  });

  it('displayed seq is strictly non-decreasing for every (uav, topic)', () => {
    const state = new FleetState();
    const seen = new Map<string, number>();
    for (const row of rows) {
      state.apply(row.msg);
      if (row.msg.op !== 'topic') continue;
      const key = `${row.msg.uav}|${row.msg.topic}`;
      const displayed = state.uavs.get(row.msg.uav)!.seqByTopic.get(row.msg.topic)!;
      const before = seen.get(key) ?? -1;
      expect(displayed).toBeGreaterThanOrEqual(before);
      seen.set(key, displayed);
    }
    expect(seen.size).toBeGreaterThan(0);
  });

  it('shows exactly one SUCCESS toast per scripted command', () => {
    const state = replay(rows);
    const scripted = rows.filter((r) => r.msg.op === 'service_ack') as Array<{
      msg: ServiceAckOp;
    }>;
    expect(scripted.length).toBe(2);
    expect(state.toasts.length).toBe(2);
    expect(state.toasts.every((t) => t.status === 'SUCCESS')).toBe(true);
    const keys = state.toasts.map((t) => `${t.uav}|${t.service}`);
    expect(new Set(keys).size).toBe(2);
  });

  it('disables command buttons for OFFLINE UAVs', () => {
    const state = replay(rows);
    const offline = state.roster().filter((v) => !v.online);
    expect(offline.map((v) => v.uav)).toEqual(['uav:3']);
    for (const view of offline) {
      for (const service of ['ARM_THROTTLE', 'SET_MODE', 'TAKEOFF', 'LAND']) {
        expect(state.canCommand(view.uav, service)).toBe(false);
      }
    }
    // online UAVs stay commandable
    expect(state.canCommand('uav:1', 'TAKEOFF')).toBe(true);
  });

  it('telemetry reaches the detail pane (battery, position)', () => {
    const state = replay(rows);
    const u1 = state.uavs.get('uav:1')!;
    expect(u1.batteryV).toBeDefined();
    expect(u1.position).toBeDefined();
    expect(u1.armed).toBe(true); // scripted ARM ack flips the badge
    expect(state.uavs.get('uav:2')!.armed).toBe(false);
  });
});

describe('local pending set', () => {
  it('enforces one in-flight request per (uav, service)', () => {
    const state = new FleetState();
    state.apply({
      op: 'roster',
      uavs: [{ uav: 'uav:1', online: true, last_seen_ms: 0 }],
    } as RosterOp);
    expect(state.issue('uav:1', 'ARM_THROTTLE', 't1')).toBe(true);
    // double-click while pending: second gesture ignored
    expect(state.issue('uav:1', 'ARM_THROTTLE', 't2')).toBe(false);
    state.apply({
      op: 'service_ack',
      request_id: 1,
      tag: 't1',
      uav: 'uav:1',
      service: 'ARM_THROTTLE',
      status: 'SUCCESS',
      detail: '',
      rtt_ms: 12,
    } as ServiceAckOp);
    expect(state.uavs.get('uav:1')!.armed).toBe(true);
    expect(state.issue('uav:1', 'ARM_THROTTLE', 't3')).toBe(true);
  });

  it('ignores commands to OFFLINE targets without any network call', () => {
    const state = new FleetState();
    state.apply({
      op: 'roster',
      uavs: [{ uav: 'uav:9', online: false, last_seen_ms: 0 }],
    } as RosterOp);
    expect(state.issue('uav:9', 'LAND', 't')).toBe(false);
    expect(state.pending.size).toBe(0);
  });

  it('stale topic ops never roll seq backwards', () => {
    const state = new FleetState();
    const mk = (seq: number): TopicOp => ({
      op: 'topic',
      uav: 'uav:1',
      topic: 'telemetry/pose',
      seq,
      payload: { k: 5, text: 'x' },
      sent_at: seq,
    });
    state.apply(mk(5));
    state.apply(mk(3));
    expect(state.uavs.get('uav:1')!.seqByTopic.get('telemetry/pose')).toBe(5);
    expect(state.staleDrops).toBe(1);
    state.apply(mk(8));
    expect(state.seqWarnings.length).toBe(1); // gap 6..7 warned, not fatal
  });
});
