// Bridge wire protocol types (mirror of the service-layer schema).

export interface RosterRow {
  uav: string;
  online: boolean;
  last_seen_ms: number;
}

export interface RosterOp {
  op: 'roster';
  uavs: RosterRow[];
}

export interface TopicOp {
  op: 'topic';
  uav: string;
  topic: string;
  seq: number;
  payload: TelemetryPayload | DiagnosticPayload | VideoPayload | Record<string, unknown>;
  sent_at: number;
}

export interface SnapshotOp {
  op: 'publish_snapshot';
  uav: string;
  topic: string;
  messages: TopicOp[];
}

export interface ServiceAckOp {
  op: 'service_ack';
  request_id: number;
  tag: string;
  uav: string;
  service: string;
  status: 'SUCCESS' | 'REJECTED' | 'TIMEOUT';
  detail: string;
  rtt_ms: number;
}

export type BridgeOp = RosterOp | TopicOp | SnapshotOp | ServiceAckOp;

export interface TelemetryPayload {
  k: number;
  position: [number, number, number];
  orientation: [number, number, number, number];
  battery_voltage: number;
  timestamp: number;
}

export interface DiagnosticPayload {
  k: number;
  text: string;
}

export interface VideoPayload {
  k: number;
  frame_no: number;
  width: number;
  height: number;
  payload: string;
}

export interface CallServiceOp {
  op: 'call_service';
  uav: string;
  service: string;
  args: string | null;
  tag: string;
}

export interface SubscribeOp {
  op: 'subscribe' | 'unsubscribe';
  uav: string;
  topic: string;
}

export const SERVICES = ['ARM_THROTTLE', 'SET_MODE', 'TAKEOFF', 'LAND'] as const;
export const MODES = ['STABILIZE', 'GUIDED', 'AUTO', 'LAND'] as const;

export function isTelemetry(p: TopicOp['payload']): p is TelemetryPayload {
  return (p as TelemetryPayload).position !== undefined;
}

export function isDiagnostic(p: TopicOp['payload']): p is DiagnosticPayload {
  return typeof (p as DiagnosticPayload).text === 'string';
}
