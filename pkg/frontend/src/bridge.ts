// Bridge connection: one WebSocket, auto-reconnect with backoff, ops
// dispatched into the fleet state. Malformed server messages are logged
// and skipped; the session survives.

import { FleetState } from './state';
import { BridgeOp, CallServiceOp } from './types';

export type StateListener = (state: FleetState, connected: boolean) => void;

const BACKOFF_BASE_MS = 500;
const BACKOFF_CAP_MS = 8000;

export class BridgeClient {
  state = new FleetState();
  private ws: WebSocket | null = null;
  private backoffMs = BACKOFF_BASE_MS;
  private tagSeq = 0;
  private closed = false;

  constructor(
    private url: string,
    private onChange: StateListener,
  ) {}

  connect(): void {
    if (this.closed) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = BACKOFF_BASE_MS;
      this.state.connected = true;
      this.send({ op: 'subscribe', uav: '*', topic: '*' });
      this.onChange(this.state, true);
    };
    ws.onmessage = (event) => {
      let op: BridgeOp;
      try {
        op = JSON.parse(String(event.data)) as BridgeOp;
        if (typeof op !== 'object' || op === null || !('op' in op)) throw new Error('no op field');
      } catch (err) {
        console.warn('ignoring malformed bridge message', err);
        return;
      }
      this.state.apply(op);
      this.onChange(this.state, true);
    };
    ws.onclose = () => {
      this.state.connected = false;
      this.onChange(this.state, false);
      if (!this.closed) {
        setTimeout(() => this.connect(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_CAP_MS);
      }
    };
    ws.onerror = () => ws.close();
  }

  /** Issue a command from a user gesture; no-op when the target is
   * OFFLINE or an identical request is in flight. */
  callService(uav: string, service: string, args: string | null): boolean {
    const tag = `ui-${++this.tagSeq}`;
    if (!this.state.issue(uav, service, tag, args)) return false;
    const op: CallServiceOp = { op: 'call_service', uav, service, args, tag };
    this.send(op);
    this.onChange(this.state, this.state.connected);
    return true;
  }

  private send(obj: unknown): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(obj));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
