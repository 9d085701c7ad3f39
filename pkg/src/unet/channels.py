"""End-to-end channel machinery over the lossy link layer.

ReliableEndpoint is a full-duplex selective-repeat transport: per-segment
retransmission timers, in-order delivery through a reorder buffer, duplicate
suppression, and a floor marker so receivers skip segments the sender has
abandoned (those count as post-retry losses). While disconnected it buffers
instead of burning retransmission attempts; reconnect resumes from the first
unacked segment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .ids import Address
from .messages import FloorUpdate, Message, Segment, SegmentAck
from .sim import EventHandle, Simulator

SendRaw = Callable[[Message], bool]
Deliver = Callable[[Message, Segment], None]

STALL_RETRY_MS = 100.0


@dataclass
class _TxState:
    msg: Message
    attempts: int = 0
    first_tx: float = -1.0
    last_tx: float = -1.0
    timer: Optional[EventHandle] = None


class ReliableEndpoint:
    def __init__(
        self,
        sim: Simulator,
        channel_id: str,
        local_addr: Address,
        send_raw: SendRaw,
        on_deliver: Deliver,
        rto_ms: float = 50.0,
        retx_limit: int = 3,
        window: int = 16,
    ) -> None:
        self.sim = sim
        self.channel_id = channel_id
        self.local_addr = local_addr
        self.peer_addr: Optional[Address] = None
        self.send_raw = send_raw
        self.on_deliver = on_deliver
        self.rto_ms = rto_ms
        self.retx_limit = retx_limit
        self.window = window
        self.connected = False
        # sender side
        self._queue: list[Message] = []
        self._unacked: dict[int, _TxState] = {}
        self._next_seq = 0
        # receiver side
        self._rx_expected = 0
        self._rx_buffer: dict[int, Segment] = {}
        # adaptive timeout: profile value is the floor, measured RTT raises
        # it so pipelined large frames do not retransmit spuriously; the
        # shared backoff multiplier persists across segments until a clean
        # sample arrives, otherwise Karn's rule can pin a stale low estimate
        self.srtt: Optional[float] = None
        self.rttvar: float = 0.0
        self._backoff_mult = 1.0
        # accounting
        self.offered = 0
        self.delivered_out = 0  # segments acked by the peer
        self.gave_up = 0
        self.delivered_in = 0
        self.duplicates_in = 0
        # saturating sources hook this to refill the window
        self.on_space: Optional[Callable[[], None]] = None

    # --- sender ---------------------------------------------------------

    def send(self, msg: Message) -> None:
        self.offered += 1
        self._queue.append(msg)
        self._pump()

    def backlog(self) -> int:
        return len(self._queue) + len(self._unacked)

    def _floor(self) -> int:
        return min(self._unacked) if self._unacked else self._next_seq

    def _pump(self) -> None:
        while (
            self.connected
            and self.peer_addr is not None
            and self._queue
            and len(self._unacked) < self.window
        ):
            msg = self._queue.pop(0)
            seq = self._next_seq
            self._next_seq += 1
            self._unacked[seq] = _TxState(msg=msg)
            self._transmit(seq)

    def _transmit(self, seq: int) -> None:
        state = self._unacked.get(seq)
        if state is None or not self.connected or self.peer_addr is None:
            return
        first = state.first_tx if state.first_tx >= 0 else self.sim.now
        segment = Segment(
            src=self.local_addr,
            dst=self.peer_addr,
            channel=self.channel_id,
            cseq=seq,
            floor=self._floor(),
            tx_at=first,
            inner=state.msg,
        )
        if not self.send_raw(segment):
            # local send failure (no route / link down): not a transmission
            # attempt, the frame stays buffered and we retry quietly
            state.timer = self.sim.after(STALL_RETRY_MS, lambda: self._transmit(seq))
            return
        state.attempts += 1
        state.first_tx = first
        state.last_tx = self.sim.now
        timeout = self.current_rto() * self._backoff_mult
        state.timer = self.sim.after(timeout, lambda: self._on_timeout(seq))

    def current_rto(self) -> float:
        if self.srtt is None:
            return max(self.rto_ms, 250.0)
        headroom = max(4.0 * self.rttvar, 0.1 * self.srtt, 1.0)
        return max(self.rto_ms, self.srtt + headroom)

    def _on_timeout(self, seq: int) -> None:
        state = self._unacked.get(seq)
        if state is None or not self.connected:
            return
        self._backoff_mult = min(self._backoff_mult * 2.0, 8.0)
        if state.attempts >= self.retx_limit + 1:
            # post-retry loss: abandon the segment so the stream can move on
            self.gave_up += 1
            del self._unacked[seq]
            self._pump()
            if not self._unacked and not self._queue:
                # nothing left to carry the new floor: push it explicitly
                self._send_floor(repeats=2)
            return
        self._transmit(seq)

    def _send_floor(self, repeats: int = 0) -> None:
        if self.peer_addr is None or not self.connected:
            return
        update = FloorUpdate(
            src=self.local_addr, dst=self.peer_addr, channel=self.channel_id, floor=self._floor()
        )
        self.send_raw(update)
        if repeats > 0:
            self.sim.after(self.current_rto(), lambda: self._send_floor(repeats - 1))

    def on_ack(self, ack: SegmentAck) -> None:
        state = self._unacked.pop(ack.cseq, None)
        if state is None:
            return
        if state.timer is not None:
            state.timer.cancel()
        if state.attempts == 1 and state.last_tx >= 0:
            # Karn's rule: only sample RTT from unambiguous (single-tx) acks
            rtt = self.sim.now - state.last_tx
            if self.srtt is None:
                self.srtt = rtt
                self.rttvar = rtt / 2.0
            else:
                self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - rtt)
                self.srtt = 0.875 * self.srtt + 0.125 * rtt
            self._backoff_mult = 1.0
        self.delivered_out += 1
        self._pump()
        if self.on_space is not None:
            self.on_space()

    # --- receiver -------------------------------------------------------

    def on_segment(self, seg: Segment) -> None:
        # always ack, including duplicates: the ack may have been lost
        self.send_raw(
            SegmentAck(src=self.local_addr, dst=seg.src, channel=self.channel_id, cseq=seg.cseq)
        )
        if seg.cseq < self._rx_expected or seg.cseq in self._rx_buffer:
            self.duplicates_in += 1
        else:
            self._rx_buffer[seg.cseq] = seg
        self._advance_floor(seg.floor)
        self._release()

    def on_floor_update(self, update: FloorUpdate) -> None:
        self._advance_floor(update.floor)
        self._release()

    def _advance_floor(self, floor: int) -> None:
        """The sender abandoned everything below floor: release what we have
        buffered below it in order, then skip the true holes."""
        if floor <= self._rx_expected:
            return
        for seq in sorted(s for s in self._rx_buffer if s < floor):
            seg = self._rx_buffer.pop(seq)
            self.delivered_in += 1
            self.on_deliver(seg.inner, seg)
        self._rx_expected = floor

    def _release(self) -> None:
        while self._rx_expected in self._rx_buffer:
            seg = self._rx_buffer.pop(self._rx_expected)
            self._rx_expected += 1
            self.delivered_in += 1
            self.on_deliver(seg.inner, seg)

    # --- lifecycle ------------------------------------------------------

    def set_peer(self, addr: Address) -> None:
        self.peer_addr = addr
        self._pump()

    def set_connected(self, connected: bool) -> None:
        if connected == self.connected:
            return
        self.connected = connected
        if not connected:
            for state in self._unacked.values():
                if state.timer is not None:
                    state.timer.cancel()
                    state.timer = None
            return
        # resume: retransmit everything outstanding with fresh attempt budgets
        self._backoff_mult = 1.0
        for seq in sorted(self._unacked):
            self._unacked[seq].attempts = 0
            self._transmit(seq)
        self._pump()
        if self.on_space is not None:
            self.on_space()

    @property
    def next_seq(self) -> int:
        return self._next_seq

    @property
    def rx_expected(self) -> int:
        return self._rx_expected
