"""Reliable endpoint behavior over a scriptable lossy pipe."""
import random

from unet.channels import ReliableEndpoint
from unet.ids import Address
from unet.messages import AckMessage, AckStatus, FloorUpdate, Segment, SegmentAck
from unet.sim import Simulator

A = Address("10.0.0.1", 5001)
B = Address("10.0.0.2", 5001)


class Pipe:
    """Two endpoints joined by a one-way-loss channel with fixed delay."""

    def __init__(self, sim, loss=0.0, delay_ms=5.0, rto=30.0, retx_limit=3, window=8, seed=1):
        self.sim = sim
        self.rng = random.Random(seed)
        self.loss = loss
        self.delay_ms = delay_ms
        self.delivered = []
        self.left = ReliableEndpoint(
            sim, "ch", A, self._send_from_left, lambda msg, seg: None,
            rto_ms=rto, retx_limit=retx_limit, window=window,
        )
        self.right = ReliableEndpoint(
            sim, "ch", B, self._send_from_right, lambda msg, seg: self.delivered.append(msg),
            rto_ms=rto, retx_limit=retx_limit, window=window,
        )
        self.left.set_peer(B)
        self.right.set_peer(A)
        self.left.set_connected(True)
        self.right.set_connected(True)
        self.blackout = False

    def _send_from_left(self, msg):
        return self._relay(msg, self.right)

    def _send_from_right(self, msg):
        return self._relay(msg, self.left)

    def _relay(self, msg, dest_ep):
        if self.blackout:
            return False
        if self.rng.random() < self.loss:
            return True  # transmitted but lost in flight
        if isinstance(msg, Segment):
            self.sim.after(self.delay_ms, lambda: dest_ep.on_segment(msg))
        elif isinstance(msg, SegmentAck):
            self.sim.after(self.delay_ms, lambda: dest_ep.on_ack(msg))
        elif isinstance(msg, FloorUpdate):
            self.sim.after(self.delay_ms, lambda: dest_ep.on_floor_update(msg))
        return True


def ack_msg(i):
    return AckMessage(request_id=i, status=AckStatus.SUCCESS, completed_at=i)


def test_lossless_in_order_delivery():
    sim = Simulator(seed=1)
    pipe = Pipe(sim)
    msgs = [ack_msg(i) for i in range(50)]
    for msg in msgs:
        pipe.left.send(msg)
    sim.run_until_idle(10_000)
    assert pipe.delivered == msgs
    assert pipe.left.gave_up == 0


def test_heavy_loss_retransmission_recovers_everything():
    # 30% loss each way, generous retries: everything arrives exactly once,
    # in order
    sim = Simulator(seed=7)
    pipe = Pipe(sim, loss=0.30, retx_limit=30, rto=25.0)
    msgs = [ack_msg(i) for i in range(200)]
    for msg in msgs:
        pipe.left.send(msg)
    sim.run_until_idle(600_000)
    assert pipe.delivered == msgs
    assert pipe.left.gave_up == 0
    assert pipe.right.duplicates_in > 0  # retransmission actually happened


def test_exhausted_budget_counts_post_retry_loss_and_stream_moves_on():
    sim = Simulator(seed=3)
    pipe = Pipe(sim, loss=1.0, retx_limit=2)
    pipe.left.send(ack_msg(0))
    sim.run_until_idle(100_000)
    assert pipe.left.gave_up == 1
    # channel recovers once the loss clears
    pipe.loss = 0.0
    pipe.left.send(ack_msg(1))
    sim.run_until_idle(200_000)
    assert [m.request_id for m in pipe.delivered] == [1]


def test_floor_skips_abandoned_gap():
    sim = Simulator(seed=5)
    pipe = Pipe(sim, loss=0.0, retx_limit=1)
    # drop exactly the second segment's transmissions
    original = pipe._relay

    def selective(msg, dest_ep):
        if isinstance(msg, Segment) and msg.cseq == 1:
            return True
        return original(msg, dest_ep)

    pipe._relay = selective
    for i in range(5):
        pipe.left.send(ack_msg(i))
    sim.run_until_idle(100_000)
    assert pipe.left.gave_up == 1
    assert [m.request_id for m in pipe.delivered] == [0, 2, 3, 4]


def test_blackout_buffers_without_burning_attempts():
    sim = Simulator(seed=9)
    pipe = Pipe(sim, retx_limit=2)
    pipe.blackout = True
    for i in range(10):
        pipe.left.send(ack_msg(i))
    sim.run_until_idle(sim.now + 5_000)
    assert pipe.delivered == []
    assert pipe.left.gave_up == 0  # local failures are not attempts
    pipe.blackout = False
    sim.run_until_idle(sim.now + 5_000)
    assert [m.request_id for m in pipe.delivered] == list(range(10))


def test_disconnect_reconnect_resumes_from_first_unacked():
    sim = Simulator(seed=11)
    pipe = Pipe(sim)
    for i in range(6):
        pipe.left.send(ack_msg(i))
    sim.run_until_idle(sim.now + 1_000)
    assert len(pipe.delivered) == 6
    pipe.left.set_connected(False)
    for i in range(6, 12):
        pipe.left.send(ack_msg(i))
    sim.run_until_idle(sim.now + 2_000)
    assert len(pipe.delivered) == 6  # buffered while disconnected
    pipe.left.set_connected(True)
    sim.run_until_idle(sim.now + 2_000)
    assert [m.request_id for m in pipe.delivered] == list(range(12))


def test_adaptive_rto_tracks_measured_rtt():
    sim = Simulator(seed=13)
    pipe = Pipe(sim, delay_ms=40.0, rto=10.0)
    for i in range(30):
        pipe.left.send(ack_msg(i))
    sim.run_until_idle(sim.now + 20_000)
    assert pipe.delivered == [ack_msg(i) for i in range(30)]
    # one-way 40 ms => rtt 80 ms; estimator must have risen past the floor
    assert pipe.left.srtt is not None and pipe.left.srtt > 60.0
    assert pipe.left.current_rto() > 80.0
