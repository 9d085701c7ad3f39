"""Video reliability: one UAV streams synthetic frames over an unreliable
flow; per-second frame loss, offered rate (bandwidth utilization), and
received rate (throughput).

Rates count video payload bytes and bucket received frames by their send
second, so a lossless run produces bit-identical offered/received series.
"""
from __future__ import annotations

from dataclasses import dataclass

from .. import messages as m
from ..dpsl import StreamEvent
from ..ids import gateway
from ..metrics import BW_UTIL, FRAME_LOSS, THROUGHPUT, MetricsLog
from ..scenario import add_dpsl, add_gateway, add_uav, base_world

VIDEO_PROFILE = "TPLink WR902AC"
# raw 320x240 at 12 bpp is 115200 bytes; scaled down to keep runs quick
FRAME_BYTES_FULL = 115_200
FRAME_SCALE = 0.1


@dataclass
class ReliabilityResult:
    fps: float
    frame_payload_bytes: int
    sent_per_s: dict[int, int]
    received_per_s: dict[int, int]
    offered_mbps: dict[int, float]  # BW_UTIL series (payload bits)
    received_mbps: dict[int, float]  # THROUGHPUT series
    loss_percent_per_s: dict[int, float]
    mean_loss_percent: float
    metrics: MetricsLog

    def cumulative_ok(self) -> bool:
        """Received payload never exceeds offered payload at any boundary."""
        seconds = sorted(set(self.offered_mbps) | set(self.received_mbps))
        sent_c = recv_c = 0.0
        for s in seconds:
            sent_c += self.offered_mbps.get(s, 0.0)
            recv_c += self.received_mbps.get(s, 0.0)
            if recv_c > sent_c + 1e-9:
                return False
        return True


def run_reliability(
    fps: float,
    seed: int = 9,
    duration_ms: float = 62_000.0,
    zero_loss: bool = False,
    frame_scale: float = FRAME_SCALE,
) -> ReliabilityResult:
    overlay = {}
    if zero_loss:
        overlay = {VIDEO_PROFILE: {"loss_prob": 0.0}, "LAN": {"loss_prob": 0.0}}
    world = base_world(seed=seed, profile_overlay=overlay)
    d = add_dpsl(world)
    add_gateway(world, 1, (0.0, 0.0, 0.0), d, interface_profiles=(VIDEO_PROFILE,))
    u = add_uav(
        world, 1, VIDEO_PROFILE, (150.0, 0.0, 30.0), d, (gateway(1),),
        topics={}, gcs_enabled=False, uavcom_enabled=False,
    )
    u.topic_transport = "dgram"
    payload_bytes = int(FRAME_BYTES_FULL * frame_scale)
    u.start_video_stream(fps, payload_bytes)

    received: dict[int, int] = {}
    received_bytes: dict[int, int] = {}

    def tap(ev: StreamEvent) -> None:
        if ev.kind != "dgram" or not isinstance(ev.inner, m.TopicMessage):
            return
        payload = ev.inner.payload
        if not isinstance(payload, m.VideoFrame):
            return
        second = ev.inner.sent_at // 1000
        received[second] = received.get(second, 0) + 1
        received_bytes[second] = received_bytes.get(second, 0) + payload.payload_len

    d.stream_tap = tap
    world.run(duration_ms)

    sent: dict[int, int] = {}
    sent_bytes: dict[int, int] = {}
    for t, _frame_no, nbytes in u.video_sent:
        second = int(t // 1000)
        sent[second] = sent.get(second, 0) + 1
        sent_bytes[second] = sent_bytes.get(second, 0) + nbytes

    # whole seconds fully inside the run
    last = int(duration_ms // 1000) - 1
    seconds = [s for s in sorted(sent) if 1 <= s < last]
    loss = {}
    offered_mbps = {}
    received_mbps = {}
    metrics = MetricsLog()
    for s in seconds:
        n_sent = sent.get(s, 0)
        n_recv = received.get(s, 0)
        loss[s] = 100.0 * (1.0 - n_recv / n_sent) if n_sent else 0.0
        offered_mbps[s] = sent_bytes.get(s, 0) * 8 / 1e6
        received_mbps[s] = received_bytes.get(s, 0) * 8 / 1e6
        metrics.add(s * 1000.0, FRAME_LOSS, loss[s], fps=str(fps))
        metrics.add(s * 1000.0, BW_UTIL, offered_mbps[s], fps=str(fps))
        metrics.add(s * 1000.0, THROUGHPUT, received_mbps[s], fps=str(fps))

    mean_loss = sum(loss.values()) / len(loss) if loss else 0.0
    return ReliabilityResult(
        fps=fps,
        frame_payload_bytes=payload_bytes,
        sent_per_s={s: sent.get(s, 0) for s in seconds},
        received_per_s={s: received.get(s, 0) for s in seconds},
        offered_mbps=offered_mbps,
        received_mbps=received_mbps,
        loss_percent_per_s=loss,
        mean_loss_percent=mean_loss,
        metrics=metrics,
    )
