"""End-to-end bulk transfer: UAV -> gateway (wireless profile under test)
-> service layer (LAN). A saturating reliable stream yields per-frame
delivery delay, per-second throughput, and residual loss after the
retransmission budget.
"""
from __future__ import annotations

from dataclasses import dataclass

from .. import messages as m
from ..dpsl import StreamEvent
from ..ids import gateway
from ..metrics import PDD, PLP, THROUGHPUT, MeanCI, MetricsLog, mean_ci
from ..scenario import add_dpsl, add_gateway, add_uav, base_world

CHUNK_BYTES = 32_000
WARMUP_MS = 3_000.0


@dataclass
class E2EResult:
    profile: str
    throughput_mbps: MeanCI  # per-second samples
    pdd_ms: MeanCI
    plp: float
    frames_delivered: int
    frames_lost: int
    metrics: MetricsLog


def run_e2e(
    profile_name: str,
    seed: int = 7,
    duration_ms: float = 28_000.0,
    zero_loss: bool = False,
) -> E2EResult:
    overlay = {}
    if zero_loss:
        overlay = {
            profile_name: {"loss_prob": 0.0},
            "LAN": {"loss_prob": 0.0},
        }
    # window of 8 keeps worst-case in-flight bytes (frames plus duplicate
    # retransmissions) comfortably under the link queue byte cap
    world = base_world(seed=seed, net={"reliable_window": 8}, profile_overlay=overlay)
    d = add_dpsl(world)
    add_gateway(world, 1, (0.0, 0.0, 0.0), d, interface_profiles=(profile_name,))
    u = add_uav(
        world, 1, profile_name, (200.0, 0.0, 30.0), d, (gateway(1),),
        topics={}, uavcom_enabled=False,
    )

    per_second_bytes: dict[int, int] = {}
    pdd_samples: list[float] = []
    delivered = 0

    def tap(ev: StreamEvent) -> None:
        nonlocal delivered
        if ev.kind != "reliable" or not isinstance(ev.inner, m.BulkPayload):
            return
        if ev.time_ms < WARMUP_MS:
            return
        delivered += 1
        second = int(ev.time_ms // 1000)
        per_second_bytes[second] = per_second_bytes.get(second, 0) + ev.frame_bytes
        if ev.pdd_ms is not None:
            pdd_samples.append(ev.pdd_ms)

    d.stream_tap = tap

    # saturating source: keep the channel window full once connected
    chunk_no = [0]

    def refill() -> None:
        ep = u.pair.topic_ep
        while ep.backlog() < 2 * ep.window:
            ep.send(
                m.BulkPayload(stream_id="e2e", chunk_no=chunk_no[0], payload=b"\x00" * CHUNK_BYTES)
            )
            chunk_no[0] += 1

    u.pair.topic_ep.on_space = refill
    world.sim.after(500.0, refill)

    world.run(duration_ms)

    ep = u.pair.topic_ep
    finals = ep.gave_up + ep.delivered_out
    plp = ep.gave_up / finals if finals else 0.0

    # whole seconds strictly inside the measurement window
    last_full = int(duration_ms // 1000) - 1
    tput_samples = [
        per_second_bytes.get(s, 0) * 8 / 1e6
        for s in range(int(WARMUP_MS // 1000) + 1, last_full)
    ]
    metrics = MetricsLog()
    for s_idx, mbps in enumerate(tput_samples):
        metrics.add((s_idx + int(WARMUP_MS // 1000) + 1) * 1000.0, THROUGHPUT, mbps, profile=profile_name)
    metrics.add(duration_ms, PLP, plp, profile=profile_name)
    pdd = mean_ci(pdd_samples)
    metrics.add(duration_ms, PDD, pdd.mean if pdd_samples else 0.0, profile=profile_name)

    return E2EResult(
        profile=profile_name,
        throughput_mbps=mean_ci(tput_samples),
        pdd_ms=pdd,
        plp=plp,
        frames_delivered=delivered,
        frames_lost=ep.gave_up,
        metrics=metrics,
    )
