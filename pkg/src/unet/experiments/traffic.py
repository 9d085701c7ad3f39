"""Exchanged traffic between one gateway and a growing mesh swarm.

UAVs join a line-topology mesh one at a time; every join produces a burst
of synchronization traffic (join flood, full-state sync whose size grows
with the roster, channel handshake) on top of the steady per-topic stream.
Byte series are measured on the gateway's radio links, split into data
frames (segments, datagrams) and control frames (hellos, beacons, acks,
handshakes) by wire kind tag.
"""
from __future__ import annotations

from dataclasses import dataclass

from .. import wire
from .. import messages as m
from ..ids import Address, gateway, uav
from ..metrics import CTRL_BYTES, DATA_BYTES, MetricsLog
from ..scenario import add_dpsl, add_gateway, add_uav, base_world

JOIN_OFFSET_MS = 20_000.0
SPACING_M = 150.0
DATA_TAGS = {wire.kind_tag(t) for t in ()} | {20, 22}  # Segment, Datagram

MESH_PROFILE = {
    "Microhard-short": {
        "base": "Microhard pMDDL2450",
        "max_range_m": 200.0,
    }
}


@dataclass
class JoinSpike:
    n: int
    join_ms: float
    spike_bytes_per_s: float
    prior_steady_bytes_per_s: float

    @property
    def magnitude(self) -> float:
        return self.spike_bytes_per_s - self.prior_steady_bytes_per_s


@dataclass
class TrafficResult:
    freq_hz: float
    n_max: int
    join_period_ms: float
    total_series: dict[int, float]  # second -> bytes (data + control)
    data_series: dict[int, float]
    ctrl_series: dict[int, float]
    spikes: list[JoinSpike]
    steady_data_rates: dict[int, float]  # n -> measured bytes/s
    analytic_rates: dict[int, float]  # n -> schedule x frame-size bytes/s
    metrics: MetricsLog


def nominal_topic_wire_bytes(freq_hz: float, publisher_index: int = 1) -> int:
    """Wire size of one pose plus one battery segment, sized from a
    representative mid-run message (schedule arithmetic oracle input)."""
    uav_id = uav(publisher_index)
    telemetry = m.Telemetry(
        position=(26.512345678901234, 80.23456789012345, 30.0),
        orientation=(0.7071067811865476, 0.0, 0.0, 0.7071067811865476),
        battery_voltage=12.3456,
        timestamp=250_000,
    )
    total = 0
    for topic, payload in (
        ("telemetry/pose", telemetry),
        ("telemetry/battery", m.DiagnosticText("voltage=12.345")),
    ):
        msg = m.TopicMessage(topic_name=topic, publisher=uav_id, seq=1500, payload=payload, sent_at=250_000)
        seg = m.Segment(
            src=Address(f"10.0.0.{100 + publisher_index}", 5001),
            dst=Address("198.51.100.10", 9000),
            channel=f"{uav_id.label}/topic",
            cseq=3000,
            floor=3000,
            tx_at=250_000.125,
            inner=msg,
        )
        total += len(wire.encode(seg, mtu_budget=None))
    return total


def run_traffic_over_time(
    n_max: int = 5,
    join_period_ms: float = 100_000.0,
    freq_hz: float = 3.0,
    seed: int = 3,
) -> TrafficResult:
    world = base_world(seed=seed, profile_overlay=MESH_PROFILE)
    d = add_dpsl(world)
    gw = add_gateway(world, 1, (0.0, 0.0, 10.0), d, interface_profiles=("Microhard-short",))

    topics = {"telemetry/pose": freq_hz, "telemetry/battery": freq_hz}
    spawned: list = []

    def spawn(k: int) -> None:
        peers = tuple(node.node_id for node in spawned)
        node = add_uav(
            world, k, "Microhard-short", (SPACING_M * k, 0.0, 30.0), d, (gateway(1),),
            topics=topics, mesh_peers=peers, announce_join=True,
        )
        spawned.append(node)

    join_times = [JOIN_OFFSET_MS + i * join_period_ms for i in range(n_max)]
    for i, t in enumerate(join_times):
        world.sim.at(t, lambda k=i + 1: spawn(k), label=f"join:{i + 1}")

    # byte accounting on gateway-incident radio links, by wire kind tag
    buckets: dict[int, list[float]] = {}

    def tap(link, sender, frame: bytes, category: str) -> None:
        if gw.node_id not in (link.a, link.b):
            return
        peer = link.peer_of(gw.node_id)
        if peer.kind.value == "dpsl":
            return
        second = int(world.sim.now // 1000)
        row = buckets.setdefault(second, [0.0, 0.0])
        if frame[4] in DATA_TAGS:
            row[0] += len(frame)
        else:
            row[1] += len(frame)

    world.emu.delivery_tap = tap

    duration = JOIN_OFFSET_MS + n_max * join_period_ms
    world.run(duration)

    data_series = {s: v[0] for s, v in sorted(buckets.items())}
    ctrl_series = {s: v[1] for s, v in sorted(buckets.items())}
    total_series = {s: v[0] + v[1] for s, v in sorted(buckets.items())}

    spikes = []
    steady_rates: dict[int, float] = {}
    analytic: dict[int, float] = {}
    per_uav = nominal_topic_wire_bytes(freq_hz) * freq_hz
    for i, t in enumerate(join_times):
        n = i + 1
        join_s = int(t // 1000)
        prior = [total_series.get(s, 0.0) for s in range(join_s - 10, join_s - 1)]
        prior_rate = sum(prior) / len(prior) if prior else 0.0
        spike = max(total_series.get(s, 0.0) for s in range(join_s, join_s + 3))
        spikes.append(JoinSpike(n=n, join_ms=t, spike_bytes_per_s=spike, prior_steady_bytes_per_s=prior_rate))
        steady_window = range(join_s + 60, join_s + int(join_period_ms // 1000) - 5)
        values = [data_series.get(s, 0.0) for s in steady_window]
        steady_rates[n] = sum(values) / len(values) if values else 0.0
        analytic[n] = per_uav * n

    metrics = MetricsLog()
    for s in sorted(total_series):
        metrics.add(s * 1000.0, DATA_BYTES, data_series.get(s, 0.0), freq=str(freq_hz))
        metrics.add(s * 1000.0, CTRL_BYTES, ctrl_series.get(s, 0.0), freq=str(freq_hz))

    return TrafficResult(
        freq_hz=freq_hz,
        n_max=n_max,
        join_period_ms=join_period_ms,
        total_series=total_series,
        data_series=data_series,
        ctrl_series=ctrl_series,
        spikes=spikes,
        steady_data_rates=steady_rates,
        analytic_rates=analytic,
        metrics=metrics,
    )
