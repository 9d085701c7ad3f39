"""World assembly: one simulator, one mobility board, one link emulator,
all nodes, and the shared tuning constants."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from .ids import Address, NodeId
from .links import LinkEmulator
from .metrics import MetricsLog
from .mobility import Mobility
from .profiles import BUILTIN_PROFILES, LinkProfile
from .sim import Simulator

if TYPE_CHECKING:
    from .nodes import Node


@dataclass
class NetConfig:
    """Protocol and emulation constants shared by every node in a run."""

    hello_period_ms: float = 1000.0
    gateway_beacon_ms: float = 100.0
    # a gateway path is declared down after this long without a beacon
    path_down_after_ms: float = 750.0
    hysteresis_margin: float = 0.20
    hysteresis_dwell_ms: float = 1000.0
    ecmp_eval_ms: float = 100.0
    reconnect_backoff_base_ms: float = 200.0
    reconnect_backoff_cap_ms: float = 2000.0
    reliable_window: int = 16
    service_timeout_ms: float = 5000.0
    service_proc_ms: float = 2.0
    keepalive_ms: float = 500.0
    roster_liveness_ms: float = 2000.0
    uavcom_sync_ms: float = 1000.0
    autopilot_tick_ms: float = 50.0
    mobility_tick_ms: float = 20.0
    battery_start_v: float = 12.6
    battery_decay_v_per_min: float = 0.05
    # gateway forwarding plane
    gw_frame_cost_us: float = 50.0
    gw_multi_ingress_factor: float = 0.64
    gw_switch_cost_us: float = 4.0
    gw_cost_jitter: float = 0.02
    gw_proc_queue_cap_bytes: int = 1 << 20
    nat_idle_timeout_ms: float = 300_000.0
    nat_capacity: int = 4096
    join_sync_base_bytes: int = 2048
    join_sync_per_node_bytes: int = 1024


class World:
    def __init__(
        self,
        seed: int = 0,
        cfg: Optional[NetConfig] = None,
        profiles: Optional[dict[str, LinkProfile]] = None,
        keep_trace: bool = False,
    ) -> None:
        self.cfg = cfg or NetConfig()
        self.sim = Simulator(seed=seed)
        self.mobility = Mobility()
        self.emu = LinkEmulator(self.sim, self.mobility, keep_trace=keep_trace)
        self.metrics = MetricsLog()
        self.profiles = dict(profiles) if profiles is not None else dict(BUILTIN_PROFILES)
        self.nodes: dict[NodeId, "Node"] = {}
        self._addr_map: dict[Address, NodeId] = {}
        self._started = False
        self._mobility_running = False

    def add_node(self, node: "Node") -> None:
        if node.node_id in self.nodes:
            raise ValueError(f"{node.node_id} already registered")
        self.nodes[node.node_id] = node
        for addr in node.addresses():
            self._addr_map[addr] = node.node_id
        self.emu.set_receiver(node.node_id, node.on_link_frame)
        if self._started:
            node.start()

    def node_for_addr(self, addr: Address) -> Optional[NodeId]:
        return self._addr_map.get(addr)

    def register_addr(self, addr: Address, node_id: NodeId) -> None:
        self._addr_map[addr] = node_id

    def start(self) -> None:
        self._started = True
        if not self._mobility_running:
            self._mobility_running = True
            self.sim.every(self.cfg.mobility_tick_ms, lambda: self.mobility.step(self.cfg.mobility_tick_ms))
        for node_id in sorted(self.nodes):
            self.nodes[node_id].start()

    def run(self, duration_ms: float) -> None:
        if not self._started:
            self.start()
        self.sim.advance(self.sim.now + duration_ms)

    def control_traffic_bytes(self, start_ms: float, end_ms: float, node: Optional[NodeId] = None) -> int:
        """Bytes of control-plane frames offered in [start, end) by one node
        or by everyone."""
        total = 0
        for (sender, category, second), count in self.emu.offer_buckets.items():
            if category != "ctrl":
                continue
            if node is not None and sender != node:
                continue
            t = second * 1000
            if start_ms <= t < end_ms:
                total += count
        return total
