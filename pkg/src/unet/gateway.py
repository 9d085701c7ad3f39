"""Multi-protocol gateway: heterogeneous ingress radios, one uplink,
source masquerading through a NAT table, a five-step configuration
procedure, and ECMP member selection for handover.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from . import messages as m
from . import wire
from .errors import ConfigError, NoGateway
from .ids import Address, NodeId, NodeKind
from .links import Link
from .nodes import MeshNode
from .world import World


class GatewayState(str, Enum):
    UNCONFIGURED = "UNCONFIGURED"
    ADDRESSED = "ADDRESSED"
    FORWARDING = "FORWARDING"
    RESTARTED = "RESTARTED"
    MASQUERADING = "MASQUERADING"
    RUNNING = "RUNNING"


_ORDER = list(GatewayState)


@dataclass
class InterfaceConfig:
    name: str
    profile_name: str
    address: str
    netmask: str = "255.255.255.0"
    dns: str = "198.51.100.1"


@dataclass
class GatewayConfig:
    interfaces: list[InterfaceConfig]
    uplink_kind: str  # "LAN" | "CELL_4G"
    uplink_address: str
    forwarding_enabled: bool = False
    masquerade_enabled: bool = False
    rules_persisted: bool = False
    state: GatewayState = GatewayState.UNCONFIGURED

    def check_invariants(self) -> None:
        if self.state is GatewayState.RUNNING:
            assert self.forwarding_enabled and self.masquerade_enabled and self.rules_persisted


def configure(cfg: GatewayConfig, flush_hook=None) -> GatewayConfig:
    """Run the configuration steps in order; idempotent per step.

    Steps: assign interface addresses, enable forwarding, restart interfaces
    (flushing queues), enable masquerading, persist the rules. A failure
    leaves the state at the last completed step.
    """
    if cfg.uplink_kind not in ("LAN", "CELL_4G"):
        raise ConfigError(f"uplink_kind: expected LAN or CELL_4G, got {cfg.uplink_kind!r}")
    if cfg.state is GatewayState.UNCONFIGURED:
        seen: set[str] = set()
        for iface in cfg.interfaces:
            if iface.address in seen:
                raise ConfigError(f"interfaces.{iface.name}.address: duplicate {iface.address}")
            seen.add(iface.address)
        if cfg.uplink_address in seen:
            raise ConfigError("uplink_address overlaps an interface address")
        cfg.state = GatewayState.ADDRESSED
    if cfg.state is GatewayState.ADDRESSED:
        cfg.forwarding_enabled = True
        cfg.state = GatewayState.FORWARDING
    if cfg.state is GatewayState.FORWARDING:
        if flush_hook is not None:
            flush_hook()
        cfg.state = GatewayState.RESTARTED
    if cfg.state is GatewayState.RESTARTED:
        cfg.masquerade_enabled = True
        cfg.state = GatewayState.MASQUERADING
    if cfg.state is GatewayState.MASQUERADING:
        cfg.rules_persisted = True
        cfg.state = GatewayState.RUNNING
    cfg.check_invariants()
    return cfg


# --- NAT ---------------------------------------------------------------------


class NatTable:
    """Bijective (inner address, inner port) <-> uplink port map with idle expiry."""

    FIRST_PORT = 20000

    def __init__(self, capacity: int = 4096, idle_timeout_ms: float = 300_000.0) -> None:
        self.capacity = capacity
        self.idle_timeout_ms = idle_timeout_ms
        self._fwd: dict[tuple[str, int], int] = {}
        self._rev: dict[int, tuple[str, int]] = {}
        self._last_used: dict[int, float] = {}
        self._next_port = self.FIRST_PORT
        self.full_drops = 0
        self.reverse_misses = 0

    def __len__(self) -> int:
        return len(self._fwd)

    def translate_out(self, inner: Address, now: float) -> Optional[int]:
        key = (inner.host, inner.port)
        port = self._fwd.get(key)
        if port is None:
            if len(self._fwd) >= self.capacity:
                self.full_drops += 1
                return None
            port = self._next_port
            self._next_port += 1
            self._fwd[key] = port
            self._rev[port] = key
        self._last_used[port] = now
        return port

    def translate_back(self, ext_port: int, now: float) -> Optional[Address]:
        key = self._rev.get(ext_port)
        if key is None:
            self.reverse_misses += 1
            return None
        self._last_used[ext_port] = now
        return Address(*key)

    def expire_idle(self, now: float) -> list[int]:
        expired = [p for p, t in self._last_used.items() if now - t > self.idle_timeout_ms]
        for port in expired:
            key = self._rev.pop(port)
            del self._fwd[key]
            del self._last_used[port]
        return expired

    def is_bijective(self) -> bool:
        if len(self._fwd) != len(self._rev):
            return False
        return all(self._rev.get(port) == key for key, port in self._fwd.items())


# --- ECMP ----------------------------------------------------------------------


@dataclass
class EcmpGroup:
    """Equal-cost gateway set with per-member health."""

    members: tuple[NodeId, ...]
    health: dict[NodeId, bool] = field(default_factory=dict)

    def set_health(self, member: NodeId, alive: bool) -> None:
        if member not in self.members:
            raise KeyError(f"{member} is not a group member")
        self.health[member] = alive

    def live_members(self) -> list[NodeId]:
        return [g for g in self.members if self.health.get(g, False)]


def _weight(flow_key: str, member: NodeId) -> int:
    digest = hashlib.sha256(f"{flow_key}|{member.label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rendezvous_select(flow_key: str, live: list[NodeId]) -> NodeId:
    """Highest-random-weight choice: a membership change only moves the
    flows whose weight pointed at the changed member."""
    if not live:
        raise NoGateway("no live gateway")
    return max(sorted(live), key=lambda g: _weight(flow_key, g))


def select_gateway(group: EcmpGroup, flow_key: str) -> NodeId:
    return rendezvous_select(flow_key, group.live_members())


# --- gateway node ------------------------------------------------------------------


@dataclass
class _ProcItem:
    frame_msg: m.Message
    ingress_name: str
    arrived: float
    frame_bytes: int


class GatewayNode(MeshNode):
    """Forwarding node between the radio side and the uplink."""

    def __init__(
        self,
        world: World,
        node_id: NodeId,
        config: GatewayConfig,
        record_frames: bool = False,
    ) -> None:
        host = f"10.0.0.{node_id.index}"
        super().__init__(world, node_id, Address(host, 100))
        self.uplink_addr = Address(f"203.0.113.{node_id.index}", 100)
        self.config = config
        self.nat = NatTable(capacity=self.cfg.nat_capacity, idle_timeout_ms=self.cfg.nat_idle_timeout_ms)
        self.record_frames = record_frames
        self.frame_records: list[tuple[float, str, int, float]] = []
        self.per_second: dict[tuple[int, str], list[float]] = {}
        # proc pipeline
        self._proc_queue: list[_ProcItem] = []
        self._proc_queued_bytes = 0
        self._proc_inflight_bytes = 0
        self._proc_busy = False
        self._engaged: set[str] = set()
        self._prev_ingress: Optional[str] = None
        # counters
        self.bytes_in = 0
        self.bytes_out = 0
        self.bytes_dropped = 0
        self.proc_queue_drops = 0
        self.not_running_drops = 0
        self._beacon_stop = None
        self._rx_len = 0

    def addresses(self) -> list[Address]:
        return [self.address, self.uplink_addr]

    def owns_addr(self, addr: Address) -> bool:
        # NAT'd ports on the uplink host are forwarded, not consumed, so
        # ownership is exact-match only
        return addr == self.address or addr == self.uplink_addr

    @property
    def running(self) -> bool:
        return self.config.state is GatewayState.RUNNING

    def start(self) -> None:
        super().start()
        self._beacon_stop = self.sim.every(
            self.cfg.gateway_beacon_ms,
            self._beacon_tick,
            start_ms=self.sim.now + (self.node_id.index * 7.0) % self.cfg.gateway_beacon_ms,
            label=f"gwbeacon:{self.node_id}",
        )
        self.sim.every(30_000.0, lambda: self.nat.expire_idle(self.sim.now))

    def stop_beacons(self) -> None:
        """Silence the gateway (process failure); links stay physically up."""
        if self._beacon_stop is not None:
            self._beacon_stop()
            self._beacon_stop = None
        self.stop_mesh()

    def _beacon_tick(self) -> None:
        beacon = m.GatewayBeacon(sender=self.node_id, sent_at=self.sim.now_int())
        for link in self.emu.links_of(self.node_id):
            peer = link.peer_of(self.node_id)
            if peer.kind.value == "dpsl":
                continue
            if self.emu.is_live(link):
                self.send_on_link(peer, beacon, category="ctrl")

    # --- join synchronization hub ------------------------------------------------

    def _roster_size(self) -> int:
        return 1 + sum(1 for d in self.table.entries if d.kind.value == "uav")

    def handle_local(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        if isinstance(msg, m.Datagram) and msg.flow == "join/sync":
            inner = msg.inner
            if isinstance(inner, m.JoinSyncRequest):
                roster = tuple(sorted([self.node_id] + [d for d in self.table.entries]))
                blob_len = self.cfg.join_sync_base_bytes + self.cfg.join_sync_per_node_bytes * self._roster_size()
                reply = m.JoinSyncReply(
                    sender=self.node_id,
                    target=inner.sender,
                    roster=roster,
                    state_blob=b"\x00" * blob_len,
                    sent_at=self.sim.now_int(),
                )
                out = m.Datagram(src=self.address, dst=msg.src, flow="join/sync", dseq=0, inner=reply)
                self.send_routed(out, category="ctrl")
            return

    # --- forwarding plane -----------------------------------------------------------

    def _uplink_link(self) -> Optional[Link]:
        for link in self.emu.links_of(self.node_id):
            if link.peer_of(self.node_id).kind.value == "dpsl":
                return link
        return None

    def on_link_frame(self, link: Link, sender: NodeId, frame: bytes) -> None:
        # dispatch is synchronous, so the length of the frame being handled
        # is valid for the duration of the call
        self._rx_len = len(frame)
        super().on_link_frame(link, sender, frame)

    def forward(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        """Addressed frame not for us: NAT between radio side and uplink, or
        relay radio-to-radio within the mesh."""
        dst = msg.dst
        uplink = self._uplink_link()
        from_uplink = uplink is not None and link.link_id == uplink.link_id
        if not from_uplink:
            target = self.world.node_for_addr(dst)
            if (
                target is not None
                and target != self.node_id
                and target.kind in (NodeKind.UAV, NodeKind.GATEWAY)
            ):
                # radio-side destination: plain mesh relay, no translation
                self.send_routed(msg, category="relay")
                return
        if not self.running:
            self.not_running_drops += 1
            return
        self._proc_enqueue(msg, link, from_uplink)

    def _proc_enqueue(self, msg: m.Message, link: Link, from_uplink: bool) -> None:
        ingress_name = "uplink" if from_uplink else f"radio{link.link_id}"
        frame_bytes = self._rx_len
        self.bytes_in += frame_bytes
        if self._proc_queued_bytes + frame_bytes > self.cfg.gw_proc_queue_cap_bytes:
            self.proc_queue_drops += 1
            self.bytes_dropped += frame_bytes
            return
        self._engaged.add(ingress_name)
        self._proc_queue.append(_ProcItem(msg, ingress_name, self.sim.now, frame_bytes))
        self._proc_queued_bytes += frame_bytes
        if not self._proc_busy:
            self._proc_busy = True
            self._proc_next()

    def _proc_cost_ms(self, ingress_name: str) -> float:
        cost = self.cfg.gw_frame_cost_us
        if len(self._engaged) > 1:
            cost *= 1.0 + self.cfg.gw_multi_ingress_factor * (len(self._engaged) - 1)
            if self._prev_ingress is not None and self._prev_ingress != ingress_name:
                cost += self.cfg.gw_switch_cost_us
        jitter = self.cfg.gw_cost_jitter
        if jitter > 0:
            cost *= self.sim.uniform(1.0 - jitter, 1.0 + jitter)
        return cost / 1000.0

    def _proc_next(self) -> None:
        if not self._proc_queue:
            self._proc_busy = False
            return
        item = self._proc_queue.pop(0)
        self._proc_queued_bytes -= item.frame_bytes
        self._proc_inflight_bytes += item.frame_bytes
        cost_ms = self._proc_cost_ms(item.ingress_name)
        self._prev_ingress = item.ingress_name
        self.sim.after(cost_ms, lambda: self._proc_complete(item))

    def _proc_complete(self, item: _ProcItem) -> None:
        self._proc_inflight_bytes -= item.frame_bytes
        delay_us = (self.sim.now - item.arrived) * 1000.0
        second = int(self.sim.now // 1000)
        bucket = self.per_second.setdefault((second, item.ingress_name), [0.0, 0.0, 0.0])
        bucket[0] += 1
        bucket[1] += delay_us
        bucket[2] += item.frame_bytes
        if self.record_frames:
            self.frame_records.append((self.sim.now, item.ingress_name, item.frame_bytes, delay_us))
        self._emit(item)
        self._proc_next()

    def _emit(self, item: _ProcItem) -> None:
        msg = item.frame_msg
        if item.ingress_name == "uplink":
            translated = self._translate_back(msg)
            if translated is None:
                self.bytes_dropped += item.frame_bytes
                return
            sent = self.send_routed(translated, category="data")
            if sent:
                self.bytes_out += item.frame_bytes
            else:
                self.bytes_dropped += item.frame_bytes
            return
        translated = self._translate_out(msg)
        if translated is None:
            self.bytes_dropped += item.frame_bytes
            return
        uplink = self._uplink_link()
        if uplink is None:
            self.bytes_dropped += item.frame_bytes
            return
        ok = self.send_on_link(uplink.peer_of(self.node_id), translated, category="data")
        if ok:
            self.bytes_out += item.frame_bytes
        else:
            self.bytes_dropped += item.frame_bytes

    def _translate_out(self, msg: m.Message) -> Optional[m.Message]:
        if not self.config.masquerade_enabled:
            return msg
        src = msg.src
        port = self.nat.translate_out(src, self.sim.now)
        if port is None:
            return None
        return replace(msg, src=Address(self.uplink_addr.host, port))

    def _translate_back(self, msg: m.Message) -> Optional[m.Message]:
        inner = self.nat.translate_back(msg.dst.port, self.sim.now)
        if inner is None:
            return None
        return replace(msg, dst=inner)

    def _live_neighbors(self) -> list[NodeId]:
        return [p for p in super()._live_neighbors() if p.kind.value != "dpsl"]

    def next_hop_for(self, dst: Address) -> Optional[NodeId]:
        target = self.world.node_for_addr(dst)
        if target is not None and target.kind in (NodeKind.UAV, NodeKind.GATEWAY):
            return self._toward(target)
        uplink = self._uplink_link()
        return uplink.peer_of(self.node_id) if uplink is not None else None

    def frame_csv_text(self) -> str:
        """Per-frame forwarding record CSV (needs record_frames=True)."""
        lines = ["time_ms,ingress_if,bytes,processing_delay_us"]
        for t, ingress, nbytes, delay_us in self.frame_records:
            lines.append(f"{t!r},{ingress},{nbytes},{delay_us!r}")
        return "\n".join(lines) + "\n"

    def conservation_ok(self) -> bool:
        queued = self._proc_queued_bytes + self._proc_inflight_bytes
        return self.bytes_in == self.bytes_out + self.bytes_dropped + queued

    def flush_queues(self) -> None:
        for link in self.emu.links_of(self.node_id):
            link.flush()
        for item in self._proc_queue:
            self.bytes_dropped += item.frame_bytes
        self._proc_queue.clear()
        self._proc_queued_bytes = 0
