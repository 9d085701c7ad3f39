"""Node base classes: frame dispatch, addressed forwarding, and mesh
participation (hello beacons, join synchronization, routed relaying)."""
from __future__ import annotations

from typing import Optional

from . import messages as m
from . import routing, wire
from .errors import LinkDown, NoRoute
from .ids import Address, NodeId, NodeKind
from .links import Link
from .world import World

ADDRESSED_KINDS = (
    m.Segment,
    m.SegmentAck,
    m.FloorUpdate,
    m.Datagram,
    m.Identify,
    m.IdentifyOk,
    m.IdentifyReject,
    m.Keepalive,
    m.EchoRequest,
    m.EchoReply,
)


class Node:
    """One network participant driven entirely by event callbacks."""

    def __init__(self, world: World, node_id: NodeId, address: Address) -> None:
        self.world = world
        self.node_id = node_id
        self.address = address
        self.sim = world.sim
        self.cfg = world.cfg
        self.emu = world.emu
        self.log: list[str] = []

    # --- identity -----------------------------------------------------------

    def addresses(self) -> list[Address]:
        return [self.address]

    def owns_addr(self, addr: Address) -> bool:
        return addr in self.addresses()

    def start(self) -> None:
        pass

    # --- receive path ---------------------------------------------------------

    def on_link_frame(self, link: Link, sender: NodeId, frame: bytes) -> None:
        msg = wire.decode(frame)
        self.dispatch(msg, link, sender)

    def dispatch(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        if isinstance(msg, ADDRESSED_KINDS):
            if self.owns_addr(msg.dst):
                self.handle_local(msg, link, sender)
            else:
                self.forward(msg, link, sender)
            return
        self.handle_control(msg, link, sender)

    def handle_local(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        pass

    def handle_control(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        pass

    def forward(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        # non-routing nodes sink misaddressed frames
        pass

    # --- send path ------------------------------------------------------------

    def send_on_link(self, peer: NodeId, msg: m.Message, category: str = "data") -> bool:
        link = self.emu.link_between(self.node_id, peer)
        if link is None:
            return False
        try:
            self.emu.transmit(link.link_id, self.node_id, wire.encode(msg, mtu_budget=None), category)
        except LinkDown:
            return False
        return True

    def send_routed(self, msg: m.Message, category: str = "data") -> bool:
        """Send an addressed frame toward msg.dst; False when undeliverable
        right now (callers with reliability retry via their own timers)."""
        hop = self.next_hop_for(msg.dst)
        if hop is None:
            return False
        return self.send_on_link(hop, msg, category)

    def next_hop_for(self, dst: Address) -> Optional[NodeId]:
        raise NotImplementedError

    def note(self, text: str) -> None:
        self.log.append(f"[{self.sim.now:.1f}ms] {text}")


class MeshNode(Node):
    """Node that participates in distance-vector routing over its radio links."""

    def __init__(self, world: World, node_id: NodeId, address: Address) -> None:
        super().__init__(world, node_id, address)
        self.table = routing.RoutingTable(owner=node_id)
        self._hello_stop = None
        self._seen_joins: set[tuple[str, int]] = set()
        self.joined = False
        self.announce_join = False

    # --- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        super().start()
        self.start_mesh(announce=self.announce_join)

    def start_mesh(self, announce: bool = False) -> None:
        if self._hello_stop is not None:
            return
        self.joined = True
        offset = (self.node_id.index * 73.0) % self.cfg.hello_period_ms
        self._hello_stop = self.sim.every(
            self.cfg.hello_period_ms,
            self._hello_tick,
            start_ms=self.sim.now + offset,
            label=f"hello:{self.node_id}",
        )
        if announce:
            self._flood_join()

    def stop_mesh(self) -> None:
        if self._hello_stop is not None:
            self._hello_stop()
            self._hello_stop = None
        self.joined = False

    # --- hello / join protocol --------------------------------------------------

    def _live_neighbors(self) -> list[NodeId]:
        return self.emu.neighbors(self.node_id)

    def _hello_tick(self) -> None:
        routing.expire(self.table, self.sim.now, self.cfg.hello_period_ms)
        neighbors = self._live_neighbors()
        for peer in neighbors:
            beacon = m.HelloBeacon(
                sender=self.node_id,
                neighbor_set=tuple(n for n in neighbors if n != peer),
                table_digest=self.table.digest(for_neighbor=peer),
                sent_at=self.sim.now_int(),
            )
            self.send_on_link(peer, beacon, category="ctrl")

    def _flood_join(self) -> None:
        announce = m.JoinAnnounce(sender=self.node_id, ttl=6, sent_at=self.sim.now_int())
        self._seen_joins.add((self.node_id.label, announce.sent_at))
        for peer in self._live_neighbors():
            self.send_on_link(peer, announce, category="ctrl")

    def handle_control(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        if isinstance(msg, m.HelloBeacon):
            routing.on_hello(self.table, msg, self.sim.now)
            return
        if isinstance(msg, m.JoinAnnounce):
            key = (msg.sender.label, msg.sent_at)
            if key in self._seen_joins or msg.sender == self.node_id:
                return
            self._seen_joins.add(key)
            self.on_join_announce(msg, link, sender)
            if msg.ttl > 0:
                relay = m.JoinAnnounce(sender=msg.sender, ttl=msg.ttl - 1, sent_at=msg.sent_at)
                for peer in self._live_neighbors():
                    if peer != sender:
                        self.send_on_link(peer, relay, category="ctrl")
            return
        if isinstance(msg, m.JoinSyncRequest):
            if msg.target == self.node_id:
                self.on_join_sync_request(msg)
            return
        if isinstance(msg, m.JoinSyncReply):
            if msg.target == self.node_id:
                self.on_join_sync_reply(msg)
            return
        self.handle_mesh_extra(msg, link, sender)

    def on_join_announce(self, msg: m.JoinAnnounce, link: Link, sender: NodeId) -> None:
        """Triggered update: adopt an adjacent joiner at once, then beacon to
        every neighbor so the new route propagates at flood speed instead of
        one hop per hello period."""
        joiner = msg.sender
        neighbors = self._live_neighbors()
        if joiner in neighbors:
            self.table.entries[joiner] = routing.RouteEntry(joiner, 1, self.sim.now)
            self.table.poisoned.pop(joiner, None)
        for peer in neighbors:
            beacon = m.HelloBeacon(
                sender=self.node_id,
                neighbor_set=tuple(n for n in neighbors if n != peer),
                table_digest=self.table.digest(for_neighbor=peer),
                sent_at=self.sim.now_int(),
            )
            self.send_on_link(peer, beacon, category="ctrl")

    def on_join_sync_request(self, msg: m.JoinSyncRequest) -> None:
        pass

    def on_join_sync_reply(self, msg: m.JoinSyncReply) -> None:
        pass

    def handle_mesh_extra(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        pass

    # --- forwarding ---------------------------------------------------------------

    def default_gateway(self) -> Optional[NodeId]:
        return None

    def _toward(self, target: NodeId) -> Optional[NodeId]:
        """Next radio hop for a mesh-reachable target, or None."""
        link = self.emu.link_between(self.node_id, target)
        if link is not None and self.emu.is_live(link):
            return target
        try:
            hop = routing.next_hop(self.table, target)
        except NoRoute:
            return None
        hop_link = self.emu.link_between(self.node_id, hop)
        if hop_link is None or not self.emu.is_live(hop_link):
            return None
        return hop

    def next_hop_for(self, dst: Address) -> Optional[NodeId]:
        target = self.world.node_for_addr(dst)
        if target == self.node_id:
            return None
        if target is not None and target.kind in (NodeKind.UAV, NodeKind.GATEWAY):
            return self._toward(target)
        # external destination (service layer, NAT'd replies): via gateway
        gw = self.default_gateway()
        if gw is None or gw == self.node_id:
            return None
        return self._toward(gw)

    def forward(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        self.send_routed(msg, category="relay")

    def routing_rows(self) -> list[tuple[str, str, str, int]]:
        return self.table.dump_rows()
