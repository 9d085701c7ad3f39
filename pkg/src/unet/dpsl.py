"""Data processing and service layer: accepts UAV channel pairs, ingests
topics into a pub-sub store, dispatches user service calls with deadlines
and exactly-once ack relay, and serves bridge sessions for UI clients.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import bridge
from . import messages as m
from . import wire
from .channels import ReliableEndpoint
from .errors import AlreadyExists
from .ids import Address, NodeId
from .links import Link
from .nodes import Node
from .sim import EventHandle
from .world import World

RING_SIZE = 256


@dataclass(frozen=True)
class StreamEvent:
    """One data-plane arrival at the service layer (experiment taps)."""

    time_ms: float
    kind: str  # reliable | dgram | echo
    stream: str  # channel id or datagram flow
    src: Address  # as seen at the service layer (NAT'd for radio-side peers)
    frame_bytes: int
    pdd_ms: Optional[float]
    inner: m.Message


StreamTap = Callable[[StreamEvent], None]


@dataclass
class TopicSlot:
    ring: deque = field(default_factory=lambda: deque(maxlen=RING_SIZE))
    latest: Optional[m.TopicMessage] = None
    received: int = 0

    def push(self, msg: m.TopicMessage) -> None:
        self.ring.append(msg)
        if self.latest is None or msg.seq >= self.latest.seq:
            self.latest = msg
        self.received += 1


class TopicStore:
    """Latest message plus a bounded ring per (uav, topic)."""

    def __init__(self) -> None:
        self.slots: dict[tuple[str, str], TopicSlot] = {}

    def ingest(self, msg: m.TopicMessage) -> TopicSlot:
        slot = self.slots.setdefault((msg.publisher.label, msg.topic_name), TopicSlot())
        slot.push(msg)
        return slot

    def slot(self, uav_label: str, topic: str) -> Optional[TopicSlot]:
        return self.slots.get((uav_label, topic))


class BridgeSession:
    """One UI client attached to the bridge hub."""

    def __init__(self, session_id: str, deliver: Callable[[dict], None]) -> None:
        self.session_id = session_id
        self.deliver = deliver
        self.subscriptions: set[tuple[str, str]] = set()

    def wants(self, uav_label: str, topic: str) -> bool:
        return any(bridge.matches(u, t, uav_label, topic) for u, t in self.subscriptions)


@dataclass
class PendingServiceCall:
    request_id: int
    origin: str  # session id
    tag: str
    target: NodeId
    service: str
    issued_at: float
    deadline: EventHandle


@dataclass
class UavRegistration:
    node: NodeId
    topic_ep: ReliableEndpoint
    service_ep: ReliableEndpoint
    identified: set[str] = field(default_factory=set)
    last_heard: float = 0.0
    online: bool = False

    def pair_bound(self) -> bool:
        return len(self.identified) >= 2


class DpslNode(Node):
    def __init__(self, world: World, node_id: NodeId) -> None:
        super().__init__(world, node_id, Address("198.51.100.10", 9000))
        self.topic_listen = self.address
        self.service_listen = Address(self.address.host, 9001)
        self.data_listen = Address(self.address.host, 9002)
        self.store = TopicStore()
        self.registrations: dict[NodeId, UavRegistration] = {}
        self.sessions: dict[str, BridgeSession] = {}
        self.pending: dict[int, PendingServiceCall] = {}
        self._next_request_id = 1
        self.unknown_publisher_drops = 0
        self.acks_relayed = 0
        self.roster_changes: list[tuple[float, str, bool]] = []
        self.stream_tap: Optional[StreamTap] = None
        self.echo_replies_sent = 0
        self.ack_delays: list[float] = []  # one-way UAV->DPSL ack leg
        self._rx_len = 0

    def addresses(self) -> list[Address]:
        return [self.topic_listen, self.service_listen, self.data_listen]

    def start(self) -> None:
        super().start()
        self.sim.every(self.cfg.ecmp_eval_ms, self._roster_tick)

    # --- routing ------------------------------------------------------------

    def next_hop_for(self, dst: Address) -> Optional[NodeId]:
        for link in self.emu.links_of(self.node_id):
            peer = link.peer_of(self.node_id)
            peer_node = self.world.nodes.get(peer)
            uplink = getattr(peer_node, "uplink_addr", None)
            if uplink is not None and uplink.host == dst.host:
                return peer
        return None

    def raw_send(self, msg: m.Message, category: str = "data") -> bool:
        return self.send_routed(msg, category=category)

    # --- UAV channel acceptance ----------------------------------------------

    def _endpoint_pair(self, node: NodeId, resume_topic: int, resume_service: int) -> UavRegistration:
        topic_ep = ReliableEndpoint(
            self.sim,
            f"{node.label}/topic",
            self.topic_listen,
            self.raw_send,
            lambda msg, seg: self._on_topic_delivery(node, msg, seg),
            rto_ms=50.0,
            retx_limit=6,
            window=self.cfg.reliable_window,
        )
        service_ep = ReliableEndpoint(
            self.sim,
            f"{node.label}/service",
            self.service_listen,
            self.raw_send,
            lambda msg, seg: self._on_ack_delivery(node, msg, seg),
            rto_ms=50.0,
            retx_limit=6,
            window=4,
        )
        topic_ep._rx_expected = resume_topic
        service_ep.set_connected(True)
        reg = UavRegistration(node=node, topic_ep=topic_ep, service_ep=service_ep)
        return reg

    def accept_uav(self, ident: m.Identify) -> None:
        node = ident.node
        reg = self.registrations.get(node)
        if reg is not None and reg.pair_bound():
            fresh = self.sim.now - reg.last_heard <= self.cfg.roster_liveness_ms
            ep = reg.topic_ep if ident.role == "topic" else reg.service_ep
            resumes = ident.resume_from >= ep.rx_expected if ident.role == "topic" else True
            if fresh and not resumes:
                reject = m.IdentifyReject(
                    src=ident.dst, dst=ident.src, channel=ident.channel,
                    reason=f"duplicate live registration for {node.label}",
                )
                self.raw_send(reject, category="ctrl")
                return
            if not fresh and not resumes:
                # stale registration: replace wholesale
                reg = None
        if reg is None:
            reg = self._endpoint_pair(node, ident.resume_from, 0)
            self.registrations[node] = reg
        reg.identified.add(ident.role)
        reg.last_heard = self.sim.now
        if ident.role == "service":
            reg.service_ep.set_peer(ident.src)
        ok = m.IdentifyOk(src=ident.dst, dst=ident.src, channel=ident.channel, node=node)
        self.raw_send(ok, category="ctrl")
        self._roster_tick()

    # --- ingestion -------------------------------------------------------------

    def _on_topic_delivery(self, node: NodeId, msg: m.Message, seg: m.Segment) -> None:
        if self.stream_tap is not None:
            self.stream_tap(
                StreamEvent(
                    time_ms=self.sim.now,
                    kind="reliable",
                    stream=f"{node.label}/topic",
                    src=seg.src,
                    frame_bytes=self._rx_len,
                    pdd_ms=self.sim.now - seg.tx_at,
                    inner=msg,
                )
            )
        if isinstance(msg, m.TopicMessage):
            self.ingest_topic(msg)

    def ingest_topic(self, msg: m.TopicMessage) -> None:
        reg = self.registrations.get(msg.publisher)
        if reg is None:
            self.unknown_publisher_drops += 1
            return
        self.store.ingest(msg)
        payload_obj = wire.to_jsonable(msg.payload)
        op = bridge.topic_op(msg.publisher.label, msg.topic_name, msg.seq, payload_obj, msg.sent_at)
        for session_id in sorted(self.sessions):
            session = self.sessions[session_id]
            if session.wants(msg.publisher.label, msg.topic_name):
                session.deliver(op)

    # --- service dispatch ---------------------------------------------------------

    def call_service(
        self, session: BridgeSession, uav_label: str, service: str, args: Optional[str], tag: str = ""
    ) -> Optional[int]:
        """Forward a service request to an ONLINE UAV; the ack (or TIMEOUT)
        comes back on the session exactly once."""
        try:
            target = NodeId.parse(uav_label)
            kind = m.ServiceKind(service)
        except ValueError:
            session.deliver(bridge.service_ack_op(-1, tag, uav_label, service, "REJECTED", "malformed request", 0.0))
            return None
        reg = self.registrations.get(target)
        if reg is None or not reg.online:
            session.deliver(bridge.service_ack_op(-1, tag, uav_label, service, "REJECTED", "target offline", 0.0))
            return None
        request_id = self._next_request_id
        self._next_request_id += 1
        req = m.ServiceMessage(
            service_name=kind,
            target=target,
            request_id=request_id,
            args=args,
            issued_at=self.sim.now_int(),
        )
        deadline = self.sim.after(
            self.cfg.service_timeout_ms, lambda: self._on_deadline(request_id)
        )
        self.pending[request_id] = PendingServiceCall(
            request_id=request_id,
            origin=session.session_id,
            tag=tag,
            target=target,
            service=service,
            issued_at=self.sim.now,
            deadline=deadline,
        )
        reg.service_ep.send(req)
        return request_id

    def _resolve(self, request_id: int, status: str, detail: str) -> None:
        call = self.pending.pop(request_id, None)
        if call is None:
            return  # already resolved: deadline raced a late ack
        call.deadline.cancel()
        session = self.sessions.get(call.origin)
        rtt = self.sim.now - call.issued_at
        if session is not None:
            session.deliver(
                bridge.service_ack_op(
                    request_id, call.tag, call.target.label, call.service, status, detail, rtt
                )
            )
        self.acks_relayed += 1

    def _on_ack_delivery(self, node: NodeId, msg: m.Message, seg: m.Segment) -> None:
        if isinstance(msg, m.AckMessage):
            self.ack_delays.append(self.sim.now - seg.tx_at)
            self._resolve(msg.request_id, msg.status.value, msg.detail)

    def _on_deadline(self, request_id: int) -> None:
        self._resolve(request_id, m.AckStatus.TIMEOUT.value, "deadline expired")

    # --- roster -----------------------------------------------------------------

    def _roster_tick(self) -> None:
        changed = False
        for node in sorted(self.registrations):
            reg = self.registrations[node]
            online = reg.pair_bound() and (self.sim.now - reg.last_heard) <= self.cfg.roster_liveness_ms
            if online != reg.online:
                reg.online = online
                self.roster_changes.append((self.sim.now, node.label, online))
                changed = True
        if changed:
            self._push_roster()

    def roster_rows(self) -> list[dict]:
        rows = []
        for node in sorted(self.registrations):
            reg = self.registrations[node]
            rows.append(
                {"uav": node.label, "online": reg.online, "last_seen_ms": round(reg.last_heard, 3)}
            )
        return rows

    def _push_roster(self) -> None:
        op = bridge.roster_op(self.roster_rows())
        for session_id in sorted(self.sessions):
            self.sessions[session_id].deliver(op)

    def online(self, node: NodeId) -> bool:
        reg = self.registrations.get(node)
        return bool(reg and reg.online)

    # --- bridge sessions -----------------------------------------------------------

    def attach_session(self, session_id: str, deliver: Callable[[dict], None]) -> BridgeSession:
        if session_id in self.sessions:
            raise AlreadyExists(f"session {session_id} already attached")
        session = BridgeSession(session_id, deliver)
        self.sessions[session_id] = session
        session.deliver(bridge.roster_op(self.roster_rows()))
        return session

    def detach_session(self, session_id: str) -> None:
        self.sessions.pop(session_id, None)

    def handle_op(self, session: BridgeSession, op: dict) -> None:
        op = bridge.validate_client_op(op)
        kind = op["op"]
        if kind == "subscribe":
            session.subscriptions.add((op["uav"], op["topic"]))
            for (uav_label, topic) in sorted(self.store.slots):
                if bridge.matches(op["uav"], op["topic"], uav_label, topic):
                    slot = self.store.slots[(uav_label, topic)]
                    messages = [
                        bridge.topic_op(uav_label, topic, t.seq, wire.to_jsonable(t.payload), t.sent_at)
                        for t in list(slot.ring)[-8:]
                    ]
                    session.deliver(bridge.snapshot_op(uav_label, topic, messages))
            return
        if kind == "unsubscribe":
            session.subscriptions.discard((op["uav"], op["topic"]))
            return
        if kind == "call_service":
            self.call_service(session, op["uav"], op["service"], op.get("args"), op.get("tag", ""))

    # --- frame handling --------------------------------------------------------------

    def on_link_frame(self, link: Link, sender: NodeId, frame: bytes) -> None:
        self._rx_len = len(frame)
        super().on_link_frame(link, sender, frame)

    def handle_local(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        if isinstance(msg, m.Identify):
            self.accept_uav(msg)
            return
        if isinstance(msg, m.Segment):
            reg = self._reg_for_channel(msg.channel)
            if reg is None:
                return
            reg.last_heard = self.sim.now
            ep = reg.topic_ep if msg.channel.endswith("/topic") else reg.service_ep
            ep.on_segment(msg)
            return
        if isinstance(msg, m.SegmentAck):
            reg = self._reg_for_channel(msg.channel)
            if reg is None:
                return
            ep = reg.topic_ep if msg.channel.endswith("/topic") else reg.service_ep
            ep.on_ack(msg)
            return
        if isinstance(msg, m.FloorUpdate):
            reg = self._reg_for_channel(msg.channel)
            if reg is None:
                return
            ep = reg.topic_ep if msg.channel.endswith("/topic") else reg.service_ep
            ep.on_floor_update(msg)
            return
        if isinstance(msg, m.Keepalive):
            reg = self._reg_for_channel(msg.channel)
            if reg is not None:
                reg.last_heard = self.sim.now
            return
        if isinstance(msg, m.EchoRequest):
            reply = m.EchoReply(
                src=msg.dst, dst=msg.src, probe_id=msg.probe_id,
                request_sent_at=msg.sent_at, sent_at=self.sim.now_int(),
            )
            self.echo_replies_sent += 1
            if self.stream_tap is not None:
                self.stream_tap(
                    StreamEvent(self.sim.now, "echo", "echo", msg.src, self._rx_len,
                                self.sim.now - msg.sent_at, msg)
                )
            self.raw_send(reply, category="data")
            return
        if isinstance(msg, m.Datagram):
            if self.stream_tap is not None:
                pdd = None
                sent_at = getattr(msg.inner, "sent_at", None)
                if sent_at is not None:
                    pdd = self.sim.now - sent_at
                self.stream_tap(
                    StreamEvent(self.sim.now, "dgram", msg.flow, msg.src, self._rx_len, pdd, msg.inner)
                )
            return

    def _reg_for_channel(self, channel: str) -> Optional[UavRegistration]:
        label, _, _role = channel.partition("/")
        try:
            node = NodeId.parse(label)
        except (ValueError, KeyError):
            return None
        return self.registrations.get(node)
