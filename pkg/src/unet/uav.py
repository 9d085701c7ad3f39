"""Simulated UAV: coarse autopilot state machine, scheduled topic
publication, UAV-to-UAV topic sharing over the mesh, and the two logical
GCS channels (topics up, services down) with handover-aware reconnection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

from . import messages as m
from .channels import ReliableEndpoint
from .gateway import rendezvous_select
from .ids import Address, NodeId
from .links import Link
from .mobility import enu_to_geodetic
from .nodes import MeshNode
from .routing import has_route
from .world import World


class FlightMode(str, Enum):
    STABILIZE = "STABILIZE"
    GUIDED = "GUIDED"
    AUTO = "AUTO"
    LAND = "LAND"


@dataclass
class FlightState:
    armed: bool = False
    mode: FlightMode = FlightMode.STABILIZE
    airborne: bool = False
    battery_voltage: float = 12.6

    def check_invariants(self) -> None:
        assert not self.airborne or self.armed, "airborne implies armed"


def autopilot_step(state: FlightState, dt_ms: float, decay_v_per_min: float) -> FlightState:
    """Advance the autopilot by dt: linear battery decay, landing completion."""
    if dt_ms <= 0:
        raise ValueError("dt must be positive")
    drained = decay_v_per_min * dt_ms / 60_000.0
    battery = max(0.0, state.battery_voltage - drained)
    airborne = state.airborne and state.mode is not FlightMode.LAND
    return replace(state, battery_voltage=battery, airborne=airborne)


@dataclass
class TopicSchedule:
    """Publish frequencies per topic name."""

    frequencies_hz: dict[str, float]

    def __post_init__(self) -> None:
        for topic, hz in self.frequencies_hz.items():
            if hz <= 0:
                raise ValueError(f"frequency for {topic} must be > 0")


DEFAULT_TOPICS = ("telemetry/pose", "telemetry/battery")


def default_schedule(hz: float = 3.0) -> TopicSchedule:
    return TopicSchedule({topic: hz for topic in DEFAULT_TOPICS})


class PairState(str, Enum):
    DISCONNECTED = "DISCONNECTED"
    CONNECTING = "CONNECTING"
    CONNECTED = "CONNECTED"


class GcsChannelPair:
    """Topic channel (UAV -> DPSL) plus service channel (DPSL -> UAV,
    acks back), reconnecting with exponential backoff after path loss.

    One connect attempt retransmits lost handshake frames at a fast cadence
    (like SYN retransmission); only a whole failed attempt escalates the
    backoff."""

    HANDSHAKE_RETX_MS = 120.0
    HANDSHAKE_WINDOW_MS = 600.0

    def __init__(self, uav: "UavNode", topic_dst: Address, service_dst: Address) -> None:
        self.uav = uav
        self.cfg = uav.cfg
        self.sim = uav.sim
        self.state = PairState.DISCONNECTED
        self.terminal_error: Optional[str] = None
        self.topic_channel_id = f"{uav.node_id.label}/topic"
        self.service_channel_id = f"{uav.node_id.label}/service"
        self._handshake_ok: set[str] = set()
        self._backoff_ms = self.cfg.reconnect_backoff_base_ms
        self._attempt_timer = None
        self._attempt_started = 0.0
        self._connected_since: Optional[float] = None
        profile = uav.radio_profile
        self.topic_ep = ReliableEndpoint(
            self.sim,
            self.topic_channel_id,
            uav.topic_addr,
            uav.raw_send,
            lambda msg, seg: None,  # DPSL consumes topic data, not the UAV
            rto_ms=profile.retx_timeout_ms,
            retx_limit=profile.retx_limit,
            window=self.cfg.reliable_window,
        )
        self.service_ep = ReliableEndpoint(
            self.sim,
            self.service_channel_id,
            uav.service_addr,
            uav.raw_send,
            uav._on_service_delivery,
            rto_ms=profile.retx_timeout_ms,
            retx_limit=profile.retx_limit,
            window=4,
        )
        self.topic_ep.set_peer(topic_dst)
        self.service_ep.set_peer(service_dst)
        self.topic_dst = topic_dst
        self.service_dst = service_dst

    # --- state machine -------------------------------------------------------

    def begin(self) -> None:
        """Initial connect: no stale state to tear down, try immediately."""
        if self.state is not PairState.DISCONNECTED or self.terminal_error:
            return
        self.state = PairState.CONNECTING
        self._backoff_ms = self.cfg.reconnect_backoff_base_ms
        self._attempt()

    def path_down(self) -> None:
        """Current gateway path lost: pause transports, reconnect with backoff."""
        if self.terminal_error:
            return
        self.topic_ep.set_connected(False)
        self.service_ep.set_connected(False)
        self._handshake_ok.clear()
        self.state = PairState.CONNECTING
        self._connected_since = None
        self._cancel_attempt()
        self._backoff_ms = self.cfg.reconnect_backoff_base_ms
        self._attempt_timer = self.sim.after(self._backoff_ms, self._attempt)

    def _cancel_attempt(self) -> None:
        if self._attempt_timer is not None:
            self._attempt_timer.cancel()
            self._attempt_timer = None

    def _attempt(self) -> None:
        self._attempt_timer = None
        if self.state is not PairState.CONNECTING:
            return
        if self.uav.current_gateway() is None:
            self._retry_later()
            return
        self._attempt_started = self.sim.now
        self._handshake_tick()

    def _send_missing_identifies(self) -> None:
        for channel_id, local, dst, ep in (
            (self.topic_channel_id, self.uav.topic_addr, self.topic_dst, self.topic_ep),
            (self.service_channel_id, self.uav.service_addr, self.service_dst, self.service_ep),
        ):
            if channel_id in self._handshake_ok:
                continue
            ident = m.Identify(
                src=local,
                dst=dst,
                channel=channel_id,
                node=self.uav.node_id,
                role="topic" if ep is self.topic_ep else "service",
                resume_from=ep.next_seq,
            )
            self.uav.raw_send(ident, category="ctrl")

    def _handshake_tick(self) -> None:
        self._attempt_timer = None
        if self.state is not PairState.CONNECTING:
            return
        if self.sim.now - self._attempt_started >= self.HANDSHAKE_WINDOW_MS:
            self._retry_later()
            return
        self._send_missing_identifies()
        self._attempt_timer = self.sim.after(self.HANDSHAKE_RETX_MS, self._handshake_tick)

    def _retry_later(self) -> None:
        self._backoff_ms = min(self._backoff_ms * 2, self.cfg.reconnect_backoff_cap_ms)
        self._attempt_timer = self.sim.after(self._backoff_ms, self._attempt)

    def on_identify_ok(self, msg: m.IdentifyOk) -> None:
        if self.state is not PairState.CONNECTING:
            return
        self._handshake_ok.add(msg.channel)
        if {self.topic_channel_id, self.service_channel_id} <= self._handshake_ok:
            self._cancel_attempt()
            self.state = PairState.CONNECTED
            self._connected_since = self.sim.now
            self._backoff_ms = self.cfg.reconnect_backoff_base_ms
            self.topic_ep.set_connected(True)
            self.service_ep.set_connected(True)

    def on_identify_reject(self, msg: m.IdentifyReject) -> None:
        self.terminal_error = msg.reason
        self._cancel_attempt()
        self.state = PairState.DISCONNECTED
        self.topic_ep.set_connected(False)
        self.service_ep.set_connected(False)
        self.uav.note(f"handshake rejected: {msg.reason}")


class UavNode(MeshNode):
    def __init__(
        self,
        world: World,
        node_id: NodeId,
        radio_profile_name: str,
        gateways: tuple[NodeId, ...] = (),
        schedule: Optional[TopicSchedule] = None,
        dpsl_topic_addr: Optional[Address] = None,
        dpsl_service_addr: Optional[Address] = None,
        dpsl_data_addr: Optional[Address] = None,
        gcs_enabled: bool = True,
        uavcom_enabled: bool = True,
    ) -> None:
        host = f"10.0.0.{100 + node_id.index}"
        super().__init__(world, node_id, Address(host, 5000))
        self.radio_profile = world.profiles[radio_profile_name]
        self.topic_addr = Address(host, 5001)
        self.service_addr = Address(host, 5002)
        self.dgram_addr = Address(host, 5003)
        self.echo_addr = Address(host, 5004)
        self.gateways = tuple(gateways)
        self.schedule = schedule or default_schedule()
        self.state = FlightState(battery_voltage=self.cfg.battery_start_v)
        self.known_modes = {mode.value for mode in FlightMode}
        self.dpsl_topic_addr = dpsl_topic_addr
        self.dpsl_service_addr = dpsl_service_addr
        self.dpsl_data_addr = dpsl_data_addr
        self.gcs_enabled = gcs_enabled and dpsl_topic_addr is not None
        self.uavcom_enabled = uavcom_enabled
        self.pair: Optional[GcsChannelPair] = None
        if self.gcs_enabled:
            self.pair = GcsChannelPair(self, dpsl_topic_addr, dpsl_service_addr)
        # ECMP member health
        self._last_beacon: dict[NodeId, float] = {}
        self._current_gw: Optional[NodeId] = None
        self._pinned_gw: Optional[NodeId] = None
        self._better_since: dict[NodeId, float] = {}
        # topic publication
        self._seq: dict[str, int] = {}
        self._topic_stops: list[Callable[[], None]] = []
        self.emitted: dict[str, int] = {}
        self.topic_transport = "reliable"  # or "dgram"
        self._dseq = 0
        self.dgram_offered = 0
        self.dgram_unroutable = 0
        # echo probe stream
        self._echo_stop: Optional[Callable[[], None]] = None
        self._probe_id = 0
        self.echo_rtts: list[float] = []
        # uavcom
        self.peer_topics: dict[NodeId, tuple[str, ...]] = {}
        self.peer_messages: dict[tuple[str, str], int] = {}
        self.peer_last_seq: dict[tuple[str, str], int] = {}
        # service handling
        self._service_acks: dict[int, m.AckMessage] = {}
        self.services_handled = 0
        self.service_req_delays: list[float] = []  # one-way, wire to delivery
        # join synchronization with the gateway hub
        self._sync_done = False

    def addresses(self) -> list[Address]:
        return [self.address, self.topic_addr, self.service_addr, self.dgram_addr, self.echo_addr]

    # --- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        super().start()
        self.sim.every(self.cfg.autopilot_tick_ms, self._autopilot_tick, label=f"ap:{self.node_id}")
        self.sim.every(self.cfg.ecmp_eval_ms, self._ecmp_tick, label=f"ecmp:{self.node_id}")
        if self.uavcom_enabled:
            self.sim.every(self.cfg.uavcom_sync_ms, self._uavcom_tick, label=f"uavcom:{self.node_id}")
        for topic in sorted(self.schedule.frequencies_hz):
            period = 1000.0 / self.schedule.frequencies_hz[topic]
            stop = self.sim.every(
                period, lambda t=topic: self.publish_topic(t), start_ms=self.sim.now + period
            )
            self._topic_stops.append(stop)
        if self.pair is not None:
            self.sim.every(self.cfg.keepalive_ms, self._keepalive_tick)
        if self.announce_join and self.gateways:
            self.sim.after(200.0, self._join_sync_attempt)

    def _join_sync_attempt(self) -> None:
        if self._sync_done:
            return
        gw = self.gateways[0]
        target = self.world.nodes.get(gw)
        if target is not None:
            req = m.JoinSyncRequest(sender=self.node_id, target=gw, sent_at=self.sim.now_int())
            dgram = m.Datagram(
                src=self.dgram_addr, dst=target.address, flow="join/sync", dseq=self._dseq, inner=req
            )
            self._dseq += 1
            self.send_routed(dgram, category="ctrl")
        self.sim.after(self.cfg.uavcom_sync_ms, self._join_sync_attempt)

    # --- autopilot -------------------------------------------------------------

    def _autopilot_tick(self) -> None:
        self.state = autopilot_step(self.state, self.cfg.autopilot_tick_ms, self.cfg.battery_decay_v_per_min)
        self.state.check_invariants()

    def current_telemetry(self) -> m.Telemetry:
        position = enu_to_geodetic(self.world.mobility.position(self.node_id))
        yaw = self.world.mobility.heading_rad(self.node_id)
        orientation = (math.cos(yaw / 2.0), 0.0, 0.0, math.sin(yaw / 2.0))
        return m.Telemetry(
            position=position,
            orientation=orientation,
            battery_voltage=round(self.state.battery_voltage, 4),
            timestamp=self.sim.now_int(),
        )

    # --- services ---------------------------------------------------------------

    def handle_service(self, req: m.ServiceMessage) -> m.AckMessage:
        """Apply one command to the flight state and build the ack."""
        if req.request_id in self._service_acks:
            return self._service_acks[req.request_id]
        status = m.AckStatus.SUCCESS
        detail = ""
        kind = req.service_name
        if kind is m.ServiceKind.ARM_THROTTLE:
            if self.state.armed:
                status, detail = m.AckStatus.REJECTED, "already armed"
            else:
                self.state.armed = True
        elif kind is m.ServiceKind.SET_MODE:
            if req.args in self.known_modes:
                self.state.mode = FlightMode(req.args)
                if self.state.mode is FlightMode.LAND:
                    self.state.airborne = False
            else:
                status, detail = m.AckStatus.REJECTED, f"unknown mode {req.args!r}"
        elif kind is m.ServiceKind.TAKEOFF:
            if not self.state.armed:
                status, detail = m.AckStatus.REJECTED, "not armed"
            elif self.state.airborne:
                status, detail = m.AckStatus.REJECTED, "already airborne"
            else:
                self.state.airborne = True
        elif kind is m.ServiceKind.LAND:
            self.state.mode = FlightMode.LAND
            self.state.airborne = False
        else:  # pragma: no cover - enum is closed
            status, detail = m.AckStatus.REJECTED, "unsupported service"
        self.state.check_invariants()
        ack = m.AckMessage(
            request_id=req.request_id,
            status=status,
            completed_at=self.sim.now_int(),
            detail=detail,
        )
        self._service_acks[req.request_id] = ack
        self.services_handled += 1
        return ack

    def _on_service_delivery(self, msg: m.Message, seg: m.Segment) -> None:
        if not isinstance(msg, m.ServiceMessage):
            return
        if msg.target != self.node_id:
            return
        self.service_req_delays.append(self.sim.now - seg.tx_at)

        def complete() -> None:
            ack = self.handle_service(msg)
            ack = replace(ack, completed_at=self.sim.now_int())
            self._service_acks[msg.request_id] = ack
            if self.pair is not None:
                self.pair.service_ep.send(ack)

        # flight-controller round trip before the ack is available
        self.sim.after(self.cfg.service_proc_ms, complete)

    # --- topics -----------------------------------------------------------------

    def _next_seq(self, topic: str) -> int:
        seq = self._seq.get(topic, 0)
        self._seq[topic] = seq + 1
        return seq

    def build_topic_message(self, topic: str) -> m.TopicMessage:
        if topic == "telemetry/battery":
            payload: m.TopicPayload = m.DiagnosticText(f"voltage={self.state.battery_voltage:.3f}")
        else:
            payload = self.current_telemetry()
        return m.TopicMessage(
            topic_name=topic,
            publisher=self.node_id,
            seq=self._next_seq(topic),
            payload=payload,
            sent_at=self.sim.now_int(),
        )

    def publish_topic(self, topic: str, payload: Optional[m.TopicPayload] = None) -> m.TopicMessage:
        msg = self.build_topic_message(topic) if payload is None else m.TopicMessage(
            topic_name=topic,
            publisher=self.node_id,
            seq=self._next_seq(topic),
            payload=payload,
            sent_at=self.sim.now_int(),
        )
        self.emitted[topic] = self.emitted.get(topic, 0) + 1
        if self.pair is not None and self.topic_transport == "reliable":
            self.pair.topic_ep.send(msg)
        elif self.dpsl_data_addr is not None:
            self.send_datagram(self.dpsl_data_addr, f"{self.node_id.label}/dgram", msg)
        self._share_with_peers(msg)
        return msg

    def send_datagram(self, dst: Address, flow: str, inner: m.Message) -> bool:
        dgram = m.Datagram(src=self.dgram_addr, dst=dst, flow=flow, dseq=self._dseq, inner=inner)
        self._dseq += 1
        self.dgram_offered += 1
        ok = self.send_routed(dgram, category="data")
        if not ok:
            self.dgram_unroutable += 1
        return ok

    # --- uavcom (U2U sharing) ------------------------------------------------------

    def _uavcom_tick(self) -> None:
        peers = self._mesh_peers()
        advert = m.TopicAdvert(
            sender=self.node_id,
            topics=tuple(sorted(self.schedule.frequencies_hz)),
            sent_at=self.sim.now_int(),
        )
        for peer in peers:
            target = self.world.nodes.get(peer)
            if target is None:
                continue
            dgram = m.Datagram(
                src=self.dgram_addr,
                dst=target.address,
                flow="uavcom/advert",
                dseq=self._dseq,
                inner=advert,
            )
            self._dseq += 1
            self.send_routed(dgram, category="ctrl")

    def _mesh_peers(self) -> list[NodeId]:
        peers = {dest for dest in self.table.entries if dest.kind == self.node_id.kind}
        for link in self.emu.links_of(self.node_id):
            peer = link.peer_of(self.node_id)
            if peer.kind == self.node_id.kind and self.emu.is_live(link):
                peers.add(peer)
        return sorted(peers)

    def _share_with_peers(self, msg: m.TopicMessage) -> None:
        if not self.uavcom_enabled:
            return
        for peer in sorted(self.peer_topics):
            target = self.world.nodes.get(peer)
            if target is None or peer == self.node_id:
                continue
            dgram = m.Datagram(
                src=self.dgram_addr,
                dst=target.address,
                flow="uavcom/topic",
                dseq=self._dseq,
                inner=msg,
            )
            self._dseq += 1
            self.send_routed(dgram, category="data")

    # --- echo probe stream ------------------------------------------------------------

    def start_echo_stream(self, period_ms: float) -> None:
        if self.dpsl_data_addr is None:
            raise ValueError("echo stream needs a DPSL data address")

        def probe() -> None:
            req = m.EchoRequest(
                src=self.echo_addr,
                dst=self.dpsl_data_addr,
                probe_id=self._probe_id,
                sent_at=self.sim.now_int(),
            )
            self._probe_id += 1
            self.send_routed(req, category="data")

        self._echo_stop = self.sim.every(period_ms, probe, start_ms=self.sim.now + period_ms)

    # --- video stream (reliability experiment) -----------------------------------------

    def start_video_stream(self, fps: float, payload_bytes: int, width: int = 320, height: int = 240) -> None:
        self.video_sent: list[tuple[float, int, int]] = []  # (t, frame_no, payload bytes)
        frame_no = [0]

        def shoot() -> None:
            frame = m.VideoFrame(
                frame_no=frame_no[0], width=width, height=height, payload=b"\x00" * payload_bytes
            )
            frame_no[0] += 1
            self.video_sent.append((self.sim.now, frame.frame_no, payload_bytes))
            self.publish_topic("camera/image", frame)

        period = 1000.0 / fps
        self.sim.every(period, shoot, start_ms=self.sim.now + period)

    # --- ECMP / handover ------------------------------------------------------------

    def member_live(self, gw: NodeId) -> bool:
        """A member is live if its presence beacons are fresh, or if the
        mesh knows a genuine multi-hop route to it. A direct routing entry
        (next hop is the gateway itself) is only as fresh as the beacons,
        so it does not count as an independent liveness signal."""
        last = self._last_beacon.get(gw)
        if last is not None and self.sim.now - last <= self.cfg.path_down_after_ms:
            return True
        entry = self.table.entries.get(gw)
        return entry is not None and entry.next_hop != gw

    def live_gateways(self) -> list[NodeId]:
        return [g for g in self.gateways if self.member_live(g)]

    def current_gateway(self) -> Optional[NodeId]:
        return self._current_gw

    def default_gateway(self) -> Optional[NodeId]:
        return self._current_gw

    def _select_gateway(self, live: list[NodeId]) -> Optional[NodeId]:
        if not live:
            return None
        if self._pinned_gw in live:
            return self._pinned_gw
        flow_key = f"{self.node_id.label}|gcs"
        return rendezvous_select(flow_key, live)

    def _ecmp_tick(self) -> None:
        live = self.live_gateways()
        self._update_hysteresis(live)
        if self._current_gw is not None and self._current_gw not in live:
            self._current_gw = self._select_gateway(live)
            if self.pair is not None:
                self.pair.path_down()
        elif self._current_gw is None:
            self._current_gw = self._select_gateway(live)
            if self._current_gw is not None and self.pair is not None:
                if self.pair.state is PairState.DISCONNECTED:
                    self.pair.begin()
        elif self._pinned_gw is not None and self._pinned_gw in live and self._pinned_gw != self._current_gw:
            # hysteresis-driven switch: old path still up, make before break
            self._current_gw = self._pinned_gw
            if self.pair is not None:
                self.pair.path_down()

    def _update_hysteresis(self, live: list[NodeId]) -> None:
        current = self._current_gw
        if current is None or current not in live:
            self._better_since.clear()
            self._pinned_gw = None
            return
        cur_dist = self.world.mobility.distance_between(self.node_id, current)
        margin = 1.0 - self.cfg.hysteresis_margin
        for gw in live:
            if gw == current:
                continue
            dist = self.world.mobility.distance_between(self.node_id, gw)
            if dist < cur_dist * margin:
                since = self._better_since.setdefault(gw, self.sim.now)
                if self.sim.now - since >= self.cfg.hysteresis_dwell_ms:
                    self._pinned_gw = gw
            else:
                self._better_since.pop(gw, None)
                if self._pinned_gw == gw:
                    self._pinned_gw = None

    def _keepalive_tick(self) -> None:
        if self.pair is None or self.pair.state is not PairState.CONNECTED:
            return
        ka = m.Keepalive(
            src=self.topic_addr,
            dst=self.pair.topic_dst,
            channel=self.pair.topic_channel_id,
            sent_at=self.sim.now_int(),
        )
        self.raw_send(ka, category="ctrl")

    # --- frame handling ------------------------------------------------------------

    def raw_send(self, msg: m.Message, category: str = "data") -> bool:
        return self.send_routed(msg, category=category)

    def handle_local(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        if isinstance(msg, m.Segment):
            if self.pair is not None and msg.channel == self.pair.service_channel_id:
                self.pair.service_ep.on_segment(msg)
            return
        if isinstance(msg, m.SegmentAck):
            if self.pair is not None:
                if msg.channel == self.pair.topic_channel_id:
                    self.pair.topic_ep.on_ack(msg)
                elif msg.channel == self.pair.service_channel_id:
                    self.pair.service_ep.on_ack(msg)
            return
        if isinstance(msg, m.FloorUpdate):
            if self.pair is not None and msg.channel == self.pair.service_channel_id:
                self.pair.service_ep.on_floor_update(msg)
            return
        if isinstance(msg, m.IdentifyOk):
            if self.pair is not None:
                self.pair.on_identify_ok(msg)
            return
        if isinstance(msg, m.IdentifyReject):
            if self.pair is not None:
                self.pair.on_identify_reject(msg)
            return
        if isinstance(msg, m.EchoReply):
            self.echo_rtts.append(self.sim.now - msg.request_sent_at)
            return
        if isinstance(msg, m.Datagram):
            self._on_datagram(msg)
            return

    def _on_datagram(self, dgram: m.Datagram) -> None:
        inner = dgram.inner
        if dgram.flow == "join/sync" and isinstance(inner, m.JoinSyncReply):
            self._sync_done = True
            return
        if dgram.flow == "uavcom/advert" and isinstance(inner, m.TopicAdvert):
            self.peer_topics[inner.sender] = inner.topics
            return
        if dgram.flow == "uavcom/topic" and isinstance(inner, m.TopicMessage):
            key = (inner.publisher.label, inner.topic_name)
            last = self.peer_last_seq.get(key, -1)
            if inner.seq > last:
                self.peer_last_seq[key] = inner.seq
                self.peer_messages[key] = self.peer_messages.get(key, 0) + 1
            return

    def handle_mesh_extra(self, msg: m.Message, link: Link, sender: NodeId) -> None:
        if isinstance(msg, m.GatewayBeacon):
            self._last_beacon[msg.sender] = self.sim.now
