"""Socket mode: every node is an independent thread, channel pairs run over
real local TCP streams through per-link shaping relays, and UI clients
attach to a WebSocket bridge.

This mode exists for live demos against the web GCS. Metrics acceptance
runs only against the deterministic event loop; links here shape rate and
latency but rely on TCP for reliability, and the topology is a star
(UAV -> shaping relay -> service layer).
"""
from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import bridge
from . import messages as m
from . import wire, wsproto
from .dpsl import TopicStore
from .errors import ConfigError
from .ids import Address, NodeId
from .mobility import Mobility, WaypointPath, enu_to_geodetic
from .profiles import LinkProfile, calibrated_profiles, profiles_from_mapping
from .uav import FlightMode, FlightState


def _now_ms(t0: float) -> int:
    return int((time.monotonic() - t0) * 1000)


class ShapingRelay(threading.Thread):
    """Accepts one inbound stream and pumps frames to the target address
    with serialization and latency shaping from a link profile."""

    def __init__(self, profile: LinkProfile, target: tuple[str, int], rate: float = 1.0) -> None:
        super().__init__(daemon=True)
        self.profile = profile
        self.target = target
        self.rate = rate
        self.listener = socket.create_server(("127.0.0.1", 0))
        self.port = self.listener.getsockname()[1]
        self._stop = threading.Event()

    def run(self) -> None:
        self.listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self.listener.accept()
            except (socket.timeout, OSError):
                continue
            upstream = socket.create_connection(self.target)
            threading.Thread(target=self._pump, args=(conn, upstream), daemon=True).start()
            threading.Thread(target=self._pump, args=(upstream, conn), daemon=True).start()

    def _pump(self, src: socket.socket, dst: socket.socket) -> None:
        try:
            while not self._stop.is_set():
                data = src.recv(65536)
                if not data:
                    break
                delay = (self.profile.base_latency_ms + self.profile.serialization_ms(len(data))) / 1000.0
                time.sleep(delay / max(self.rate, 1e-6))
                dst.sendall(data)
        except OSError:
            pass
        finally:
            for s in (src, dst):
                try:
                    s.close()
                except OSError:
                    pass

    def stop(self) -> None:
        self._stop.set()
        try:
            self.listener.close()
        except OSError:
            pass


@dataclass
class LiveRegistration:
    node: NodeId
    topic_conn: Optional[socket.socket] = None
    service_conn: Optional[socket.socket] = None
    last_heard: float = field(default_factory=time.monotonic)

    def online(self) -> bool:
        return (
            self.topic_conn is not None
            and self.service_conn is not None
            and time.monotonic() - self.last_heard < 3.0
        )


class LiveDpsl(threading.Thread):
    """Channel listener plus WebSocket bridge, all real sockets."""

    def __init__(self, bridge_port: int = 9090, uav_port: int = 0) -> None:
        super().__init__(daemon=True)
        self.uav_listener = socket.create_server(("127.0.0.1", uav_port))
        self.uav_port = self.uav_listener.getsockname()[1]
        self.bridge_listener = socket.create_server(("127.0.0.1", bridge_port))
        self.bridge_port = self.bridge_listener.getsockname()[1]
        self.store = TopicStore()
        self.registrations: dict[str, LiveRegistration] = {}
        self.sessions: dict[int, tuple[socket.socket, set[tuple[str, str]]]] = {}
        self._session_seq = 0
        self._pending: dict[int, tuple[int, str, str, float]] = {}  # request -> (session, uav, service, t)
        self._request_seq = 0
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self.t0 = time.monotonic()

    # --- UAV side -------------------------------------------------------

    def run(self) -> None:
        threading.Thread(target=self._accept_bridge, daemon=True).start()
        threading.Thread(target=self._roster_loop, daemon=True).start()
        self.uav_listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self.uav_listener.accept()
            except (socket.timeout, OSError):
                continue
            threading.Thread(target=self._serve_channel, args=(conn,), daemon=True).start()

    def _serve_channel(self, conn: socket.socket) -> None:
        decoder = wire.FrameDecoder()
        reg: Optional[LiveRegistration] = None
        role = ""
        try:
            while not self._stop.is_set():
                data = conn.recv(65536)
                if not data:
                    break
                for msg in decoder.feed(data):
                    if isinstance(msg, m.Identify):
                        role = msg.role
                        with self._lock:
                            reg = self.registrations.setdefault(
                                msg.node.label, LiveRegistration(node=msg.node)
                            )
                            if role == "topic":
                                reg.topic_conn = conn
                            else:
                                reg.service_conn = conn
                            reg.last_heard = time.monotonic()
                        conn.sendall(
                            wire.encode(
                                m.IdentifyOk(src=msg.dst, dst=msg.src, channel=msg.channel, node=msg.node)
                            )
                        )
                    elif isinstance(msg, m.TopicMessage) and reg is not None:
                        reg.last_heard = time.monotonic()
                        self.store.ingest(msg)
                        self._fan_out(msg)
                    elif isinstance(msg, m.AckMessage):
                        self._relay_ack(msg)
                    elif isinstance(msg, m.Keepalive) and reg is not None:
                        reg.last_heard = time.monotonic()
        except OSError:
            pass
        finally:
            with self._lock:
                if reg is not None:
                    if role == "topic" and reg.topic_conn is conn:
                        reg.topic_conn = None
                    if role == "service" and reg.service_conn is conn:
                        reg.service_conn = None

    # --- bridge side -----------------------------------------------------

    def _accept_bridge(self) -> None:
        self.bridge_listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self.bridge_listener.accept()
            except (socket.timeout, OSError):
                continue
            threading.Thread(target=self._serve_bridge, args=(conn,), daemon=True).start()

    def _serve_bridge(self, conn: socket.socket) -> None:
        try:
            wsproto.server_handshake(conn)
        except wsproto.WsError:
            conn.close()
            return
        with self._lock:
            self._session_seq += 1
            session_id = self._session_seq
            self.sessions[session_id] = (conn, set())
        self._send_session(session_id, bridge.roster_op(self._roster_rows()))
        try:
            while not self._stop.is_set():
                text = wsproto.recv_message(conn)
                if text is None:
                    break
                try:
                    op = bridge.validate_client_op(json.loads(text))
                except (json.JSONDecodeError, bridge.BridgeProtocolError):
                    continue  # malformed client op: ignore, session survives
                self._handle_op(session_id, op)
        except (wsproto.WsError, OSError):
            pass
        finally:
            with self._lock:
                self.sessions.pop(session_id, None)

    def _handle_op(self, session_id: int, op: dict) -> None:
        kind = op["op"]
        if kind == "subscribe":
            with self._lock:
                self.sessions[session_id][1].add((op["uav"], op["topic"]))
            return
        if kind == "unsubscribe":
            with self._lock:
                self.sessions[session_id][1].discard((op["uav"], op["topic"]))
            return
        if kind == "call_service":
            self._call_service(session_id, op)

    def _call_service(self, session_id: int, op: dict) -> None:
        uav_label = op["uav"]
        tag = op.get("tag", "")
        with self._lock:
            reg = self.registrations.get(uav_label)
            conn = reg.service_conn if reg else None
        if reg is None or conn is None or not reg.online():
            self._send_session(
                session_id,
                bridge.service_ack_op(-1, tag, uav_label, op["service"], "REJECTED", "target offline", 0.0),
            )
            return
        with self._lock:
            self._request_seq += 1
            request_id = self._request_seq
            self._pending[request_id] = (session_id, uav_label, op["service"], time.monotonic())
        req = m.ServiceMessage(
            service_name=m.ServiceKind(op["service"]),
            target=reg.node,
            request_id=request_id,
            args=op.get("args"),
            issued_at=_now_ms(self.t0),
        )
        try:
            conn.sendall(wire.encode(req))
        except OSError:
            pass
        threading.Timer(5.0, self._deadline, args=(request_id,)).start()

    def _deadline(self, request_id: int) -> None:
        with self._lock:
            call = self._pending.pop(request_id, None)
        if call is None:
            return
        session_id, uav_label, service, t_issue = call
        rtt = (time.monotonic() - t_issue) * 1000.0
        self._send_session(session_id, bridge.service_ack_op(request_id, "", uav_label, service, "TIMEOUT", "deadline expired", rtt))

    def _relay_ack(self, ack: m.AckMessage) -> None:
        with self._lock:
            call = self._pending.pop(ack.request_id, None)
        if call is None:
            return
        session_id, uav_label, service, t_issue = call
        rtt = (time.monotonic() - t_issue) * 1000.0
        self._send_session(
            session_id,
            bridge.service_ack_op(ack.request_id, "", uav_label, service, ack.status.value, ack.detail, rtt),
        )

    def _fan_out(self, msg: m.TopicMessage) -> None:
        op = bridge.topic_op(
            msg.publisher.label, msg.topic_name, msg.seq, wire.to_jsonable(msg.payload), msg.sent_at
        )
        text = json.dumps(op, sort_keys=True)
        with self._lock:
            targets = [
                (sid, conn)
                for sid, (conn, subs) in self.sessions.items()
                if any(bridge.matches(u, t, msg.publisher.label, msg.topic_name) for u, t in subs)
            ]
        for sid, conn in targets:
            try:
                wsproto.send_text(conn, text)
            except OSError:
                pass

    def _roster_rows(self) -> list[dict]:
        with self._lock:
            return [
                {"uav": label, "online": reg.online(), "last_seen_ms": _now_ms(self.t0)}
                for label, reg in sorted(self.registrations.items())
            ]

    def _roster_loop(self) -> None:
        last = None
        while not self._stop.is_set():
            rows = self._roster_rows()
            snapshot = json.dumps(rows, sort_keys=True)
            if snapshot != last:
                last = snapshot
                text = json.dumps(bridge.roster_op(rows), sort_keys=True)
                with self._lock:
                    conns = [conn for conn, _ in self.sessions.values()]
                for conn in conns:
                    try:
                        wsproto.send_text(conn, text)
                    except OSError:
                        pass
            time.sleep(0.25)

    def _send_session(self, session_id: int, op: dict) -> None:
        with self._lock:
            entry = self.sessions.get(session_id)
        if entry is None:
            return
        try:
            wsproto.send_text(entry[0], json.dumps(op, sort_keys=True))
        except OSError:
            pass

    def stop(self) -> None:
        self._stop.set()
        for listener in (self.uav_listener, self.bridge_listener):
            try:
                listener.close()
            except OSError:
                pass


class LiveUav(threading.Thread):
    """Independent UAV task: autopilot loop over wall clock, topic stream
    and service handling over two TCP channels through the shaping relay."""

    def __init__(
        self,
        node: NodeId,
        relay_port: int,
        topics: dict[str, float],
        mobility: Mobility,
        rate: float = 1.0,
    ) -> None:
        super().__init__(daemon=True)
        self.node = node
        self.relay_port = relay_port
        self.topics = topics
        self.mobility = mobility
        self.rate = rate
        self.state = FlightState()
        self._stop = threading.Event()
        self.t0 = time.monotonic()
        self._seq: dict[str, int] = {}

    def run(self) -> None:
        local = Address(f"10.0.0.{100 + self.node.index}", 5001)
        dpsl_addr = Address("127.0.0.1", self.relay_port)
        topic_conn = socket.create_connection(("127.0.0.1", self.relay_port))
        service_conn = socket.create_connection(("127.0.0.1", self.relay_port))
        for conn, role in ((topic_conn, "topic"), (service_conn, "service")):
            ident = m.Identify(
                src=local, dst=dpsl_addr, channel=f"{self.node.label}/{role}",
                node=self.node, role=role, resume_from=0,
            )
            conn.sendall(wire.encode(ident))
        threading.Thread(target=self._serve_services, args=(service_conn,), daemon=True).start()
        next_pub = {topic: time.monotonic() for topic in self.topics}
        while not self._stop.is_set():
            now = time.monotonic()
            self.mobility.step(20.0 * self.rate)
            for topic, hz in self.topics.items():
                if now >= next_pub[topic]:
                    next_pub[topic] = now + 1.0 / (hz * self.rate)
                    try:
                        topic_conn.sendall(wire.encode(self._sample(topic), mtu_budget=None))
                    except OSError:
                        return
            time.sleep(0.02)

    def _sample(self, topic: str) -> m.TopicMessage:
        seq = self._seq.get(topic, 0)
        self._seq[topic] = seq + 1
        if topic == "telemetry/battery":
            payload: m.TopicPayload = m.DiagnosticText(f"voltage={12.6 - 0.001 * seq:.3f}")
        else:
            payload = m.Telemetry(
                position=enu_to_geodetic(self.mobility.position(self.node)),
                orientation=(1.0, 0.0, 0.0, 0.0),
                battery_voltage=12.6,
                timestamp=_now_ms(self.t0),
            )
        return m.TopicMessage(
            topic_name=topic, publisher=self.node, seq=seq, payload=payload, sent_at=_now_ms(self.t0)
        )

    def _serve_services(self, conn: socket.socket) -> None:
        decoder = wire.FrameDecoder()
        try:
            while not self._stop.is_set():
                data = conn.recv(65536)
                if not data:
                    return
                for msg in decoder.feed(data):
                    if not isinstance(msg, m.ServiceMessage):
                        continue
                    ack = self._apply(msg)
                    conn.sendall(wire.encode(ack))
        except OSError:
            pass

    def _apply(self, req: m.ServiceMessage) -> m.AckMessage:
        status, detail = m.AckStatus.SUCCESS, ""
        if req.service_name is m.ServiceKind.ARM_THROTTLE:
            if self.state.armed:
                status, detail = m.AckStatus.REJECTED, "already armed"
            else:
                self.state.armed = True
        elif req.service_name is m.ServiceKind.SET_MODE:
            try:
                self.state.mode = FlightMode(req.args)
            except ValueError:
                status, detail = m.AckStatus.REJECTED, f"unknown mode {req.args!r}"
        elif req.service_name is m.ServiceKind.TAKEOFF:
            if self.state.armed:
                self.state.airborne = True
            else:
                status, detail = m.AckStatus.REJECTED, "not armed"
        elif req.service_name is m.ServiceKind.LAND:
            self.state.airborne = False
            self.state.mode = FlightMode.LAND
        return m.AckMessage(request_id=req.request_id, status=status, completed_at=_now_ms(self.t0), detail=detail)

    def stop(self) -> None:
        self._stop.set()


class LiveWorld:
    """Assembled socket-mode deployment for one scenario file."""

    def __init__(
        self, scenario_path: str, bridge_port: int = 0, uav_port: int = 0, rate: float = 1.0
    ) -> None:
        doc = yaml.safe_load(open(scenario_path, encoding="utf-8"))
        if not isinstance(doc, dict) or "uavs" not in doc:
            raise ConfigError(f"{scenario_path}: not a scenario file")
        profiles = calibrated_profiles()
        if doc.get("profiles"):
            profiles = profiles_from_mapping(doc["profiles"], base=profiles)
        self.dpsl = LiveDpsl(bridge_port=bridge_port, uav_port=uav_port)
        self.dpsl.start()
        self.mobility = Mobility()
        self.relays: list[ShapingRelay] = []
        self.uavs: list[LiveUav] = []
        for uav_doc in doc["uavs"]:
            profile = profiles[uav_doc["profile"]]
            node = NodeId.parse(f"uav:{uav_doc['index']}")
            self.mobility.place(node, tuple(float(c) for c in uav_doc["position"]))
            if "waypoints" in uav_doc:
                self.mobility.set_path(
                    node,
                    WaypointPath(
                        [tuple(float(c) for c in wp) for wp in uav_doc["waypoints"]],
                        float(uav_doc.get("speed_mps", 5.0)),
                        shuttle=bool(uav_doc.get("shuttle", False)),
                    ),
                )
            relay = ShapingRelay(profile, ("127.0.0.1", self.dpsl.uav_port), rate=rate)
            relay.start()
            self.relays.append(relay)
            topics = uav_doc.get("topics") or {"telemetry/pose": 3.0, "telemetry/battery": 3.0}
            worker = LiveUav(node, relay.port, {k: float(v) for k, v in topics.items()}, self.mobility, rate)
            self.uavs.append(worker)
            worker.start()

    @property
    def bridge_port(self) -> int:
        return self.dpsl.bridge_port

    def stop(self) -> None:
        for worker in self.uavs:
            worker.stop()
        for relay in self.relays:
            relay.stop()
        self.dpsl.stop()


def serve_scenario(
    scenario_path: str, bridge_port: int = 9090, uav_port: int = 0, rate: float = 1.0
) -> None:
    world = LiveWorld(scenario_path, bridge_port=bridge_port, uav_port=uav_port, rate=rate)
    print(f"bridge: ws://127.0.0.1:{world.bridge_port}/  (Ctrl-C to stop)")
    print(f"uav channel listener: 127.0.0.1:{world.dpsl.uav_port}")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        world.stop()
