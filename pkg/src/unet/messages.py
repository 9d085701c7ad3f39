"""Message model: topic, service, and acknowledgment payloads plus the
transport and control frames that share the same wire format.

The middleware messages (TopicMessage, ServiceMessage, AckMessage) are the
application-visible union; Segment/Datagram/ack frames carry them between
nodes, and the hello/join/beacon frames are the routing control plane.
Everything here is a plain value type, safe to share across contexts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .errors import InvalidMessage
from .ids import Address, NodeId

QUAT_NORM_TOL = 1e-6


class ServiceKind(str, Enum):
    ARM_THROTTLE = "ARM_THROTTLE"
    SET_MODE = "SET_MODE"
    TAKEOFF = "TAKEOFF"
    LAND = "LAND"


class AckStatus(str, Enum):
    SUCCESS = "SUCCESS"
    REJECTED = "REJECTED"
    TIMEOUT = "TIMEOUT"


@dataclass(frozen=True)
class Telemetry:
    """Autopilot state sample: global position, attitude, battery."""

    position: tuple[float, float, float]  # latitude deg, longitude deg, altitude m
    orientation: tuple[float, float, float, float]  # quaternion w, x, y, z
    battery_voltage: float
    timestamp: int  # ms since scenario start

    def validate(self) -> None:
        norm = math.sqrt(sum(c * c for c in self.orientation))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise InvalidMessage(f"quaternion norm {norm!r} not within {QUAT_NORM_TOL} of 1")
        if self.position[2] < 0:
            raise InvalidMessage(f"altitude must be >= 0, got {self.position[2]!r}")
        if self.battery_voltage < 0:
            raise InvalidMessage("battery voltage must be >= 0")


@dataclass(frozen=True)
class DiagnosticText:
    """Free-form diagnostic line published on a diagnostics topic."""

    text: str

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class VideoFrame:
    """Synthetic camera frame; frame_no gaps at the receiver count as loss."""

    frame_no: int
    width: int
    height: int
    payload: bytes

    @property
    def payload_len(self) -> int:
        return len(self.payload)

    def validate(self) -> None:
        if self.frame_no < 0:
            raise InvalidMessage("frame_no must be non-negative")
        if self.width <= 0 or self.height <= 0:
            raise InvalidMessage("frame dimensions must be positive")


TopicPayload = Union[Telemetry, DiagnosticText, VideoFrame]


@dataclass(frozen=True)
class TopicMessage:
    """Published sensor/battery/diagnostic/video sample on a named topic."""

    topic_name: str
    publisher: NodeId
    seq: int
    payload: TopicPayload
    sent_at: int  # ms

    def validate(self) -> None:
        if self.seq < 0:
            raise InvalidMessage("topic seq must be non-negative")
        if not self.topic_name:
            raise InvalidMessage("topic_name must be non-empty")
        self.payload.validate()


@dataclass(frozen=True)
class ServiceMessage:
    """Command request addressed to one UAV (arm, mode change, takeoff, land)."""

    service_name: ServiceKind
    target: NodeId
    request_id: int
    args: Optional[str]
    issued_at: int  # ms

    def validate(self) -> None:
        if self.target.kind.value != "uav":
            raise InvalidMessage(f"service target must be a UAV, got {self.target}")
        if self.request_id < 0:
            raise InvalidMessage("request_id must be non-negative")


@dataclass(frozen=True)
class AckMessage:
    """Completion notice for one ServiceMessage."""

    request_id: int
    status: AckStatus
    completed_at: int  # ms
    detail: str = ""

    def validate(self) -> None:
        if self.request_id < 0:
            raise InvalidMessage("request_id must be non-negative")


# --- mesh control plane ----------------------------------------------------


@dataclass(frozen=True)
class HelloBeacon:
    """Periodic distance-vector beacon: neighbor set plus table digest."""

    sender: NodeId
    neighbor_set: tuple[NodeId, ...]
    table_digest: tuple[tuple[NodeId, int], ...]  # (destination, metric)
    sent_at: int

    def validate(self) -> None:
        if self.sender in self.neighbor_set:
            raise InvalidMessage("sender must not appear in its own neighbor_set")


@dataclass(frozen=True)
class JoinAnnounce:
    """One-shot flood sent by a node joining the mesh."""

    sender: NodeId
    ttl: int
    sent_at: int

    def validate(self) -> None:
        if self.ttl < 0:
            raise InvalidMessage("ttl must be non-negative")


@dataclass(frozen=True)
class JoinSyncRequest:
    """Joining node asks a sync hub for full fleet state."""

    sender: NodeId
    target: NodeId
    sent_at: int

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class JoinSyncReply:
    """Full-state sync blob returned to a joining node; size grows with roster."""

    sender: NodeId
    target: NodeId
    roster: tuple[NodeId, ...]
    state_blob: bytes
    sent_at: int

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class TopicAdvert:
    """UAV-to-UAV advertisement of locally published topics."""

    sender: NodeId
    topics: tuple[str, ...]
    sent_at: int

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class GatewayBeacon:
    """Gateway presence beacon; silence drives ECMP member liveness."""

    sender: NodeId
    sent_at: int

    def validate(self) -> None:
        pass


# --- transport frames -------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """Reliable-channel data frame wrapping one middleware message.

    floor is the lowest channel seq the sender still retransmits; receivers
    release in-order delivery past abandoned gaps when floor advances.
    """

    src: Address
    dst: Address
    channel: str
    cseq: int
    floor: int
    tx_at: float  # first wire transmission time; retries keep the original
    inner: "Message"

    def validate(self) -> None:
        if self.cseq < 0 or self.floor < 0:
            raise InvalidMessage("segment seq fields must be non-negative")
        self.inner.validate()


@dataclass(frozen=True)
class SegmentAck:
    """Per-segment acknowledgment on the reverse path."""

    src: Address
    dst: Address
    channel: str
    cseq: int

    def validate(self) -> None:
        if self.cseq < 0:
            raise InvalidMessage("cseq must be non-negative")


@dataclass(frozen=True)
class FloorUpdate:
    """Bare floor advance sent when a sender abandons its last outstanding
    segment and has no data frame to carry the new floor."""

    src: Address
    dst: Address
    channel: str
    floor: int

    def validate(self) -> None:
        if self.floor < 0:
            raise InvalidMessage("floor must be non-negative")


@dataclass(frozen=True)
class Datagram:
    """Unreliable, fire-and-forget frame wrapping one middleware message."""

    src: Address
    dst: Address
    flow: str
    dseq: int
    inner: "Message"

    def validate(self) -> None:
        if self.dseq < 0:
            raise InvalidMessage("dseq must be non-negative")
        self.inner.validate()


@dataclass(frozen=True)
class Identify:
    """Channel handshake: node presents itself on a fresh channel pair."""

    src: Address
    dst: Address
    channel: str
    node: NodeId
    role: str  # "topic" | "service"
    resume_from: int  # next cseq the sender will use

    def validate(self) -> None:
        if self.role not in ("topic", "service"):
            raise InvalidMessage(f"unknown channel role {self.role!r}")


@dataclass(frozen=True)
class IdentifyOk:
    src: Address
    dst: Address
    channel: str
    node: NodeId

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class IdentifyReject:
    src: Address
    dst: Address
    channel: str
    reason: str

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class Keepalive:
    src: Address
    dst: Address
    channel: str
    sent_at: int

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class EchoRequest:
    src: Address
    dst: Address
    probe_id: int
    sent_at: int

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class EchoReply:
    src: Address
    dst: Address
    probe_id: int
    request_sent_at: int
    sent_at: int

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class BulkPayload:
    """Opaque byte blob used by throughput experiments."""

    stream_id: str
    chunk_no: int
    payload: bytes = field(repr=False)

    def validate(self) -> None:
        if self.chunk_no < 0:
            raise InvalidMessage("chunk_no must be non-negative")


Message = Union[
    TopicMessage,
    ServiceMessage,
    AckMessage,
    HelloBeacon,
    JoinAnnounce,
    JoinSyncRequest,
    JoinSyncReply,
    TopicAdvert,
    GatewayBeacon,
    Segment,
    SegmentAck,
    FloorUpdate,
    Datagram,
    Identify,
    IdentifyOk,
    IdentifyReject,
    Keepalive,
    EchoRequest,
    EchoReply,
    BulkPayload,
]

MIDDLEWARE_KINDS = (TopicMessage, ServiceMessage, AckMessage)
CONTROL_KINDS = (
    HelloBeacon,
    JoinAnnounce,
    JoinSyncRequest,
    JoinSyncReply,
    TopicAdvert,
    GatewayBeacon,
    Keepalive,
    Identify,
    IdentifyOk,
    IdentifyReject,
)


def is_control(msg: Message) -> bool:
    """True for routing/liveness/handshake frames, False for data-bearing ones."""
    if isinstance(msg, CONTROL_KINDS):
        return True
    if isinstance(msg, SegmentAck):
        return True
    return False
