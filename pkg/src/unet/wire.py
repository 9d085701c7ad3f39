"""Bit-exact wire encoding shared by every inter-node channel.

Frame layout: 4-byte big-endian length (covering the rest of the frame),
1-byte message-kind tag, then a canonical key-ordered JSON payload encoded
as UTF-8. Encoding is deterministic: the same message always produces the
same bytes, so captures diff cleanly and seeded runs replay bit-identically.
"""
from __future__ import annotations

import base64
import dataclasses
import json
import struct
import typing
from enum import Enum
from typing import Any, Iterator, Optional

from . import messages as m
from .errors import DecodeError, EncodeError, InvalidMessage, NeedMoreBytes
from .ids import Address, NodeId

DEFAULT_MTU_BUDGET = 64 * 1024

_LEN = struct.Struct(">I")

_TAGS: dict[type, int] = {
    m.TopicMessage: 1,
    m.ServiceMessage: 2,
    m.AckMessage: 3,
    m.Telemetry: 4,
    m.DiagnosticText: 5,
    m.VideoFrame: 6,
    m.HelloBeacon: 10,
    m.JoinAnnounce: 11,
    m.JoinSyncRequest: 12,
    m.JoinSyncReply: 13,
    m.TopicAdvert: 14,
    m.GatewayBeacon: 15,
    m.Segment: 20,
    m.SegmentAck: 21,
    m.Datagram: 22,
    m.FloorUpdate: 29,
    m.Identify: 23,
    m.IdentifyOk: 24,
    m.IdentifyReject: 25,
    m.Keepalive: 26,
    m.EchoRequest: 27,
    m.EchoReply: 28,
    m.BulkPayload: 30,
}
_CLASSES = {tag: cls for cls, tag in _TAGS.items()}


def kind_tag(msg: m.Message) -> int:
    try:
        return _TAGS[type(msg)]
    except KeyError:
        raise EncodeError(f"unregistered message type {type(msg).__name__}") from None


def kind_name(tag: int) -> str:
    cls = _CLASSES.get(tag)
    return cls.__name__ if cls else f"unknown({tag})"


def to_jsonable(value: Any) -> Any:
    """Public JSON-able view of a message or payload (used by the bridge)."""
    return _to_jsonable(value)


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, (NodeId, Address)):
        return value.label
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bytes):
        return base64.b64encode(value).decode("ascii")
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if dataclasses.is_dataclass(value) and type(value) in _TAGS:
        obj = {"k": _TAGS[type(value)]}
        for f in dataclasses.fields(value):
            obj[f.name] = _to_jsonable(getattr(value, f.name))
        return obj
    if isinstance(value, (int, float, str, bool)) or value is None:
        return value
    raise EncodeError(f"cannot encode value of type {type(value).__name__}")


def _from_annotation(ann: Any, value: Any) -> Any:
    origin = typing.get_origin(ann)
    if origin is typing.Union:
        args = typing.get_args(ann)
        if type(None) in args:
            if value is None:
                return None
            rest = [a for a in args if a is not type(None)]
            if len(rest) == 1:
                return _from_annotation(rest[0], value)
        # union of message classes: dispatch on the nested kind tag
        return _obj_to_message(value)
    if origin in (tuple, list):
        args = typing.get_args(ann)
        if not isinstance(value, list):
            raise DecodeError(f"expected list for {ann}, got {type(value).__name__}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_from_annotation(args[0], v) for v in value)
        if len(args) != len(value):
            raise DecodeError(f"expected {len(args)} elements, got {len(value)}")
        return tuple(_from_annotation(a, v) for a, v in zip(args, value))
    if ann is NodeId:
        return NodeId.parse(value)
    if ann is Address:
        return Address.parse(value)
    if isinstance(ann, type) and issubclass(ann, Enum):
        return ann(value)
    if ann is bytes:
        return base64.b64decode(value.encode("ascii"))
    if ann is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise DecodeError(f"expected number, got {type(value).__name__}")
        return float(value)
    if ann is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise DecodeError(f"expected int, got {type(value).__name__}")
        return value
    if ann is str:
        if not isinstance(value, str):
            raise DecodeError(f"expected str, got {type(value).__name__}")
        return value
    if ann is bool:
        if not isinstance(value, bool):
            raise DecodeError(f"expected bool, got {type(value).__name__}")
        return value
    if isinstance(ann, type) and ann in _TAGS:
        return _obj_to_message(value, expect=ann)
    raise DecodeError(f"unsupported annotation {ann!r}")


def _obj_to_message(obj: Any, expect: Optional[type] = None) -> m.Message:
    if not isinstance(obj, dict) or "k" not in obj:
        raise DecodeError("nested message must be an object with a kind tag")
    cls = _CLASSES.get(obj["k"])
    if cls is None:
        raise DecodeError(f"unknown nested kind tag {obj['k']!r}")
    if expect is not None and cls is not expect:
        raise DecodeError(f"expected nested {expect.__name__}, got {cls.__name__}")
    return _build(cls, obj)


_FIELD_PLANS: dict[type, list[tuple[str, Any]]] = {}


def _field_plan(cls: type) -> list[tuple[str, Any]]:
    plan = _FIELD_PLANS.get(cls)
    if plan is None:
        hints = typing.get_type_hints(cls)
        plan = [(f.name, hints[f.name]) for f in dataclasses.fields(cls)]
        _FIELD_PLANS[cls] = plan
    return plan


def _build(cls: type, obj: dict) -> m.Message:
    kwargs = {}
    for name, ann in _field_plan(cls):
        if name not in obj:
            raise DecodeError(f"{cls.__name__}: missing field {name!r}")
        kwargs[name] = _from_annotation(ann, obj[name])
    return cls(**kwargs)


def encode(msg: m.Message, mtu_budget: Optional[int] = DEFAULT_MTU_BUDGET) -> bytes:
    """Serialize one message to a self-delimiting frame.

    Raises EncodeError when the frame exceeds the MTU budget; pass
    mtu_budget=None for links that shape purely by byte count.
    """
    msg.validate()
    tag = kind_tag(msg)
    obj = {f.name: _to_jsonable(getattr(msg, f.name)) for f in dataclasses.fields(msg)}
    body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    frame = _LEN.pack(1 + len(body)) + bytes([tag]) + body
    if mtu_budget is not None and len(frame) > mtu_budget:
        raise EncodeError(f"frame of {len(frame)} bytes exceeds MTU budget {mtu_budget}")
    return frame


def decode_prefix(data: bytes) -> tuple[m.Message, int]:
    """Decode the first frame in data; returns (message, bytes consumed)."""
    if len(data) < _LEN.size:
        raise NeedMoreBytes(f"need 4 header bytes, have {len(data)}")
    (length,) = _LEN.unpack_from(data)
    if length < 1:
        raise DecodeError("frame length must cover at least the kind tag")
    end = _LEN.size + length
    if len(data) < end:
        raise NeedMoreBytes(f"need {end} bytes, have {len(data)}")
    tag = data[_LEN.size]
    cls = _CLASSES.get(tag)
    if cls is None:
        raise DecodeError(f"unknown kind tag 0x{tag:02X}")
    try:
        obj = json.loads(data[_LEN.size + 1 : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"payload is not canonical JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise DecodeError("payload must be a JSON object")
    msg = _build(cls, obj)
    try:
        msg.validate()
    except InvalidMessage:
        raise
    return msg, end


def decode(data: bytes) -> m.Message:
    """Decode exactly one frame; trailing bytes are an error."""
    msg, consumed = decode_prefix(data)
    if consumed != len(data):
        raise DecodeError(f"{len(data) - consumed} trailing bytes after frame")
    return msg


def iter_frames(data: bytes) -> Iterator[m.Message]:
    """Decode a concatenated-frame capture buffer."""
    offset = 0
    while offset < len(data):
        msg, consumed = decode_prefix(data[offset:])
        yield msg
        offset += consumed


class FrameDecoder:
    """Incremental decoder for stream transports."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[m.Message]:
        self._buf.extend(data)
        out = []
        while True:
            try:
                msg, consumed = decode_prefix(bytes(self._buf))
            except NeedMoreBytes:
                break
            del self._buf[:consumed]
            out.append(msg)
        return out

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
