"""Bridge wire protocol between the service layer and UI clients.

Message-oriented JSON objects over a duplex transport (in-process sessions
in deterministic mode, a WebSocket in socket mode). Field `op` selects the
operation; the full schema is documented in the README.

Client -> server:
    {"op": "subscribe",   "uav": "<label>|*", "topic": "<name>|*"}
    {"op": "unsubscribe", "uav": "<label>|*", "topic": "<name>|*"}
    {"op": "call_service", "uav": "<label>", "service": "<ServiceKind>",
     "args": "<mode or null>", "tag": "<client correlation id>"}

Server -> client:
    {"op": "roster", "uavs": [{"uav", "online", "last_seen_ms"}...]}
    {"op": "publish_snapshot", "uav", "topic", "messages": [topic objects]}
    {"op": "topic", "uav", "topic", "seq", "payload", "sent_at"}
    {"op": "service_ack", "request_id", "tag", "uav", "service",
     "status", "detail", "rtt_ms"}
"""
from __future__ import annotations

from typing import Any

OPS_FROM_CLIENT = ("subscribe", "unsubscribe", "call_service")
OPS_TO_CLIENT = ("roster", "publish_snapshot", "topic", "service_ack")


class BridgeProtocolError(ValueError):
    pass


def validate_client_op(op: Any) -> dict:
    if not isinstance(op, dict) or "op" not in op:
        raise BridgeProtocolError("bridge message must be an object with an 'op' field")
    kind = op["op"]
    if kind not in OPS_FROM_CLIENT:
        raise BridgeProtocolError(f"unknown client op {kind!r}")
    if kind in ("subscribe", "unsubscribe"):
        for key in ("uav", "topic"):
            if not isinstance(op.get(key), str):
                raise BridgeProtocolError(f"{kind} needs string field {key!r}")
    if kind == "call_service":
        for key in ("uav", "service"):
            if not isinstance(op.get(key), str):
                raise BridgeProtocolError(f"call_service needs string field {key!r}")
    return op


def topic_op(uav_label: str, topic: str, seq: int, payload_obj: Any, sent_at: int) -> dict:
    return {
        "op": "topic",
        "uav": uav_label,
        "topic": topic,
        "seq": seq,
        "payload": payload_obj,
        "sent_at": sent_at,
    }


def roster_op(rows: list[dict]) -> dict:
    return {"op": "roster", "uavs": rows}


def snapshot_op(uav_label: str, topic: str, messages: list[dict]) -> dict:
    return {"op": "publish_snapshot", "uav": uav_label, "topic": topic, "messages": messages}


def service_ack_op(
    request_id: int, tag: str, uav_label: str, service: str, status: str, detail: str, rtt_ms: float
) -> dict:
    return {
        "op": "service_ack",
        "request_id": request_id,
        "tag": tag,
        "uav": uav_label,
        "service": service,
        "status": status,
        "detail": detail,
        "rtt_ms": rtt_ms,
    }


def matches(pattern_uav: str, pattern_topic: str, uav_label: str, topic: str) -> bool:
    uav_ok = pattern_uav == "*" or pattern_uav == uav_label
    topic_ok = pattern_topic == "*" or pattern_topic == topic
    return uav_ok and topic_ok
