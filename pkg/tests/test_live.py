"""Socket-mode smoke test: real TCP channels, WebSocket bridge."""
import json
import socket
import time
from pathlib import Path

from unet import wsproto
from unet.live import LiveWorld

DEMO = Path(__file__).parents[1] / "src" / "unet" / "scenarios" / "three_uav_demo.yaml"


def _recv_until(sock, predicate, deadline_s=10.0):
    end = time.monotonic() + deadline_s
    while time.monotonic() < end:
        sock.settimeout(max(0.1, end - time.monotonic()))
        text = wsproto.recv_message(sock)
        if text is None:
            break
        op = json.loads(text)
        if predicate(op):
            return op
    raise AssertionError("expected bridge op not seen in time")


def test_live_bridge_roster_topics_and_command():
    world = LiveWorld(str(DEMO), bridge_port=0, rate=4.0)
    try:
        conn = socket.create_connection(("127.0.0.1", world.bridge_port), timeout=5)
        wsproto.client_handshake(conn, "127.0.0.1")
        wsproto.send_text(conn, json.dumps({"op": "subscribe", "uav": "*", "topic": "*"}), mask=True)

        roster = _recv_until(
            conn, lambda op: op["op"] == "roster" and sum(r["online"] for r in op["uavs"]) >= 3
        )
        assert len(roster["uavs"]) == 3

        topic = _recv_until(conn, lambda op: op["op"] == "topic")
        assert topic["uav"].startswith("uav:")
        assert "payload" in topic

        wsproto.send_text(
            conn,
            json.dumps({"op": "call_service", "uav": "uav:1", "service": "ARM_THROTTLE", "tag": "t1"}),
            mask=True,
        )
        ack = _recv_until(conn, lambda op: op["op"] == "service_ack")
        assert ack["status"] == "SUCCESS"
        assert world.uavs[0].state.armed
        conn.close()
    finally:
        world.stop()
