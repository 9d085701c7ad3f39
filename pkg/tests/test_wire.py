import random
import struct
from pathlib import Path

import pytest

from unet import messages as m
from unet import wire
from unet.errors import DecodeError, EncodeError, InvalidMessage, NeedMoreBytes
from unet.ids import Address, NodeId, NodeKind

from genmsg import random_message, random_telemetry

FIXTURE = Path(__file__).parent / "fixtures" / "golden.frames"


def test_length_prefix_covers_remainder():
    ack = m.AckMessage(request_id=7, status=m.AckStatus.SUCCESS, completed_at=123)
    frame = wire.encode(ack)
    (length,) = struct.unpack_from(">I", frame)
    assert length == len(frame) - 4


def test_roundtrip_identity_simple():
    ack = m.AckMessage(request_id=7, status=m.AckStatus.SUCCESS, completed_at=123)
    assert wire.decode(wire.encode(ack)) == ack


def test_encoding_deterministic():
    rng = random.Random(11)
    msg = random_message(rng)
    assert wire.encode(msg) == wire.encode(msg)


def test_roundtrip_1000_random_messages():
    rng = random.Random(20240601)
    for _ in range(1000):
        msg = random_message(rng)
        frame = wire.encode(msg, mtu_budget=None)
        again = wire.decode(frame)
        assert again == msg
        assert wire.encode(again, mtu_budget=None) == frame


def test_empty_input_needs_more_bytes():
    with pytest.raises(NeedMoreBytes):
        wire.decode(b"")


def test_truncated_frame_needs_more_bytes():
    frame = wire.encode(m.AckMessage(request_id=1, status=m.AckStatus.SUCCESS, completed_at=5))
    with pytest.raises(NeedMoreBytes):
        wire.decode(frame[:-3])


def test_unknown_tag_is_decode_error():
    body = b'{"x":1}'
    frame = struct.pack(">I", 1 + len(body)) + bytes([0xFF]) + body
    with pytest.raises(DecodeError):
        wire.decode(frame)


def test_trailing_bytes_rejected():
    frame = wire.encode(m.AckMessage(request_id=1, status=m.AckStatus.SUCCESS, completed_at=5))
    with pytest.raises(DecodeError):
        wire.decode(frame + b"x")


def test_invariant_violation_on_decode():
    # hand-build a telemetry topic with a non-unit quaternion
    good = m.TopicMessage(
        topic_name="telemetry/pose",
        publisher=NodeId(NodeKind.UAV, 1),
        seq=3,
        payload=m.Telemetry((10.0, 20.0, 30.0), (1.0, 0.0, 0.0, 0.0), 12.0, 99),
        sent_at=99,
    )
    frame = wire.encode(good)
    bad = frame.replace(b'"orientation":[1.0,0.0,0.0,0.0]', b'"orientation":[1.5,0.0,0.0,0.0]')
    assert bad != frame
    bad = struct.pack(">I", len(bad) - 4) + bad[4:]
    with pytest.raises(InvalidMessage):
        wire.decode(bad)


def test_oversize_frame_rejected():
    big = m.BulkPayload(stream_id="s", chunk_no=0, payload=b"\x00" * (70 * 1024))
    with pytest.raises(EncodeError):
        wire.encode(big)  # default 64 KiB budget
    assert wire.decode(wire.encode(big, mtu_budget=None)) == big


def test_invalid_message_rejected_on_encode():
    bad = m.TopicMessage(
        topic_name="",
        publisher=NodeId(NodeKind.UAV, 1),
        seq=0,
        payload=m.DiagnosticText("x"),
        sent_at=0,
    )
    with pytest.raises(InvalidMessage):
        wire.encode(bad)


def test_stream_decoder_reassembles_split_frames():
    rng = random.Random(7)
    msgs = [random_message(rng) for _ in range(25)]
    blob = b"".join(wire.encode(msg, mtu_budget=None) for msg in msgs)
    decoder = wire.FrameDecoder()
    out = []
    step = 13
    for i in range(0, len(blob), step):
        out.extend(decoder.feed(blob[i : i + step]))
    assert out == msgs
    assert decoder.pending_bytes == 0


def test_capture_file_iteration():
    rng = random.Random(8)
    msgs = [random_message(rng) for _ in range(10)]
    blob = b"".join(wire.encode(msg, mtu_budget=None) for msg in msgs)
    assert list(wire.iter_frames(blob)) == msgs


def _golden_messages():
    rng = random.Random(424242)
    return [random_message(rng) for _ in range(200)]


def test_golden_fixture_decodes_to_originals():
    blob = FIXTURE.read_bytes()
    decoded = list(wire.iter_frames(blob))
    expected = _golden_messages()
    assert decoded == expected
    assert b"".join(wire.encode(msg, mtu_budget=None) for msg in decoded) == blob


def test_quaternion_tolerance_boundary():
    t = random_telemetry(random.Random(3))
    t.validate()
    off = m.Telemetry(t.position, (1.0 + 2e-6, 0.0, 0.0, 0.0), t.battery_voltage, t.timestamp)
    with pytest.raises(InvalidMessage):
        off.validate()
