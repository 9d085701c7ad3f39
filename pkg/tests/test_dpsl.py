import random

from unet import messages as m
from unet.dpsl import RING_SIZE
from unet.ids import NodeId, NodeKind, uav
from unet.uav import PairState

from conftest import star_world


def connected_world(**kw):
    world, d, gws, uavs = star_world(**kw)
    world.run(1_500)
    return world, d, gws, uavs


def test_fresh_uav_shows_online_in_roster():
    world, d, gws, (u,) = connected_world()
    rows = d.roster_rows()
    assert rows == [{"uav": "uav:1", "online": True, "last_seen_ms": rows[0]["last_seen_ms"]}]


def test_ingest_updates_store_and_ring():
    world, d, gws, (u,) = connected_world(topics={"telemetry/battery": 6.0})
    world.run(100_000)
    slot = d.store.slot("uav:1", "telemetry/battery")
    assert len(slot.ring) == RING_SIZE
    assert slot.latest.seq == max(t.seq for t in slot.ring)
    # ~6 Hz over ~100 s
    assert abs(slot.latest.seq - 600) < 20


def test_unknown_publisher_dropped_with_counter():
    world, d, gws, (u,) = connected_world()
    ghost = m.TopicMessage(
        topic_name="telemetry/pose", publisher=uav(99), seq=0,
        payload=m.DiagnosticText("x"), sent_at=0,
    )
    before = d.unknown_publisher_drops
    d.ingest_topic(ghost)
    assert d.unknown_publisher_drops == before + 1
    assert d.store.slot("uav:99", "telemetry/pose") is None


def test_fanout_exactly_once_per_subscriber_in_order():
    world, d, gws, (u,) = connected_world()
    box_a, box_b = [], []
    sa = d.attach_session("a", box_a.append)
    sb = d.attach_session("b", box_b.append)
    d.handle_op(sa, {"op": "subscribe", "uav": "*", "topic": "telemetry/pose"})
    d.handle_op(sb, {"op": "subscribe", "uav": "uav:1", "topic": "telemetry/pose"})
    world.run(5_000)
    seqs_a = [op["seq"] for op in box_a if op["op"] == "topic"]
    seqs_b = [op["seq"] for op in box_b if op["op"] == "topic"]
    assert seqs_a == seqs_b
    assert seqs_a == sorted(seqs_a)
    assert len(seqs_a) == len(set(seqs_a))
    assert len(seqs_a) > 10


def test_no_subscribers_store_still_updated():
    world, d, gws, (u,) = connected_world()
    world.run(2_000)
    assert d.store.slot("uav:1", "telemetry/pose").received > 0


def test_unsubscribe_stops_fanout():
    world, d, gws, (u,) = connected_world()
    box = []
    s = d.attach_session("a", box.append)
    d.handle_op(s, {"op": "subscribe", "uav": "*", "topic": "*"})
    world.run(2_000)
    n = len(box)
    assert n > 0
    d.handle_op(s, {"op": "unsubscribe", "uav": "*", "topic": "*"})
    world.run(2_000)
    assert len([op for op in box[n:] if op["op"] == "topic"]) == 0


def test_call_service_to_online_uav_relays_exactly_one_ack():
    world, d, gws, (u,) = connected_world()
    box = []
    s = d.attach_session("ui", box.append)
    d.call_service(s, "uav:1", "ARM_THROTTLE", None, tag="t")
    world.run(2_000)
    acks = [op for op in box if op["op"] == "service_ack"]
    assert len(acks) == 1
    assert acks[0]["status"] == "SUCCESS"
    assert u.state.armed


def test_call_to_offline_uav_rejected_without_network_traffic():
    world, d, gws, (u,) = connected_world()
    link = world.emu.link_between(u.node_id, gws[0].node_id)
    sent_before = link.counters(d.node_id if False else gws[0].node_id).offered
    box = []
    s = d.attach_session("ui", box.append)
    d.call_service(s, "uav:7", "ARM_THROTTLE", None, tag="t")  # never registered
    assert box[-1]["op"] == "service_ack"
    assert box[-1]["status"] == "REJECTED"
    assert "offline" in box[-1]["detail"]


def test_deadline_synthesizes_timeout_and_suppresses_late_ack():
    world, d, gws, (u,) = connected_world()
    box = []
    s = d.attach_session("ui", box.append)
    # strand the UAV out of range right after the call is issued
    d.call_service(s, "uav:1", "ARM_THROTTLE", None, tag="t")
    world.mobility.place(u.node_id, (9_000.0, 0.0, 30.0))
    world.run(world.cfg.service_timeout_ms + 1_000)
    acks = [op for op in box if op["op"] == "service_ack"]
    assert len(acks) == 1
    assert acks[0]["status"] == "TIMEOUT"
    # UAV returns; the channel retransmits its ack, which must be suppressed
    world.mobility.place(u.node_id, (110.0, 0.0, 30.0))
    world.run(10_000)
    acks = [op for op in box if op["op"] == "service_ack"]
    assert len(acks) == 1


def test_exactly_once_acks_under_heavy_channel_loss():
    # 30% per-attempt loss on the radio link, retransmission budget high
    # enough that the channel always recovers
    overlay = {
        "TPLink WR902AC": {"loss_prob": 0.30, "retx_limit": 40, "retx_timeout_ms": 20.0}
    }
    world, d, gws, (u,) = star_world(overlay=overlay, seed=77)
    world.run(2_500)
    assert u.pair.state is PairState.CONNECTED
    box = []
    s = d.attach_session("ui", box.append)
    modes = ["GUIDED", "AUTO"]
    pending = {"n": 0}

    def issue(i):
        d.call_service(s, "uav:1", "SET_MODE", modes[i % 2], tag=f"c{i}")

    for i in range(40):
        world.sim.at(3_000 + i * 400.0, lambda i=i: issue(i))
    world.run(40 * 400.0 + 10_000)
    acks = [op for op in box if op["op"] == "service_ack"]
    assert len(acks) == 40
    tags = [op["tag"] for op in acks]
    assert len(set(tags)) == 40
    assert all(op["status"] == "SUCCESS" for op in acks)


def test_second_live_registration_rejected():
    world, d, gws, (u,) = connected_world()
    reject = []
    u.note_orig = u.note
    # forge a fresh identify claiming the same node id from another address
    from unet.ids import Address
    forged = m.Identify(
        src=Address("203.0.113.1", 29999), dst=d.topic_listen,
        channel="uav:1/topic", node=uav(1), role="topic", resume_from=0,
    )
    d.accept_uav(forged)
    # the registration still points at the original endpoints and stays online
    assert d.online(uav(1))
    world.run(3_000)
    assert u.pair.state is PairState.CONNECTED


def test_reconnect_after_handover_keeps_single_roster_entry_and_seq():
    world, d, gws, uavs = star_world(n_gateways=2, seed=21)
    u = uavs[0]
    world.run(3_000)
    slot = d.store.slot("uav:1", "telemetry/pose")
    seq_mid = slot.latest.seq
    # move near the second gateway: first link dies, channel re-established
    world.mobility.place(u.node_id, (790.0, 0.0, 30.0))
    world.run(6_000)
    assert len(d.registrations) == 1
    assert d.online(uav(1))
    seqs = [t.seq for t in d.store.slot("uav:1", "telemetry/pose").ring]
    assert seqs == sorted(seqs)
    assert d.store.slot("uav:1", "telemetry/pose").latest.seq > seq_mid
