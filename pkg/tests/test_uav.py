import math

import pytest

from unet import messages as m
from unet.ids import gateway, uav
from unet.uav import FlightMode, FlightState, PairState, autopilot_step, default_schedule
from unet.mobility import WaypointPath

from conftest import star_world


def test_autopilot_step_battery_decay_and_invariants():
    state = FlightState(battery_voltage=12.6)
    out = autopilot_step(state, 60_000.0, decay_v_per_min=0.05)
    assert out.battery_voltage == pytest.approx(12.55)
    out.check_invariants()
    with pytest.raises(ValueError):
        autopilot_step(state, 0, 0.05)


def test_disarmed_uav_still_emits_telemetry():
    world, d, gws, (u,) = star_world(topics={"telemetry/pose": 3.0})
    world.run(10_000)
    assert not u.state.armed
    pos0 = world.mobility.position(u.node_id)
    assert u.emitted["telemetry/pose"] >= 29
    assert world.mobility.position(u.node_id) == pos0


def test_emission_count_matches_schedule_arithmetic():
    # floor(T * f) +/- 1 per topic
    world, d, gws, (u,) = star_world(topics={"telemetry/pose": 3.0, "telemetry/battery": 6.0})
    T_s = 10.0
    world.run(T_s * 1000.0)
    assert abs(u.emitted["telemetry/pose"] - int(T_s * 3)) <= 1
    assert abs(u.emitted["telemetry/battery"] - int(T_s * 6)) <= 1


def test_battery_voltage_monotone_non_increasing():
    world, d, gws, (u,) = star_world()
    world.run(15_000)
    slot = d.store.slot("uav:1", "telemetry/battery")
    readings = [float(t.payload.text.split("=")[1]) for t in slot.ring]
    assert all(a >= b for a, b in zip(readings, readings[1:]))


def test_waypoint_arrival_kinematics_oracle():
    # 300 m at 10 m/s arrives at t = 30 s, within one mobility step
    world, d, gws, (u,) = star_world(topics={})
    start = world.mobility.position(u.node_id)
    target = (start[0] + 300.0, start[1], start[2])
    world.mobility.set_path(u.node_id, WaypointPath([start, target], 10.0))
    world.run(30_000 - world.cfg.mobility_tick_ms)
    assert world.mobility.position(u.node_id) != target
    world.run(2 * world.cfg.mobility_tick_ms)
    assert world.mobility.position(u.node_id) == target


def service(kind, args=None, rid=1, target_index=1):
    return m.ServiceMessage(
        service_name=m.ServiceKind(kind), target=uav(target_index),
        request_id=rid, args=args, issued_at=0,
    )


def test_handle_service_arm_and_modes():
    world, d, gws, (u,) = star_world()
    ack = u.handle_service(service("ARM_THROTTLE"))
    assert ack.status is m.AckStatus.SUCCESS and u.state.armed
    ack2 = u.handle_service(service("ARM_THROTTLE", rid=2))
    assert ack2.status is m.AckStatus.REJECTED
    assert u.handle_service(service("SET_MODE", "GUIDED", rid=3)).status is m.AckStatus.SUCCESS
    assert u.state.mode is FlightMode.GUIDED
    before = u.state.mode
    bad = u.handle_service(service("SET_MODE", "BOGUS", rid=4))
    assert bad.status is m.AckStatus.REJECTED
    assert u.state.mode is before
    # malformed args never drop silently
    assert u.handle_service(service("SET_MODE", None, rid=5)).status is m.AckStatus.REJECTED


def test_takeoff_land_keep_airborne_implies_armed():
    world, d, gws, (u,) = star_world()
    assert u.handle_service(service("TAKEOFF", rid=1)).status is m.AckStatus.REJECTED  # not armed
    u.handle_service(service("ARM_THROTTLE", rid=2))
    assert u.handle_service(service("TAKEOFF", rid=3)).status is m.AckStatus.SUCCESS
    assert u.state.airborne and u.state.armed
    assert u.handle_service(service("LAND", rid=4)).status is m.AckStatus.SUCCESS
    assert not u.state.airborne
    u.state.check_invariants()


def test_duplicate_request_id_returns_same_ack():
    world, d, gws, (u,) = star_world()
    first = u.handle_service(service("ARM_THROTTLE", rid=9))
    again = u.handle_service(service("ARM_THROTTLE", rid=9))
    assert first == again
    assert u.services_handled == 1  # replay returns the cached ack


def test_gcscom_connects_within_handshake_budget():
    world, d, gws, (u,) = star_world()
    # beacon, eval tick, handshake round trip: well under a second
    world.run(1_000)
    assert u.pair.state is PairState.CONNECTED
    assert d.online(u.node_id)


def test_gcscom_unreachable_keeps_retrying():
    world, d, gws, (u,) = star_world()
    world.mobility.place(u.node_id, (5_000.0, 0.0, 30.0))  # far outside range
    world.run(5_000)
    assert u.pair.state is not PairState.CONNECTED
    world.mobility.place(u.node_id, (100.0, 0.0, 30.0))
    world.run(3_000)
    assert u.pair.state is PairState.CONNECTED


def test_telemetry_quaternion_unit_norm():
    world, d, gws, (u,) = star_world()
    world.run(500)
    t = u.current_telemetry()
    t.validate()
    assert abs(math.sqrt(sum(c * c for c in t.orientation)) - 1.0) < 1e-6


def test_uavcom_two_uavs_learn_each_others_topics():
    world, d, gws, uavs = star_world(n_uavs=2)
    a, b = uavs
    world.emu.attach_link(a.node_id, b.node_id, world.profiles["TPLink WR902AC"])
    world.run(3_000)
    assert tuple(sorted(a.schedule.frequencies_hz)) == b.peer_topics[a.node_id]
    assert tuple(sorted(b.schedule.frequencies_hz)) == a.peer_topics[b.node_id]
    # shared topic messages flow peer-to-peer
    world.run(2_000)
    assert b.peer_messages[("uav:1", "telemetry/pose")] > 0


def test_uavcom_relay_over_two_hops():
    # line a - b - c with a short-range profile: a hears c's topics via b
    overlay = {"short": {"base": "TPLink WR902AC", "max_range_m": 200.0}}
    world, d, gws, uavs = star_world(n_uavs=3, profile="short", overlay=overlay, link_gateways=False)
    a, b, c = uavs
    for node, x in ((a, 100.0), (b, 250.0), (c, 400.0)):
        world.mobility.place(node.node_id, (x, 0.0, 30.0))
    world.emu.attach_link(a.node_id, b.node_id, world.profiles["short"])
    world.emu.attach_link(b.node_id, c.node_id, world.profiles["short"])
    world.emu.attach_link(a.node_id, c.node_id, world.profiles["short"])  # down by range
    world.run(6_000)
    assert c.node_id in a.peer_topics
    assert a.peer_messages[("uav:3", "telemetry/battery")] > 0
