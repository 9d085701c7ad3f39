"""Scenario assembly: programmatic builders plus the YAML file schema.

A scenario file looks like:

    scenario:
      name: three-uav-demo
      seed: 42
      duration_ms: 30000
    net:                      # optional NetConfig field overrides
      path_down_after_ms: 750
    profiles:                 # optional profile overlay (same schema as
      "Microhard-short":      # a profiles file)
        base: "Microhard pMDDL2450"
        max_range_m: 200
    mesh: false               # attach UAV<->UAV radio links
    gateways:
      - index: 1
        position: [0, 0, 0]
        uplink: LAN           # LAN | CELL_4G
        interfaces: ["TPLink WR902AC"]
    uavs:
      - index: 1
        profile: "TPLink WR902AC"
        position: [100, 0, 30]
        gateways: [1]
        topics: {"telemetry/pose": 3, "telemetry/battery": 3}
        waypoints: [[100, 0, 30], [300, 0, 30]]   # optional
        speed_mps: 10
        shuttle: false
        join_at_ms: 0
    events:
      - at_ms: 5000
        action: service       # service | fail_gateway | recover_gateway
        uav: 1
        service: ARM_THROTTLE
        args: null
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import yaml

from .dpsl import DpslNode
from .errors import ConfigError, ScenarioError
from .gateway import GatewayConfig, GatewayNode, InterfaceConfig, configure
from .ids import NodeId, dpsl, gateway, uav
from .mobility import Vec3, WaypointPath
from .profiles import calibrated_profiles, profiles_from_mapping
from .uav import TopicSchedule, UavNode
from .world import NetConfig, World


@dataclass
class BuiltScenario:
    name: str
    world: World
    dpsl: DpslNode
    gateways: dict[int, GatewayNode]
    uavs: dict[int, UavNode]
    duration_ms: float
    seed: int

    def run(self) -> None:
        self.world.run(self.duration_ms)


def make_net_config(overrides: Optional[dict] = None) -> NetConfig:
    cfg = NetConfig()
    if not overrides:
        return cfg
    valid = {f.name for f in dataclasses.fields(NetConfig)}
    for key, value in overrides.items():
        if key not in valid:
            raise ConfigError(f"net.{key}: unknown NetConfig field")
        setattr(cfg, key, type(getattr(cfg, key))(value))
    return cfg


def base_world(
    seed: int = 0,
    net: Optional[dict] = None,
    profile_overlay: Optional[dict] = None,
    keep_trace: bool = False,
) -> World:
    profiles = calibrated_profiles()
    if profile_overlay:
        profiles = profiles_from_mapping(profile_overlay, base=profiles)
    return World(seed=seed, cfg=make_net_config(net), profiles=profiles, keep_trace=keep_trace)


def add_dpsl(world: World, position: Vec3 = (0.0, -50.0, 0.0)) -> DpslNode:
    node = DpslNode(world, dpsl(0))
    world.add_node(node)
    world.mobility.place(node.node_id, position)
    return node


def add_gateway(
    world: World,
    index: int,
    position: Vec3,
    dpsl_node: DpslNode,
    interface_profiles: tuple[str, ...] = ("TPLink WR902AC",),
    uplink: str = "LAN",
    record_frames: bool = False,
) -> GatewayNode:
    interfaces = [
        InterfaceConfig(name=f"wlan{i}", profile_name=p, address=f"10.{index}.{i}.1")
        for i, p in enumerate(interface_profiles)
    ]
    cfg = GatewayConfig(interfaces=interfaces, uplink_kind=uplink, uplink_address=f"203.0.113.{index}")
    node = GatewayNode(world, gateway(index), cfg, record_frames=record_frames)
    configure(node.config, node.flush_queues)
    world.add_node(node)
    world.mobility.place(node.node_id, position)
    uplink_profile = world.profiles["LAN" if uplink == "LAN" else "JioFi JMR540"]
    world.emu.attach_link(node.node_id, dpsl_node.node_id, uplink_profile)
    return node


def add_uav(
    world: World,
    index: int,
    profile_name: str,
    position: Vec3,
    dpsl_node: DpslNode,
    gateways: tuple[NodeId, ...],
    topics: Optional[dict[str, float]] = None,
    link_gateways: bool = True,
    mesh_peers: tuple[NodeId, ...] = (),
    gcs_enabled: bool = True,
    uavcom_enabled: bool = True,
    announce_join: bool = False,
) -> UavNode:
    schedule = TopicSchedule(dict(topics)) if topics is not None else None
    node = UavNode(
        world,
        uav(index),
        profile_name,
        gateways=gateways,
        schedule=schedule,
        dpsl_topic_addr=dpsl_node.topic_listen,
        dpsl_service_addr=dpsl_node.service_listen,
        dpsl_data_addr=dpsl_node.data_listen,
        gcs_enabled=gcs_enabled,
        uavcom_enabled=uavcom_enabled,
    )
    node.announce_join = announce_join
    # position and links must exist before the node starts: a joining node
    # floods its announcement from start()
    world.mobility.place(node.node_id, position)
    profile = world.profiles[profile_name]
    if link_gateways:
        for gw in gateways:
            world.emu.attach_link(node.node_id, gw, profile)
    for peer in mesh_peers:
        if world.emu.link_between(node.node_id, peer) is None:
            world.emu.attach_link(node.node_id, peer, profile)
    world.add_node(node)
    return node


def set_path(world: World, node: NodeId, waypoints: list[Vec3], speed_mps: float, shuttle: bool = False) -> None:
    world.mobility.set_path(node, WaypointPath(list(map(tuple, waypoints)), speed_mps, shuttle=shuttle))


# --- YAML loading -------------------------------------------------------------


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}: required")
    return doc[key]


def load_scenario(path: Union[str, Path]) -> BuiltScenario:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_scenario(doc)


def build_scenario(doc: dict) -> BuiltScenario:
    meta = _require(doc, "scenario", "")
    name = _require(meta, "name", "scenario")
    seed = int(meta.get("seed", 0))
    duration = float(_require(meta, "duration_ms", "scenario"))
    world = base_world(seed=seed, net=doc.get("net"), profile_overlay=doc.get("profiles"))
    dpsl_node = add_dpsl(world)

    gateways: dict[int, GatewayNode] = {}
    for i, gw_doc in enumerate(doc.get("gateways", [])):
        idx = int(_require(gw_doc, "index", f"gateways[{i}]"))
        pos = tuple(float(c) for c in _require(gw_doc, "position", f"gateways[{i}]"))
        ifaces = tuple(gw_doc.get("interfaces", ("TPLink WR902AC",)))
        for p in ifaces:
            if p not in world.profiles:
                raise ConfigError(f"gateways[{i}].interfaces: unknown profile {p!r}")
        gateways[idx] = add_gateway(
            world, idx, pos, dpsl_node, interface_profiles=ifaces, uplink=gw_doc.get("uplink", "LAN")
        )
    if not gateways:
        raise ConfigError("gateways: at least one required")

    mesh = bool(doc.get("mesh", False))
    uavs: dict[int, UavNode] = {}
    deferred: list[tuple[float, dict]] = []
    for i, uav_doc in enumerate(doc.get("uavs", [])):
        join_at = float(uav_doc.get("join_at_ms", 0))
        if join_at > 0:
            deferred.append((join_at, uav_doc))
        else:
            _spawn_uav(world, uav_doc, i, dpsl_node, gateways, uavs, mesh, announce=False)
    if not uavs and not deferred:
        raise ConfigError("uavs: at least one required")

    built = BuiltScenario(
        name=name, world=world, dpsl=dpsl_node, gateways=gateways, uavs=uavs,
        duration_ms=duration, seed=seed,
    )

    for join_at, uav_doc in deferred:
        world.sim.at(
            join_at,
            lambda d=uav_doc: _spawn_uav(world, d, -1, dpsl_node, gateways, uavs, mesh, announce=True),
            label="join",
        )
    for i, ev in enumerate(doc.get("events", [])):
        at = float(_require(ev, "at_ms", f"events[{i}]"))
        action = _require(ev, "action", f"events[{i}]")
        if action == "service":
            target = int(_require(ev, "uav", f"events[{i}]"))
            service = _require(ev, "service", f"events[{i}]")
            args = ev.get("args")
            world.sim.at(at, lambda t=target, s=service, a=args: _scripted_service(built, t, s, a))
        elif action == "fail_gateway":
            idx = int(_require(ev, "gateway", f"events[{i}]"))
            world.sim.at(at, lambda g=idx: gateways[g].stop_beacons())
        elif action == "set_path":
            target = int(_require(ev, "uav", f"events[{i}]"))
            waypoints = [tuple(float(c) for c in wp) for wp in _require(ev, "waypoints", f"events[{i}]")]
            speed = float(ev.get("speed_mps", 5.0))
            shuttle = bool(ev.get("shuttle", False))

            def apply_path(t=target, w=waypoints, s=speed, sh=shuttle):
                node_id = uavs[t].node_id
                current = world.mobility.position(node_id)
                set_path(world, node_id, [current] + w, s, shuttle=sh)

            world.sim.at(at, apply_path)
        else:
            raise ConfigError(f"events[{i}].action: unknown action {action!r}")
    return built


def _spawn_uav(world, uav_doc, i, dpsl_node, gateways, uavs, mesh, announce):
    path = f"uavs[{i}]"
    idx = int(_require(uav_doc, "index", path))
    profile = _require(uav_doc, "profile", path)
    if profile not in world.profiles:
        raise ConfigError(f"{path}.profile: unknown profile {profile!r}")
    pos = tuple(float(c) for c in _require(uav_doc, "position", path))
    gw_ids = tuple(gateway(int(g)) for g in uav_doc.get("gateways", sorted(gateways)))
    for g in gw_ids:
        if g.index not in gateways:
            raise ConfigError(f"{path}.gateways: unknown gateway {g.index}")
    peers = tuple(u.node_id for u in uavs.values()) if mesh else ()
    node = add_uav(
        world, idx, profile, pos, dpsl_node, gw_ids,
        topics=uav_doc.get("topics"), mesh_peers=peers, announce_join=announce,
    )
    uavs[idx] = node
    if "waypoints" in uav_doc:
        set_path(
            world, node.node_id,
            [tuple(float(c) for c in wp) for wp in uav_doc["waypoints"]],
            float(uav_doc.get("speed_mps", 5.0)),
            shuttle=bool(uav_doc.get("shuttle", False)),
        )
    return node


def _scripted_service(built: BuiltScenario, uav_index: int, service: str, args) -> None:
    session = built.dpsl.sessions.get("script")
    if session is None:
        session = built.dpsl.attach_session("script", lambda op: None)
    built.dpsl.call_service(session, f"uav:{uav_index}", service, args, tag=f"script-{uav_index}-{service}")
