import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from unet.ids import dpsl, gateway, uav
from unet.profiles import calibrated_profiles
from unet.scenario import add_dpsl, add_gateway, add_uav, base_world


def star_world(
    seed=42,
    profile="TPLink WR902AC",
    n_uavs=1,
    n_gateways=1,
    topics=None,
    net=None,
    overlay=None,
    **uav_kw,
):
    """One DPSL, gateways on a line, UAVs near the first gateway."""
    world = base_world(seed=seed, net=net, profile_overlay=overlay)
    d = add_dpsl(world)
    gws = []
    for g in range(1, n_gateways + 1):
        gws.append(add_gateway(world, g, ((g - 1) * 800.0, 0.0, 0.0), d, interface_profiles=(profile,)))
    uavs = []
    for k in range(1, n_uavs + 1):
        uavs.append(
            add_uav(
                world, k, profile, (100.0 + 10.0 * k, 0.0, 30.0), d,
                tuple(g.node_id for g in gws),
                topics=topics if topics is not None else {"telemetry/pose": 3.0, "telemetry/battery": 3.0},
                **uav_kw,
            )
        )
    return world, d, gws, uavs
