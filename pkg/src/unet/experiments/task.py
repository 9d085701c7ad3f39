"""Task execution time: a ground-station client issues arm/mode commands
through the service layer and times issue-to-ack round trips."""
from __future__ import annotations

from dataclasses import dataclass

from ..ids import gateway
from ..metrics import TASK_EXEC, MeanCI, MetricsLog, mean_ci
from ..scenario import add_dpsl, add_gateway, add_uav, base_world

TRIAL_GAP_MS = 50.0


@dataclass
class TaskExecResult:
    profile: str
    command: str
    task_ms: MeanCI
    one_way_pdd_ms: MeanCI  # pooled over both service-channel directions
    trials: int
    timeouts: int
    metrics: MetricsLog


def run_task_exec(
    profile_name: str,
    command: str = "SET_MODE",
    seed: int = 11,
    trials: int = 120,
) -> TaskExecResult:
    world = base_world(seed=seed)
    d = add_dpsl(world)
    add_gateway(world, 1, (0.0, 0.0, 0.0), d, interface_profiles=(profile_name,))
    u = add_uav(
        world, 1, profile_name, (200.0, 0.0, 30.0), d, (gateway(1),),
        topics={"telemetry/pose": 3.0}, uavcom_enabled=False,
    )

    rtts: list[float] = []
    timeouts = [0]
    issued = [0]
    metrics = MetricsLog()

    # SET_MODE flips between two valid modes so every trial succeeds;
    # ARM_THROTTLE is only accepted once, later trials still complete
    # with a REJECTED ack, which measures the same round trip
    mode_cycle = ("GUIDED", "AUTO")

    def issue() -> None:
        if issued[0] >= trials or not d.online(u.node_id):
            if issued[0] < trials:
                world.sim.after(200.0, issue)
            return
        args = mode_cycle[issued[0] % 2] if command == "SET_MODE" else None
        issued[0] += 1
        d.call_service(session, u.node_id.label, command, args, tag=f"trial-{issued[0]}")

    def deliver(op: dict) -> None:
        if op.get("op") != "service_ack":
            return
        if op["status"] == "TIMEOUT":
            timeouts[0] += 1
        else:
            rtts.append(op["rtt_ms"])
            metrics.add(world.sim.now, TASK_EXEC, op["rtt_ms"], profile=profile_name, command=command)
        if issued[0] < trials:
            world.sim.after(TRIAL_GAP_MS, issue)

    session = d.attach_session("bench", deliver)
    world.sim.after(1_000.0, issue)

    world.run(trials * (TRIAL_GAP_MS + 120.0) + 5_000.0)

    one_way = list(u.service_req_delays) + list(d.ack_delays)
    return TaskExecResult(
        profile=profile_name,
        command=command,
        task_ms=mean_ci(rtts),
        one_way_pdd_ms=mean_ci(one_way),
        trials=len(rtts),
        timeouts=timeouts[0],
        metrics=metrics,
    )
