"""Deterministic experiment scenarios and their measurement plumbing."""

from .handover import HandoverResult, run_handover
from .gateway_load import GatewayLoadResult, run_gateway_load
from .e2e import E2EResult, run_e2e
from .task import TaskExecResult, run_task_exec
from .traffic import TrafficResult, run_traffic_over_time
from .reliability import ReliabilityResult, run_reliability

__all__ = [
    "HandoverResult", "run_handover",
    "GatewayLoadResult", "run_gateway_load",
    "E2EResult", "run_e2e",
    "TaskExecResult", "run_task_exec",
    "TrafficResult", "run_traffic_over_time",
    "ReliabilityResult", "run_reliability",
]
