"""Node positions and waypoint motion in a local ENU frame."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .ids import NodeId

Vec3 = tuple[float, float, float]


def distance(a: Vec3, b: Vec3) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


@dataclass
class WaypointPath:
    """Straight-line motion through waypoints at constant speed.

    shuttle=True ping-pongs along the list forever; otherwise the node stops
    at the final waypoint.
    """

    waypoints: list[Vec3]
    speed_mps: float
    shuttle: bool = False
    _index: int = 0
    _forward: bool = True

    def __post_init__(self) -> None:
        if self.speed_mps < 0:
            raise ValueError("speed must be >= 0")

    def target(self) -> Optional[Vec3]:
        if 0 <= self._index < len(self.waypoints):
            return self.waypoints[self._index]
        return None

    def advance_target(self) -> None:
        if self._forward:
            if self._index + 1 < len(self.waypoints):
                self._index += 1
            elif self.shuttle:
                self._forward = False
                self._index -= 1
            else:
                self._index = len(self.waypoints)
        else:
            if self._index > 0:
                self._index -= 1
            elif self.shuttle:
                self._forward = True
                self._index += 1


class Mobility:
    """Owns every node's position; stepped from the event loop."""

    def __init__(self) -> None:
        self._pos: dict[NodeId, Vec3] = {}
        self._paths: dict[NodeId, WaypointPath] = {}
        self._heading: dict[NodeId, float] = {}

    def place(self, node: NodeId, position: Vec3) -> None:
        if any(not math.isfinite(c) for c in position):
            raise ValueError(f"position for {node} must be finite")
        self._pos[node] = position

    def set_path(self, node: NodeId, path: WaypointPath) -> None:
        if node not in self._pos:
            raise KeyError(f"{node} has no position yet")
        self._paths[node] = path

    def position(self, node: NodeId) -> Vec3:
        return self._pos[node]

    def heading_rad(self, node: NodeId) -> float:
        return self._heading.get(node, 0.0)

    def distance_between(self, a: NodeId, b: NodeId) -> float:
        return distance(self._pos[a], self._pos[b])

    def nodes(self) -> list[NodeId]:
        return sorted(self._pos)

    def step(self, dt_ms: float) -> None:
        for node in sorted(self._paths):
            path = self._paths[node]
            remaining = path.speed_mps * dt_ms / 1000.0
            pos = self._pos[node]
            while remaining > 0:
                target = path.target()
                if target is None:
                    break
                gap = distance(pos, target)
                if gap <= remaining:
                    pos = target
                    remaining -= gap
                    path.advance_target()
                    # guard against zero-length segments looping forever
                    if path.target() == pos:
                        path.advance_target()
                else:
                    frac = remaining / gap
                    dx = (target[0] - pos[0]) * frac
                    dy = (target[1] - pos[1]) * frac
                    pos = (pos[0] + dx, pos[1] + dy, pos[2] + (target[2] - pos[2]) * frac)
                    if abs(dx) > 1e-12 or abs(dy) > 1e-12:
                        self._heading[node] = math.atan2(dy, dx)
                    remaining = 0.0
            self._pos[node] = pos


# Rough equirectangular mapping for telemetry display; the emulator itself
# works purely in ENU meters.
ORIGIN_LAT = 26.5123
ORIGIN_LON = 80.2329
_M_PER_DEG_LAT = 111_320.0


def enu_to_geodetic(position: Vec3) -> Vec3:
    east, north, up = position
    lat = ORIGIN_LAT + north / _M_PER_DEG_LAT
    lon = ORIGIN_LON + east / (_M_PER_DEG_LAT * math.cos(math.radians(ORIGIN_LAT)))
    return (lat, lon, max(0.0, up))
