"""Proactive distance-vector mesh routing.

Periodic hello beacons carry each node's neighbor set and a table digest;
receivers relax routes Bellman-Ford style. Split horizon keeps two-node
loops out of digests and a metric cap bounds pathological churn. Entries
not refreshed within EXPIRY_PERIODS hello periods expire, so physical
partitions drain from the tables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import NoRoute
from .ids import NodeId
from .messages import HelloBeacon

HELLO_PERIOD_MS = 1000.0
EXPIRY_PERIODS = 3
POISON_PERIODS = 2
MAX_METRIC = 16


@dataclass
class RouteEntry:
    next_hop: NodeId
    metric: int
    last_updated: float


@dataclass
class RoutingTable:
    owner: NodeId
    entries: dict[NodeId, RouteEntry] = field(default_factory=dict)
    # dest -> sim time until which an unreachable marker is advertised
    poisoned: dict[NodeId, float] = field(default_factory=dict)

    def digest(self, for_neighbor: Optional[NodeId] = None) -> tuple[tuple[NodeId, int], ...]:
        """(destination, metric) pairs; split horizon omits routes that go
        through the neighbor the digest is addressed to. Recently expired
        destinations are advertised at MAX_METRIC so deletion propagates
        one hop per hello period instead of one expiry generation."""
        rows = []
        for dest in sorted(self.entries):
            entry = self.entries[dest]
            if for_neighbor is not None and entry.next_hop == for_neighbor:
                continue
            rows.append((dest, entry.metric))
        for dest in sorted(self.poisoned):
            if dest not in self.entries:
                rows.append((dest, MAX_METRIC))
        return tuple(rows)

    def dump_rows(self) -> list[tuple[str, str, str, int]]:
        return [
            (self.owner.label, dest.label, e.next_hop.label, e.metric)
            for dest, e in sorted(self.entries.items())
        ]


def on_hello(table: RoutingTable, beacon: HelloBeacon, now: float) -> RoutingTable:
    """Relax routes from one received beacon; mutates and returns the table."""
    sender = beacon.sender
    if sender == table.owner:
        return table
    direct = table.entries.get(sender)
    if direct is None or direct.metric >= 1 or direct.next_hop == sender:
        table.entries[sender] = RouteEntry(sender, 1, now)
    for dest, metric in beacon.table_digest:
        if dest == table.owner:
            continue
        candidate = metric + 1
        current = table.entries.get(dest)
        if metric >= MAX_METRIC:
            # unreachable marker: drop our route if it goes through the sender
            if current is not None and current.next_hop == sender:
                del table.entries[dest]
                table.poisoned[dest] = now + POISON_PERIODS * HELLO_PERIOD_MS
            continue
        if candidate > MAX_METRIC:
            continue
        current = table.entries.get(dest)
        if current is None or candidate < current.metric:
            table.entries[dest] = RouteEntry(sender, candidate, now)
            table.poisoned.pop(dest, None)
        elif current.next_hop == sender:
            # route already goes through the sender: track its metric even
            # when it worsened, and refresh the timestamp
            current.metric = candidate
            current.last_updated = now
    return table


def expire(table: RoutingTable, now: float, hello_period_ms: float = HELLO_PERIOD_MS) -> list[NodeId]:
    """Drop entries not refreshed within EXPIRY_PERIODS hello periods."""
    horizon = now - EXPIRY_PERIODS * hello_period_ms
    stale = [dest for dest, e in table.entries.items() if e.last_updated < horizon]
    for dest in stale:
        del table.entries[dest]
        table.poisoned[dest] = now + POISON_PERIODS * hello_period_ms
    done = [dest for dest, until in table.poisoned.items() if until <= now]
    for dest in done:
        del table.poisoned[dest]
    return stale


def next_hop(table: RoutingTable, dest: NodeId) -> NodeId:
    entry = table.entries.get(dest)
    if entry is None:
        raise NoRoute(f"{table.owner} has no route to {dest}")
    return entry.next_hop


def has_route(table: RoutingTable, dest: NodeId) -> bool:
    return dest in table.entries
