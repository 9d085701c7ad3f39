"""Wireless link emulation: per-link rate shaping, latency, Bernoulli loss,
range-gated liveness, and FIFO queues with drop-tail byte caps.

Retransmission is deliberately NOT handled here; reliable senders live in
channels.py and react to missing acknowledgments. The link applies loss per
transmission attempt and keeps conservation counters per direction.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import AlreadyExists, LinkDown
from .ids import NodeId
from .mobility import Mobility
from .profiles import LinkProfile
from .sim import Simulator

ReceiveCallback = Callable[["Link", NodeId, bytes], None]


@dataclass
class DirectionCounters:
    offered: int = 0
    offered_bytes: int = 0
    delivered: int = 0
    delivered_bytes: int = 0
    lost: int = 0
    lost_bytes: int = 0
    queue_dropped: int = 0
    queue_dropped_bytes: int = 0
    down_dropped: int = 0
    down_dropped_bytes: int = 0


@dataclass
class _Direction:
    queue: deque = field(default_factory=deque)  # (frame, enq_time, category)
    queued_bytes: int = 0
    serving: bool = False
    in_flight: int = 0
    counters: DirectionCounters = field(default_factory=DirectionCounters)


@dataclass(frozen=True)
class TraceRow:
    time_ms: float
    link_id: int
    event: str  # OFFER | DELIVER | LOSS | QUEUE_DROP | DOWN_DROP
    frame_bytes: int
    sender: NodeId
    category: str


class Link:
    """One bidirectional link between two registered nodes."""

    def __init__(self, link_id: int, a: NodeId, b: NodeId, profile: LinkProfile) -> None:
        self.link_id = link_id
        self.a = a
        self.b = b
        self.profile = profile
        self.dirs: dict[NodeId, _Direction] = {a: _Direction(), b: _Direction()}

    def peer_of(self, node: NodeId) -> NodeId:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise KeyError(f"{node} is not an endpoint of link {self.link_id}")

    def counters(self, sender: NodeId) -> DirectionCounters:
        return self.dirs[sender].counters

    def flush(self) -> None:
        """Drop everything queued in both directions (interface restart)."""
        for d in self.dirs.values():
            for frame, _enq, _cat in d.queue:
                d.counters.down_dropped += 1
                d.counters.down_dropped_bytes += len(frame)
            d.queue.clear()
            d.queued_bytes = 0


class LinkEmulator:
    def __init__(self, sim: Simulator, mobility: Mobility, keep_trace: bool = False) -> None:
        self.sim = sim
        self.mobility = mobility
        self.keep_trace = keep_trace
        self.trace: list[TraceRow] = []
        self._links: dict[int, Link] = {}
        self._by_pair: dict[frozenset, int] = {}
        self._by_node: dict[NodeId, list[int]] = {}
        self._receivers: dict[NodeId, ReceiveCallback] = {}
        self._next_id = 1
        self.delivery_tap: Optional[Callable[[Link, NodeId, bytes, str], None]] = None
        # per-second byte buckets keyed (node, category, second): offered on
        # transmit, so control-plane accounting sees retries and drops too
        self.offer_buckets: dict[tuple[NodeId, str, int], int] = {}

    # --- wiring -------------------------------------------------------------

    def attach_link(self, a: NodeId, b: NodeId, profile: LinkProfile) -> int:
        if a == b:
            raise ValueError("cannot attach a node to itself")
        key = frozenset((a, b))
        if key in self._by_pair:
            raise AlreadyExists(f"link {a}<->{b} already attached")
        link_id = self._next_id
        self._next_id += 1
        self._links[link_id] = Link(link_id, a, b, profile)
        self._by_pair[key] = link_id
        self._by_node.setdefault(a, []).append(link_id)
        self._by_node.setdefault(b, []).append(link_id)
        return link_id

    def set_receiver(self, node: NodeId, callback: ReceiveCallback) -> None:
        self._receivers[node] = callback

    def link(self, link_id: int) -> Link:
        return self._links[link_id]

    def link_between(self, a: NodeId, b: NodeId) -> Optional[Link]:
        link_id = self._by_pair.get(frozenset((a, b)))
        return self._links[link_id] if link_id is not None else None

    def links_of(self, node: NodeId) -> list[Link]:
        return [self._links[i] for i in self._by_node.get(node, [])]

    def neighbors(self, node: NodeId, live_only: bool = True) -> list[NodeId]:
        peers = []
        for link in self.links_of(node):
            if not live_only or self.is_live(link):
                peers.append(link.peer_of(node))
        return sorted(peers)

    # --- liveness -----------------------------------------------------------

    def link_distance(self, link: Link) -> float:
        if math.isinf(link.profile.max_range_m):
            return 0.0
        return self.mobility.distance_between(link.a, link.b)

    def is_live(self, link: Link) -> bool:
        if math.isinf(link.profile.max_range_m):
            return True
        return self.link_distance(link) <= link.profile.max_range_m

    # --- data path ----------------------------------------------------------

    def transmit(self, link_id: int, sender: NodeId, frame: bytes, category: str = "data") -> None:
        """Offer one frame for transmission; raises LinkDown if out of range."""
        link = self._links[link_id]
        if not self.is_live(link):
            raise LinkDown(f"link {link.a}<->{link.b} is down")
        d = link.dirs[sender]
        c = d.counters
        c.offered += 1
        c.offered_bytes += len(frame)
        bucket = (sender, category, int(self.sim.now // 1000))
        self.offer_buckets[bucket] = self.offer_buckets.get(bucket, 0) + len(frame)
        self._trace(link, "OFFER", frame, sender, category)
        if d.queued_bytes + len(frame) > link.profile.queue_cap_bytes:
            c.queue_dropped += 1
            c.queue_dropped_bytes += len(frame)
            self._trace(link, "QUEUE_DROP", frame, sender, category)
            return
        d.queue.append((frame, self.sim.now, category))
        d.queued_bytes += len(frame)
        if not d.serving:
            d.serving = True
            self._serve(link, sender)

    def _serve(self, link: Link, sender: NodeId) -> None:
        d = link.dirs[sender]
        while d.queue:
            frame, _enq, category = d.queue.popleft()
            d.queued_bytes -= len(frame)
            if not self.is_live(link):
                d.counters.down_dropped += 1
                d.counters.down_dropped_bytes += len(frame)
                self._trace(link, "DOWN_DROP", frame, sender, category)
                continue
            airtime = link.profile.airtime_ms(len(frame))
            d.in_flight += 1
            self.sim.after(airtime, lambda f=frame, c=category: self._complete(link, sender, f, c))
            return
        d.serving = False

    def _complete(self, link: Link, sender: NodeId, frame: bytes, category: str) -> None:
        d = link.dirs[sender]
        d.in_flight -= 1
        p = link.profile.loss_at(self.link_distance(link))
        if self.sim.chance(p):
            d.counters.lost += 1
            d.counters.lost_bytes += len(frame)
            self._trace(link, "LOSS", frame, sender, category)
        else:
            receiver = link.peer_of(sender)
            d.in_flight += 1
            self.sim.after(
                link.profile.base_latency_ms,
                lambda: self._deliver(link, sender, receiver, frame, category),
            )
        self._serve(link, sender)

    def _deliver(self, link: Link, sender: NodeId, receiver: NodeId, frame: bytes, category: str) -> None:
        d = link.dirs[sender]
        d.in_flight -= 1
        d.counters.delivered += 1
        d.counters.delivered_bytes += len(frame)
        self._trace(link, "DELIVER", frame, sender, category)
        if self.delivery_tap is not None:
            self.delivery_tap(link, sender, frame, category)
        callback = self._receivers.get(receiver)
        if callback is not None:
            callback(link, sender, frame)

    def _trace(self, link: Link, event: str, frame: bytes, sender: NodeId, category: str) -> None:
        if self.keep_trace:
            self.trace.append(TraceRow(self.sim.now, link.link_id, event, len(frame), sender, category))

    # --- accounting ---------------------------------------------------------

    def conservation_ok(self, link_id: int) -> bool:
        link = self._links[link_id]
        for node, d in link.dirs.items():
            c = d.counters
            accounted = c.delivered + c.lost + c.queue_dropped + c.down_dropped
            if accounted + len(d.queue) + d.in_flight != c.offered:
                return False
        return True

    def trace_csv_rows(self) -> list[tuple]:
        return [
            (row.time_ms, row.link_id, row.event, row.frame_bytes, row.sender.label, row.category)
            for row in self.trace
        ]
