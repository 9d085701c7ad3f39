"""Node identities and network addresses."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class NodeKind(str, Enum):
    UAV = "uav"
    GATEWAY = "gateway"
    DPSL = "dpsl"
    UI_CLIENT = "ui"


@dataclass(frozen=True, order=True)
class NodeId:
    """Stable identity of a node within one scenario."""

    kind: NodeKind
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"node index must be non-negative, got {self.index}")

    @property
    def label(self) -> str:
        return f"{self.kind.value}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        kind, _, idx = text.partition(":")
        return cls(NodeKind(kind), int(idx))

    def __str__(self) -> str:
        return self.label


def uav(index: int) -> NodeId:
    return NodeId(NodeKind.UAV, index)


def gateway(index: int) -> NodeId:
    return NodeId(NodeKind.GATEWAY, index)


def dpsl(index: int = 0) -> NodeId:
    return NodeId(NodeKind.DPSL, index)


@dataclass(frozen=True, order=True)
class Address:
    """Network-layer address (host string plus port)."""

    host: str
    port: int

    @property
    def label(self) -> str:
        return f"{self.host}:{self.port}"

    @classmethod
    def parse(cls, text: str) -> "Address":
        host, _, port = text.rpartition(":")
        return cls(host, int(port))

    def __str__(self) -> str:
        return self.label
