"""Wireless-module link profiles and the profile config loader.

The built-in table mirrors the hardware actually flown: two long-range
802.11b/g/n bridges, a short-range 802.11n/ac travel router, a private-band
mesh radio, and a 4G hotspot, plus a wired LAN profile for the gateway
backhaul. Emulation constants (latency, loss, retransmission, per-frame
airtime overhead) are calibration values; the shipped calibration file
overrides the neutral defaults below.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import yaml

from .errors import ConfigError


class WirelessStandard(str, Enum):
    WIFI_BGN = "IEEE802.11b/g/n"
    WIFI_N_AC = "IEEE802.11n/ac"
    PRIVATE = "private"
    CELL_4G = "4G"
    LAN = "LAN"


class Topology(str, Enum):
    P2P = "P2P"
    P2M = "P2M"
    MESH = "MESH"


class LossModel(str, Enum):
    FLAT = "flat"  # loss_prob applies at any in-range distance
    DISTANCE = "distance"  # loss_prob * (d / max_range)^2, capped


@dataclass(frozen=True)
class LinkProfile:
    """Per-module emulation parameters for one wireless link type."""

    name: str
    standard: WirelessStandard
    data_rate_mbps: float
    max_range_m: float  # math.inf for backhaul links
    topology_support: frozenset[Topology]
    base_latency_ms: float = 1.0
    loss_prob: float = 0.0
    retx_timeout_ms: float = 20.0
    retx_limit: int = 3
    # fixed per-frame airtime beyond serialization (contention, RTS/CTS,
    # aggregation overhead); applied to frames above bulk_threshold_bytes
    bulk_overhead_ms: float = 0.0
    bulk_threshold_bytes: int = 1024
    loss_model: LossModel = LossModel.FLAT
    loss_cap: float = 0.9
    queue_cap_bytes: int = 1 << 20

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError(f"{self.name}.loss_prob: must be in [0, 1], got {self.loss_prob}")
        if self.data_rate_mbps <= 0:
            raise ConfigError(f"{self.name}.data_rate_mbps: must be > 0")
        if self.retx_limit < 0:
            raise ConfigError(f"{self.name}.retx_limit: must be >= 0")
        if self.max_range_m <= 0:
            raise ConfigError(f"{self.name}.max_range_m: must be > 0")

    def serialization_ms(self, frame_bytes: int) -> float:
        return frame_bytes * 8.0 / (self.data_rate_mbps * 1e6) * 1000.0

    def airtime_ms(self, frame_bytes: int) -> float:
        extra = self.bulk_overhead_ms if frame_bytes > self.bulk_threshold_bytes else 0.0
        return self.serialization_ms(frame_bytes) + extra

    def loss_at(self, distance_m: float) -> float:
        if self.loss_model is LossModel.FLAT:
            return self.loss_prob
        if not math.isfinite(self.max_range_m):
            return self.loss_prob
        scaled = self.loss_prob * (distance_m / self.max_range_m) ** 2
        return min(self.loss_cap, scaled)


_ALL_TOPOS = frozenset({Topology.P2P, Topology.P2M, Topology.MESH})

# Radio catalog. AlfaTube's range is only specified as "long range" by the
# vendor sheet; 1000 m is a stand-in, not a datasheet figure.
BUILTIN_PROFILES: dict[str, LinkProfile] = {
    p.name: p
    for p in (
        LinkProfile(
            name="AlfaTube 2H",
            standard=WirelessStandard.WIFI_BGN,
            data_rate_mbps=150.0,
            max_range_m=1000.0,
            topology_support=_ALL_TOPOS,
        ),
        LinkProfile(
            name="Ubiquiti Bullet M2",
            standard=WirelessStandard.WIFI_BGN,
            data_rate_mbps=100.0,
            max_range_m=50_000.0,
            topology_support=_ALL_TOPOS,
        ),
        LinkProfile(
            name="TPLink WR902AC",
            standard=WirelessStandard.WIFI_N_AC,
            data_rate_mbps=300.0,
            max_range_m=433.0,
            topology_support=_ALL_TOPOS,
        ),
        LinkProfile(
            name="Microhard pMDDL2450",
            standard=WirelessStandard.PRIVATE,
            data_rate_mbps=25.0,
            max_range_m=20_000.0,
            topology_support=_ALL_TOPOS,
        ),
        LinkProfile(
            name="JioFi JMR540",
            standard=WirelessStandard.CELL_4G,
            data_rate_mbps=150.0,
            max_range_m=math.inf,
            topology_support=frozenset({Topology.P2P}),
        ),
        LinkProfile(
            name="LAN",
            standard=WirelessStandard.LAN,
            data_rate_mbps=1000.0,
            max_range_m=math.inf,
            topology_support=frozenset({Topology.P2P}),
            base_latency_ms=0.2,
        ),
    )
}

WIFI_PROFILE_NAMES = ("AlfaTube 2H", "Ubiquiti Bullet M2", "TPLink WR902AC")

_REQUIRED_NEW_FIELDS = ("standard", "data_rate_mbps", "max_range_m", "topology_support")
_TUNABLE_FIELDS = {
    f.name
    for f in dataclasses.fields(LinkProfile)
    if f.name not in ("name", "standard", "topology_support")
}


def _coerce(name: str, key: str, value):
    if key == "standard":
        try:
            return WirelessStandard(value)
        except ValueError:
            raise ConfigError(f"profiles.{name}.standard: unknown standard {value!r}") from None
    if key == "topology_support":
        try:
            return frozenset(Topology(v) for v in value)
        except (ValueError, TypeError):
            raise ConfigError(f"profiles.{name}.topology_support: bad value {value!r}") from None
    if key == "loss_model":
        try:
            return LossModel(value)
        except ValueError:
            raise ConfigError(f"profiles.{name}.loss_model: bad value {value!r}") from None
    if key == "max_range_m" and value in ("inf", None):
        return math.inf
    if key in ("retx_limit", "bulk_threshold_bytes", "queue_cap_bytes"):
        return int(value)
    return float(value) if isinstance(value, (int, float)) else value


def profiles_from_mapping(doc: dict, base: Optional[dict[str, LinkProfile]] = None) -> dict[str, LinkProfile]:
    """Apply a {name: {field: value}} mapping over the built-in catalog.

    Entries naming an existing profile override fields; new names must carry
    the full radio description. Raises ConfigError with the offending path.
    """
    out = dict(BUILTIN_PROFILES if base is None else base)
    if not doc:
        return out
    if not isinstance(doc, dict):
        raise ConfigError("profiles: top level must be a mapping of name -> fields")
    for name, fields_doc in doc.items():
        if not isinstance(fields_doc, dict):
            raise ConfigError(f"profiles.{name}: must be a mapping of field -> value")
        template = out.get(name)
        if template is None and "base" in fields_doc:
            base_name = fields_doc["base"]
            if base_name not in out:
                raise ConfigError(f"profiles.{name}.base: unknown base profile {base_name!r}")
            template = replace(out[base_name], name=name)
        if template is None:
            missing = [k for k in _REQUIRED_NEW_FIELDS if k not in fields_doc]
            if missing:
                raise ConfigError(f"profiles.{name}.{missing[0]}: required for new profiles")
            template = LinkProfile(
                name=name,
                standard=_coerce(name, "standard", fields_doc["standard"]),
                data_rate_mbps=_coerce(name, "data_rate_mbps", fields_doc["data_rate_mbps"]),
                max_range_m=_coerce(name, "max_range_m", fields_doc["max_range_m"]),
                topology_support=_coerce(name, "topology_support", fields_doc["topology_support"]),
            )
        updates = {}
        for key, value in fields_doc.items():
            if key == "base":
                continue
            if key in ("standard", "topology_support") and template.name == name:
                updates[key] = _coerce(name, key, value)
                continue
            if key not in _TUNABLE_FIELDS and key not in ("data_rate_mbps",):
                raise ConfigError(f"profiles.{name}.{key}: unknown field")
            updates[key] = _coerce(name, key, value)
        out[name] = replace(template, **updates)
    return out


def load_profiles(path: Union[str, Path, None]) -> dict[str, LinkProfile]:
    """Load user profile additions/overrides; built-ins are always present."""
    if path is None:
        return dict(BUILTIN_PROFILES)
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"profiles file {path}: {exc}") from None
    if doc is None:
        return dict(BUILTIN_PROFILES)
    if isinstance(doc, dict) and "profiles" in doc:
        doc = doc["profiles"]
    return profiles_from_mapping(doc)


def calibrated_profiles() -> dict[str, LinkProfile]:
    """Built-ins with the shipped calibration overlay applied."""
    return load_profiles(Path(__file__).parent / "data" / "profiles_calibrated.yaml")
