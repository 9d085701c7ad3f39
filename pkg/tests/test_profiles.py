import math

import pytest

from unet.errors import ConfigError
from unet.profiles import (
    BUILTIN_PROFILES,
    Topology,
    WirelessStandard,
    calibrated_profiles,
    load_profiles,
)


def test_builtin_catalog_values():
    tp = BUILTIN_PROFILES["TPLink WR902AC"]
    assert tp.data_rate_mbps == 300.0
    assert tp.max_range_m == 433.0
    assert tp.standard is WirelessStandard.WIFI_N_AC

    mh = BUILTIN_PROFILES["Microhard pMDDL2450"]
    assert mh.data_rate_mbps == 25.0
    assert Topology.MESH in mh.topology_support

    alfa = BUILTIN_PROFILES["AlfaTube 2H"]
    assert alfa.data_rate_mbps == 150.0

    bullet = BUILTIN_PROFILES["Ubiquiti Bullet M2"]
    assert bullet.data_rate_mbps == 100.0
    assert bullet.max_range_m == 50_000.0

    jio = BUILTIN_PROFILES["JioFi JMR540"]
    assert jio.data_rate_mbps == 150.0
    assert math.isinf(jio.max_range_m)
    assert jio.topology_support == frozenset({Topology.P2P})


def test_empty_file_keeps_builtins(tmp_path):
    f = tmp_path / "empty.yaml"
    f.write_text("")
    profiles = load_profiles(f)
    assert set(BUILTIN_PROFILES) <= set(profiles)


def test_user_addition_and_override(tmp_path):
    f = tmp_path / "user.yaml"
    f.write_text(
        """
profiles:
  "Microhard-short":
    base: "Microhard pMDDL2450"
    max_range_m: 200
  "TPLink WR902AC":
    loss_prob: 0.25
"""
    )
    profiles = load_profiles(f)
    assert profiles["Microhard-short"].max_range_m == 200.0
    assert profiles["Microhard-short"].data_rate_mbps == 25.0
    assert profiles["TPLink WR902AC"].loss_prob == 0.25


def test_missing_field_reports_path(tmp_path):
    f = tmp_path / "bad.yaml"
    f.write_text("profiles:\n  mystery:\n    data_rate_mbps: 10\n")
    with pytest.raises(ConfigError) as exc:
        load_profiles(f)
    assert "mystery" in str(exc.value)
    assert "standard" in str(exc.value)


def test_unknown_field_rejected(tmp_path):
    f = tmp_path / "bad2.yaml"
    f.write_text('profiles:\n  "LAN":\n    warp_factor: 9\n')
    with pytest.raises(ConfigError) as exc:
        load_profiles(f)
    assert "warp_factor" in str(exc.value)


def test_calibrated_overlay_loads():
    cal = calibrated_profiles()
    alfa = cal["AlfaTube 2H"]
    bullet = cal["Ubiquiti Bullet M2"]
    tplink = cal["TPLink WR902AC"]
    # long-range module retransmits more patiently than the others
    assert alfa.retx_timeout_ms > bullet.retx_timeout_ms
    assert alfa.retx_timeout_ms > tplink.retx_timeout_ms
    assert alfa.retx_limit > bullet.retx_limit
    assert alfa.retx_limit > tplink.retx_limit
    assert alfa.base_latency_ms > bullet.base_latency_ms
    # datasheet fields unchanged by calibration
    assert alfa.data_rate_mbps == 150.0


def test_invalid_loss_prob_rejected():
    from unet.profiles import LinkProfile

    with pytest.raises(ConfigError):
        LinkProfile(
            name="bad", standard=WirelessStandard.LAN, data_rate_mbps=10,
            max_range_m=10, topology_support=frozenset({Topology.P2P}), loss_prob=1.5,
        )
