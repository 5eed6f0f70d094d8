import math

import pytest
from hypothesis import given, strategies as st

from urllc_aoi.link_model import (
    SPEED_OF_LIGHT,
    ConfigError,
    SystemConfig,
    build_link_budgets,
    dbm_to_watts,
    path_gain,
    watts_to_dbm,
)


@pytest.mark.parametrize("dbm, watts", [(30, 1.0), (0, 1e-3), (23, 0.19952623149688798)])
def test_dbm_to_watts(dbm, watts):
    assert dbm_to_watts(dbm) == pytest.approx(watts, rel=1e-12)


@given(st.floats(min_value=1e-30, max_value=1e6))
def test_dbm_round_trip(x):
    assert dbm_to_watts(watts_to_dbm(x)) == pytest.approx(x, rel=1e-12)


def test_path_gain_unity_distance():
    f = 6e9
    assert path_gain(SPEED_OF_LIGHT / (4 * math.pi * f), f) == pytest.approx(1.0, rel=1e-14)


def test_path_gain_reference_values():
    # 40-digit evaluation of (c / (4 pi f d))^2
    assert path_gain(1000, 6e9) == pytest.approx(1.583143494411528e-11, rel=1e-12)
    assert 10 * math.log10(path_gain(1000, 6e9)) == pytest.approx(-108.0048, abs=1e-4)
    assert path_gain(500, 6e9) == pytest.approx(6.332573977646111e-11, rel=1e-12)
    assert path_gain(500, 6e9) == pytest.approx(4 * path_gain(1000, 6e9), rel=1e-14)


@given(st.floats(1.0, 1e5), st.floats(1e8, 1e11))
def test_path_gain_monotone(d, f):
    assert path_gain(2 * d, f) == pytest.approx(path_gain(d, f) / 4, rel=1e-12)
    assert path_gain(d * 1.01, f) < path_gain(d, f)
    assert path_gain(d, f * 1.01) < path_gain(d, f)


@pytest.mark.parametrize("d, f", [(0, 6e9), (-1, 6e9), (100, 0)])
def test_path_gain_rejects_non_positive(d, f):
    with pytest.raises(ValueError):
        path_gain(d, f)


def test_default_budgets():
    sr, rd = build_link_budgets(SystemConfig())
    assert sr.n_hop == 150
    assert sr.avg_snr == pytest.approx(316628698.88230505, rel=1e-12)
    assert 10 * math.log10(sr.avg_snr) == pytest.approx(85.0, abs=0.01)
    assert (sr.alpha, sr.avg_snr, sr.n_hop) == (rd.alpha, rd.avg_snr, rd.n_hop)


def test_budget_scales_with_power_and_alpha():
    base = build_link_budgets(SystemConfig())[0]
    doubled = build_link_budgets(SystemConfig(phi_s=1.0))[0]
    assert doubled.avg_snr == pytest.approx(2 * base.avg_snr, rel=1e-12)


def test_relay_moving_away_lowers_sr_snr():
    snrs = [build_link_budgets(SystemConfig(tau=t))[0].avg_snr for t in (0.3, 0.5, 0.7, 0.9, 0.99)]
    assert all(b < a for a, b in zip(snrs, snrs[1:]))


@pytest.mark.parametrize(
    "key, value",
    [("tau", 1.5), ("tau", 0.0), ("phi_s", 0.0), ("phi_r", 1.2), ("eta_sr", 1.0), ("n_total", 1),
     ("k_bits", 0), ("symbol_duration_s", 0.0), ("lambda_rate", 0.0), ("channel_delay_s", -1.0)],
)
def test_config_rejects_out_of_range(key, value):
    with pytest.raises(ConfigError) as info:
        SystemConfig(**{key: value})
    assert info.value.key == key


def test_eta_overcommit_rejected_but_undercommit_allowed():
    SystemConfig(eta_sr=0.3, eta_rd=0.4)
    with pytest.raises(ConfigError):
        SystemConfig(eta_sr=0.6, eta_rd=0.5)
