import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urllc_aoi.aoi_analytics import aaoi_for_eps
from urllc_aoi.aoi_simulator import (
    SAMPLED_FADING,
    Trace,
    UpdateRecord,
    fixed_eps,
    integrate_sawtooth,
    read_trace,
    replicate,
    sawtooth_area,
    simulate,
    validate_queue,
    write_trace,
)
from urllc_aoi.finite_blocklength import system_error
from urllc_aoi.link_model import SystemConfig

CFG = SystemConfig(lambda_rate=10.0)  # 0.03 s rounds


def brute_force_average(gen, dep, horizon, initial_age=0.0, steps=200_000):
    """Midpoint-rule average of t - g(t) on a fine grid."""
    t = (np.arange(steps) + 0.5) * horizon / steps
    idx = np.searchsorted(dep, t, side="right") - 1
    age = np.where(idx >= 0, t - np.asarray(gen)[np.maximum(idx, 0)], initial_age + t)
    return age.mean()


# -- sawtooth integrator -------------------------------------------------------

def test_sawtooth_no_delivery_ramp():
    assert integrate_sawtooth([], initial_age=2.0, horizon=4.0) == pytest.approx(2.0 + 4.0 / 2)


def test_sawtooth_single_update():
    rec = [UpdateRecord(gen_time=0.0, depart_time=1.0, attempts=1)]
    assert sawtooth_area([0.0], [1.0], 3.0) == pytest.approx(4.5, abs=1e-15)
    assert integrate_sawtooth(rec, initial_age=0.0, horizon=3.0) == pytest.approx(1.5, abs=1e-15)


def test_sawtooth_trapezoid_decomposition():
    # deliveries at D_i with ages Y_i; each inter-delivery gap X_i adds Y_i X_i + X_i^2 / 2
    gen = np.array([0.2, 1.0, 1.5, 4.0])
    dep = np.array([0.5, 1.7, 2.5, 4.3])
    horizon = 5.0
    y = dep - gen
    x = np.diff(np.append(dep, horizon))
    head = 0.5 * dep[0] ** 2  # initial age 0 until the first delivery
    expected = head + np.sum(y * x + 0.5 * x**2)
    assert sawtooth_area(gen, dep, horizon) == pytest.approx(expected, rel=1e-15)
    assert sawtooth_area(gen, dep, horizon) / horizon == pytest.approx(brute_force_average(gen, dep, horizon), rel=1e-6)


def test_sawtooth_window_start_inside_gap():
    gen, dep = np.array([0.0, 2.0]), np.array([1.0, 3.0])
    # on [1.5, 4]: age 1.5 -> 2.5 until t=3, then from 1 to 2
    expected = (1.5 * 1.5 + 0.5 * 1.5**2) + (1.0 * 1.0 + 0.5)
    assert sawtooth_area(gen, dep, 4.0, start=1.5) == pytest.approx(expected, rel=1e-15)


def test_sawtooth_ignores_late_deliveries():
    assert sawtooth_area([0.0, 1.0], [1.0, 9.0], 3.0) == sawtooth_area([0.0], [1.0], 3.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 2.0), st.floats(0.0, 2.0)), min_size=1, max_size=30), st.floats(-50, 50))
def test_sawtooth_translation_invariant(steps, shift):
    gaps, services = zip(*steps)
    gen = np.cumsum(gaps)
    dep = np.maximum.accumulate(gen + np.array(services))
    horizon = dep[-1] + 1.0
    base = integrate_sawtooth(Trace(gen, dep, np.ones(len(gen))), 0.7, horizon)
    moved = integrate_sawtooth(Trace(gen + shift, dep + shift, np.ones(len(gen))), 0.7, horizon + shift,
                               start=shift, origin=shift)
    assert moved == pytest.approx(base, rel=1e-9)


@pytest.mark.parametrize(
    "gen, dep",
    [([0.0, 1.0], [2.0, 1.5]),  # departures out of order
     ([1.0, 0.5], [2.0, 3.0]),  # overtaking
     ([1.0], [0.5])],           # departs before generation
)
def test_sawtooth_rejects_bad_records(gen, dep):
    with pytest.raises(ValueError):
        sawtooth_area(gen, dep, 10.0)


# -- simulator ------------------------------------------------------------------

@pytest.mark.parametrize("mode", [SAMPLED_FADING, fixed_eps(0.3)])
def test_determinism(mode):
    a = simulate(CFG, 500.0, 42, mode)
    b = simulate(CFG, 500.0, 42, mode)
    assert a == b
    assert simulate(CFG, 500.0, 43, mode) != a
    assert simulate(CFG, 500.0, 42, mode, replication=1) != a


def test_fixed_eps_zero_matches_closed_form():
    summary = replicate(CFG, 1e4, 7, 10, fixed_eps(0.0))
    target = aaoi_for_eps(CFG, 0.0).aaoi
    assert target == pytest.approx(0.13092, abs=1e-5)
    assert abs(summary.time_avg_aoi - target) <= summary.ci_halfwidth


def test_mean_attempts_geometric():
    p = 0.2
    res = simulate(CFG, 1.2e4, 3, fixed_eps(p))
    assert res.delivered_count >= 1e5
    assert res.mean_attempts == pytest.approx(1 / (1 - p), rel=0.01)


def test_interarrival_mean():
    res = simulate(CFG, 1.2e4, 11, fixed_eps(0.0))
    assert res.arrivals >= 1e5
    assert res.mean_interarrival == pytest.approx(1 / CFG.lambda_rate, rel=0.01)


def test_sample_path_properties():
    res = simulate(CFG, 2000.0, 5, fixed_eps(0.4), keep_trace=True)
    tr = res.trace
    dur = CFG.attempt_duration
    y = tr.depart_time - tr.gen_time
    assert np.all(tr.attempts >= 1)
    assert np.all(np.diff(tr.depart_time) >= 0) and np.all(np.diff(tr.gen_time) > 0)
    assert np.all(y >= tr.attempts * dur * (1 - 1e-12))
    # an update that finds the server idle waits zero: Y equals its own service
    prev = np.concatenate(([-np.inf], tr.depart_time[:-1]))
    idle = tr.gen_time >= prev
    assert np.allclose(y[idle], tr.attempts[idle] * dur, rtol=0, atol=1e-9)
    # the integrator reproduces the run's own raw average
    assert integrate_sawtooth(tr, 0.0, res.horizon) == pytest.approx(res.time_avg_aoi_raw, rel=1e-12)


def test_low_snr_fading_failure_rate_matches_quadrature():
    cfg = SystemConfig(noise_dbm=-110.0, lambda_rate=5.0)
    eps = system_error(cfg, "quadrature_exact").eps_overall
    res = simulate(cfg, 2.2e4, 9)
    assert res.rounds >= 1e5
    rate = res.failed_rounds / res.rounds
    se = math.sqrt(eps * (1 - eps) / res.rounds)
    assert abs(rate - eps) <= 3 * se


def test_no_delivery_is_explicit():
    res = simulate(SystemConfig(lambda_rate=0.01), 1.0, 1, fixed_eps(0.0))
    assert res.no_delivery and res.delivered_count == 0
    assert res.time_avg_aoi == math.inf


def test_rounding_of_hop_blocklength_recorded():
    res = simulate(SystemConfig(n_total=301), 50.0, 1)
    assert res.n_hop_used == (150, 150)  # 150.5 rounds half to even


def test_per_hop_mode_runs():
    cfg = SystemConfig(noise_dbm=-110.0, lambda_rate=5.0)
    res = simulate(cfg, 500.0, 2, retransmit="per_hop")
    assert res.mode.endswith("per_hop")
    assert res.mean_attempts >= 2.0
    with pytest.raises(ValueError):
        simulate(cfg, 10.0, 2, fixed_eps(0.1), retransmit="per_hop")


def test_bad_arguments():
    with pytest.raises(ValueError):
        simulate(CFG, 0.0, 1)
    with pytest.raises(ValueError):
        simulate(CFG, 10.0, 1, mode="awgn")
    with pytest.raises(ValueError):
        fixed_eps(1.0)


def test_trace_export_round_trip(tmp_path):
    res = simulate(CFG, 50.0, 4, fixed_eps(0.3), keep_trace=True)
    path = tmp_path / "trace.csv"
    write_trace(path, res.trace)
    lines = path.read_text().splitlines()
    assert lines[0] == "gen_time,depart_time,attempts,age_after"
    assert len(lines) == res.delivered_count + 1
    back = read_trace(path)
    assert np.array_equal(back.gen_time, res.trace.gen_time)
    assert np.array_equal(back.depart_time, res.trace.depart_time)
    assert np.array_equal(back.attempts, res.trace.attempts)


def test_replications_parallel_equals_serial():
    a = replicate(CFG, 200.0, 5, 4, fixed_eps(0.1))
    b = replicate(CFG, 200.0, 5, 4, fixed_eps(0.1), workers=2)
    assert a == b


def test_validate_queue_small():
    q = validate_queue(CFG, 2e4, 1, fixed_eps(0.2))
    sim_s, ana_s, se_s = q.mean_service
    assert ana_s == pytest.approx(0.0375, rel=1e-14)
    assert abs(sim_s - ana_s) <= 4 * se_s
    assert q.mean_wait[1] == pytest.approx(0.0135, rel=1e-12)


def test_validate_queue_unstable():
    q = validate_queue(CFG.with_(lambda_rate=40.0), 100.0, 1, fixed_eps(0.0))
    assert not q.stable and q.mean_wait is None
