"""Discrete-event Monte Carlo of the age-of-information sawtooth.

Poisson updates queue FCFS at the source.  Each service round occupies
``n T + upsilon`` seconds and carries the update over both hops; a failure on
either hop restarts the whole round.  The destination age ``t - g(t)`` is
integrated exactly from the resulting piecewise-linear sample path.

Random streams
--------------
Every run derives four independent Philox streams from
``SeedSequence(seed, spawn_key=(replication,))``: ``arrivals``,
``fading_sr``, ``fading_rd`` and ``decoding``.  A run is a pure function of
``(cfg, horizon, seed, replication, mode)``.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import stats

from .aoi_analytics import InstabilityError, aaoi_for_eps, is_stable, moments_for, pk_mean_wait
from .finite_blocklength import conditional_error, system_error
from .link_model import SystemConfig, build_link_budgets

STREAMS = ("arrivals", "fading_sr", "fading_rd", "decoding")
WARMUP_FRACTION = 0.05
N_BATCHES = 10


@dataclass(frozen=True)
class FixedEps:
    """Simulation mode where every round fails independently with probability ``p``."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"fixed round error must lie in [0, 1), got {self.p!r}")


SAMPLED_FADING = "sampled_fading"
Mode = Union[str, FixedEps]


def fixed_eps(p: float) -> FixedEps:
    return FixedEps(float(p))


def _mode_label(mode: Mode) -> str:
    return f"fixed_eps({mode.p!r})" if isinstance(mode, FixedEps) else str(mode)


def make_streams(seed: int, replication: int | None = None) -> dict[str, np.random.Generator]:
    key = () if replication is None else (int(replication),)
    root = np.random.SeedSequence(int(seed), spawn_key=key)
    return {name: np.random.Generator(np.random.Philox(child)) for name, child in zip(STREAMS, root.spawn(len(STREAMS)))}


# ---------------------------------------------------------------------------
# sawtooth integration

@dataclass(frozen=True)
class UpdateRecord:
    gen_time: float
    depart_time: float
    attempts: int
    interarrival: float = math.nan

    @property
    def system_delay(self) -> float:
        return self.depart_time - self.gen_time


def _as_arrays(records):
    if isinstance(records, Trace):
        return records.gen_time, records.depart_time
    if len(records) == 0:
        return np.empty(0), np.empty(0)
    gen = np.array([r.gen_time for r in records], dtype=float)
    dep = np.array([r.depart_time for r in records], dtype=float)
    return gen, dep


def sawtooth_area(
    gen_time,
    depart_time,
    horizon: float,
    initial_age: float = 0.0,
    start: float = 0.0,
    origin: float = 0.0,
) -> float:
    """Exact area under the age curve over ``[start, horizon]``.

    ``initial_age`` is the age at time ``origin``; it applies until the first
    delivery.  Each delivery ``i`` resets the age to ``depart_i - gen_i``.
    Deliveries after ``horizon`` are ignored.
    """
    gen = np.asarray(gen_time, dtype=float)
    dep = np.asarray(depart_time, dtype=float)
    if gen.shape != dep.shape or gen.ndim != 1:
        raise ValueError("gen_time and depart_time must be 1-D arrays of equal length")
    if not horizon > start >= origin:
        raise ValueError("need origin <= start < horizon")
    if np.any(dep < gen):
        raise ValueError("an update departs before it is generated")
    if np.any(np.diff(dep) < 0):
        raise ValueError("records are not ordered by departure time")
    if np.any(np.diff(gen) < 0):
        raise ValueError("records overlap: generation order differs from delivery order")

    before = np.searchsorted(dep, start, side="right")
    upto = np.searchsorted(dep, horizon, side="right")
    age0 = start - gen[before - 1] if before > 0 else initial_age + (start - origin)

    cuts = np.concatenate(([start], dep[before:upto], [horizon]))
    ages = np.concatenate(([age0], dep[before:upto] - gen[before:upto]))
    lengths = np.diff(cuts)
    return math.fsum(ages * lengths) + math.fsum(0.5 * lengths * lengths)


def integrate_sawtooth(records, initial_age: float, horizon: float, start: float = 0.0, origin: float = 0.0) -> float:
    """Time-average age over ``[start, horizon]``.

    ``records`` is either a sequence of :class:`UpdateRecord` ordered by
    departure or a :class:`Trace`.
    """
    gen, dep = _as_arrays(records)
    return sawtooth_area(gen, dep, horizon, initial_age, start, origin) / (horizon - start)


# ---------------------------------------------------------------------------
# service generation

def _poisson_arrivals(rng: np.random.Generator, lam: float, horizon: float) -> np.ndarray:
    chunks, t = [], 0.0
    expected = lam * horizon
    size = int(expected + 6.0 * math.sqrt(expected) + 64)
    while True:
        times = t + np.cumsum(rng.exponential(1.0 / lam, size))
        chunks.append(times)
        t = times[-1]
        if t > horizon:
            break
        size = max(64, size // 4)
    out = np.concatenate(chunks)
    return out[out <= horizon]


def _fading_rounds(streams, budgets, n_hops, k, count):
    """Draw ``count`` two-hop rounds; returns (sr_ok, rd_ok) boolean arrays."""
    g_sr = streams["fading_sr"].exponential(1.0, count) * budgets[0].avg_snr
    g_rd = streams["fading_rd"].exponential(1.0, count) * budgets[1].avg_snr
    u = streams["decoding"].random((count, 2))
    ok_sr = u[:, 0] >= conditional_error(g_sr, n_hops[0], k)
    ok_rd = u[:, 1] >= conditional_error(g_rd, n_hops[1], k)
    return ok_sr, ok_rd


def _gaps_between_successes(next_chunk, n_updates):
    """Attempts per update from an i.i.d. stream of round outcomes."""
    positions, offset, found = [], 0, 0
    while found < n_updates:
        ok = next_chunk()
        idx = np.flatnonzero(ok) + offset
        positions.append(idx)
        found += idx.size
        offset += ok.size
    pos = np.concatenate(positions)[:n_updates]
    return np.diff(pos, prepend=-1).astype(np.int64)


@dataclass
class Trace:
    gen_time: np.ndarray
    depart_time: np.ndarray
    attempts: np.ndarray

    @property
    def age_after(self) -> np.ndarray:
        return self.depart_time - self.gen_time

    def records(self) -> list[UpdateRecord]:
        x = np.diff(self.gen_time, prepend=np.nan)
        return [UpdateRecord(float(g), float(d), int(a), float(i))
                for g, d, a, i in zip(self.gen_time, self.depart_time, self.attempts, x)]


def write_trace(path, trace: Trace) -> None:
    """Delivery trace as CSV: ``gen_time,depart_time,attempts,age_after``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gen_time", "depart_time", "attempts", "age_after"])
        for g, d, a, age in zip(trace.gen_time, trace.depart_time, trace.attempts, trace.age_after):
            w.writerow([f"{g:.17g}", f"{d:.17g}", int(a), f"{age:.17g}"])


def read_trace(path) -> Trace:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return Trace(
        np.array([float(r["gen_time"]) for r in rows]),
        np.array([float(r["depart_time"]) for r in rows]),
        np.array([int(r["attempts"]) for r in rows], dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# single run

@dataclass(frozen=True)
class SimResult:
    """Outcome of one simulated sample path.

    ``time_avg_aoi`` excludes the first 5 % of the horizon; the untrimmed
    average is kept in ``time_avg_aoi_raw``.  Queue statistics cover updates
    generated after the warm-up and delivered before the horizon.  With no
    delivery at all ``no_delivery`` is set and the ages are ``inf``.
    """

    time_avg_aoi: float
    time_avg_aoi_raw: float
    ci_halfwidth: float
    mean_delay: float
    mean_wait: float
    mean_service: float
    second_moment_service: float
    mean_attempts: float
    se_delay: float
    se_wait: float
    se_service: float
    mean_interarrival: float
    delivered_count: int
    arrivals: int
    rounds: int
    failed_rounds: int
    horizon: float
    seed: int
    replication: int | None
    mode: str
    n_hop_used: tuple[int, int]
    no_delivery: bool = False
    trace: Trace | None = field(default=None, compare=False, repr=False)


def _batch_se(values: np.ndarray, n_batches: int = 20) -> float:
    if values.size < 2 * n_batches:
        return float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    means = np.array([b.mean() for b in np.array_split(values, n_batches)])
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def simulate(
    cfg: SystemConfig,
    horizon: float,
    seed: int,
    mode: Mode = SAMPLED_FADING,
    replication: int | None = None,
    retransmit: str = "round",
    keep_trace: bool = False,
) -> SimResult:
    """Simulate the relay queue and the destination age over ``[0, horizon]``.

    Parameters
    ----------
    mode : ``"sampled_fading"`` or :class:`FixedEps`
        Sampled fading draws unit-mean exponential power gains per hop and
        per round and decodes with the exact normal-approximation error.
    retransmit : ``"round"`` or ``"per_hop"``
        ``"per_hop"`` (experimental, sampled fading only) repeats only the
        failing hop, each hop attempt lasting ``n_ij T + upsilon``.  No
        analytic counterpart exists for it.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if retransmit not in ("round", "per_hop"):
        raise ValueError(f"unknown retransmission scheme {retransmit!r}")
    if retransmit == "per_hop" and isinstance(mode, FixedEps):
        raise ValueError("per-hop retransmission needs sampled fading")
    if not isinstance(mode, FixedEps) and mode != SAMPLED_FADING:
        raise ValueError(f"unknown mode {mode!r}")

    streams = make_streams(seed, replication)
    budgets = build_link_budgets(cfg)
    n_hops = tuple(max(1, int(round(b.n_hop))) for b in budgets)
    dur = cfg.attempt_duration
    k = cfg.k_bits

    gen = _poisson_arrivals(streams["arrivals"], cfg.lambda_rate, horizon)
    n_up = gen.size

    if isinstance(mode, FixedEps):
        attempts = streams["decoding"].geometric(1.0 - mode.p, n_up).astype(np.int64)
        service = None
    elif retransmit == "round":
        chunk = max(1024, min(4 * n_up + 1024, 1 << 20))

        def next_chunk():
            ok_sr, ok_rd = _fading_rounds(streams, budgets, n_hops, k, chunk)
            return ok_sr & ok_rd

        attempts = _gaps_between_successes(next_chunk, n_up)
        service = None
    else:
        chunk = max(1024, min(4 * n_up + 1024, 1 << 20))

        def next_sr():
            ok, _ = _fading_rounds(streams, budgets, n_hops, k, chunk)
            return ok

        def next_rd():
            _, ok = _fading_rounds(streams, budgets, n_hops, k, chunk)
            return ok

        a_sr = _gaps_between_successes(next_sr, n_up)
        a_rd = _gaps_between_successes(next_rd, n_up)
        hop_time = [n * cfg.symbol_duration_s + cfg.channel_delay_s for n in n_hops]
        service = a_sr * hop_time[0] + a_rd * hop_time[1]
        attempts = a_sr + a_rd

    # FCFS departures: D_i = C_i + max_{j<=i}(g_j - C_{j-1}), C = cumulative service
    if service is None:
        rounds_cum = np.cumsum(attempts)
        busy_end = rounds_cum * dur
        busy_start = (rounds_cum - attempts) * dur
        service = attempts * dur
    else:
        busy_end = np.cumsum(service)
        busy_start = busy_end - service
    depart = busy_end + np.maximum.accumulate(gen - busy_start) if n_up else np.empty(0)

    done = depart <= horizon
    delivered = int(np.count_nonzero(done))
    warm = WARMUP_FRACTION * horizon
    rounds = int(attempts.sum())
    failed = rounds - n_up
    label = _mode_label(mode) + ("" if retransmit == "round" else "+per_hop")

    trace = Trace(gen[done], depart[done], attempts[done]) if keep_trace else None
    if delivered == 0:
        nan = math.nan
        return SimResult(math.inf, math.inf, math.inf, nan, nan, nan, nan, nan, nan, nan, nan,
                         nan, 0, n_up, rounds, failed, horizon, int(seed), replication, label,
                         n_hops, True, trace)

    g_d, d_d = gen[done], depart[done]
    raw = sawtooth_area(g_d, d_d, horizon) / horizon
    trimmed = sawtooth_area(g_d, d_d, horizon, start=warm) / (horizon - warm)
    edges = np.linspace(warm, horizon, N_BATCHES + 1)
    batches = np.array([sawtooth_area(g_d, d_d, b, start=a) / (b - a) for a, b in zip(edges[:-1], edges[1:])])
    ci = float(stats.t.ppf(0.975, N_BATCHES - 1) * batches.std(ddof=1) / math.sqrt(N_BATCHES))

    sel = done & (gen >= warm)
    if not np.any(sel):
        sel = done
    s = service[sel]
    y = depart[sel] - gen[sel]
    w = y - s
    inter = np.diff(gen)
    return SimResult(
        time_avg_aoi=trimmed,
        time_avg_aoi_raw=raw,
        ci_halfwidth=ci,
        mean_delay=float(y.mean()),
        mean_wait=float(w.mean()),
        mean_service=float(s.mean()),
        second_moment_service=float(np.mean(s * s)),
        mean_attempts=float(attempts[sel].mean()),
        se_delay=_batch_se(y),
        se_wait=_batch_se(w),
        se_service=float(s.std(ddof=1) / math.sqrt(s.size)) if s.size > 1 else math.nan,
        mean_interarrival=float(inter.mean()) if inter.size else math.nan,
        delivered_count=delivered,
        arrivals=n_up,
        rounds=rounds,
        failed_rounds=failed,
        horizon=float(horizon),
        seed=int(seed),
        replication=replication,
        mode=label,
        n_hop_used=n_hops,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# replications

@dataclass(frozen=True)
class ReplicationSummary:
    """Across-replication mean of the trimmed time-average age.

    ``ci_halfwidth`` is the 95 % Student-t half-width over replications.
    """

    time_avg_aoi: float
    ci_halfwidth: float
    runs: tuple[SimResult, ...]

    @property
    def no_delivery(self) -> bool:
        return any(r.no_delivery for r in self.runs)


def _run_one(args):
    cfg, horizon, seed, mode, rep, retransmit = args
    return simulate(cfg, horizon, seed, mode, replication=rep, retransmit=retransmit)


def replicate(
    cfg: SystemConfig,
    horizon: float,
    seed: int,
    replications: int = 10,
    mode: Mode = SAMPLED_FADING,
    workers: int | None = None,
    retransmit: str = "round",
) -> ReplicationSummary:
    """Independent replications on disjoint streams, merged in index order."""
    if replications < 2:
        raise ValueError("need at least two replications for a confidence interval")
    jobs = [(cfg, horizon, seed, mode, r, retransmit) for r in range(replications)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = tuple(pool.map(_run_one, jobs))
    else:
        runs = tuple(map(_run_one, jobs))
    values = np.array([r.time_avg_aoi for r in runs])
    if not np.all(np.isfinite(values)):
        return ReplicationSummary(math.inf, math.inf, runs)
    half = stats.t.ppf(0.975, replications - 1) * values.std(ddof=1) / math.sqrt(replications)
    return ReplicationSummary(float(values.mean()), float(half), runs)


# ---------------------------------------------------------------------------
# queue validation

@dataclass(frozen=True)
class QueueComparison:
    """Simulated versus analytic queue statistics side by side."""

    stable: bool
    eps: float
    mean_service: tuple[float, float, float] | None = None  # (simulated, analytic, se)
    second_moment_service: tuple[float, float] | None = None
    mean_wait: tuple[float, float, float] | None = None
    aaoi: tuple[float, float, float] | None = None
    delivered_count: int = 0


def validate_queue(cfg: SystemConfig, horizon: float, seed: int, mode: Mode | None = None) -> QueueComparison:
    """Compare one simulated run with the M/G/1 closed forms.

    ``mode`` defaults to a fixed round error equal to the closed-form two-hop
    error of ``cfg``.  An unstable configuration yields ``stable=False`` and
    no simulation is run.
    """
    if mode is None:
        mode = fixed_eps(system_error(cfg).eps_overall)
    eps = mode.p if isinstance(mode, FixedEps) else system_error(cfg, "quadrature_exact").eps_overall
    if eps >= 1.0:
        return QueueComparison(False, eps)
    mom = moments_for(cfg, eps)
    if not is_stable(mom.mean_s, cfg.lambda_rate):
        return QueueComparison(False, eps)
    try:
        wait = pk_mean_wait(mom, cfg.lambda_rate)
    except InstabilityError:
        return QueueComparison(False, eps)
    sim = simulate(cfg, horizon, seed, mode)
    return QueueComparison(
        stable=True,
        eps=eps,
        mean_service=(sim.mean_service, mom.mean_s, sim.se_service),
        second_moment_service=(sim.second_moment_service, mom.second_moment_s),
        mean_wait=(sim.mean_wait, wait, sim.se_wait),
        aaoi=(sim.time_avg_aoi, aaoi_for_eps(cfg, eps).aaoi, sim.ci_halfwidth),
        delivered_count=sim.delivered_count,
    )
