"""Closed-form average age of information for the M/G/1 relay queue.

Service is a geometric number of full two-hop rounds, each lasting
``n T + upsilon`` seconds; arrivals are Poisson(lambda).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .finite_blocklength import ErrorMethod, ErrorReport, system_error
from .link_model import SystemConfig

# relative guard band on 1/lambda - E[s]
STABILITY_GUARD = 1e-9


class InstabilityError(ArithmeticError):
    """The queue is unstable (E[s] >= 1/lambda); the mean wait diverges."""


def retransmission_pmf(eps: float, m: int) -> float:
    """Probability that delivery takes exactly ``m`` rounds."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps!r}")
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    return (1.0 - eps) * eps ** (int(m) - 1)


@dataclass(frozen=True)
class ServiceMoments:
    mean_s: float
    second_moment_s: float
    mgf_neg_lambda: float
    attempt_duration: float
    eps: float
    utilization: float

    @property
    def stable(self) -> bool:
        return is_stable(self.mean_s, self.utilization / self.mean_s)


def is_stable(mean_s: float, lam: float) -> bool:
    inv = 1.0 / lam
    return inv - mean_s > STABILITY_GUARD * inv


def service_moments(eps: float, n_total: float, T: float, upsilon: float, lam: float) -> ServiceMoments:
    """First two moments and the Laplace transform at ``lam`` of the service time."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps!r}")
    if not (n_total > 0 and T > 0 and upsilon >= 0 and lam > 0):
        raise ValueError("need n_total > 0, T > 0, upsilon >= 0, lambda > 0")
    d = n_total * T + upsilon
    mean_s = d / (1.0 - eps)
    second = d * d * (1.0 + eps) / (1.0 - eps) ** 2
    decay = math.exp(-d * lam)
    mgf = (1.0 - eps) * decay / (1.0 - eps * decay)
    return ServiceMoments(mean_s, second, mgf, d, eps, lam * mean_s)


def moments_for(cfg: SystemConfig, eps: float) -> ServiceMoments:
    return service_moments(eps, cfg.n_total, cfg.symbol_duration_s, cfg.channel_delay_s, cfg.lambda_rate)


def pk_mean_wait(moments: ServiceMoments, lam: float) -> float:
    """Pollaczek-Khinchine mean queueing delay ``E[s^2] / (2 (1/lam - E[s]))``."""
    if not is_stable(moments.mean_s, lam):
        raise InstabilityError(f"E[s]={moments.mean_s:.6g} s >= 1/lambda={1 / lam:.6g} s")
    return moments.second_moment_s / (2.0 * (1.0 / lam - moments.mean_s))


@dataclass(frozen=True)
class AoiEstimate:
    """Average age, either analytic or simulated.

    ``aaoi`` is ``inf`` when the queue is unstable.  For analytic estimates
    ``breakdown`` holds the service, waiting and inter-delivery terms whose
    sum is ``aaoi``.
    """

    aaoi: float
    stable: bool
    breakdown: tuple[float, float, float] | None
    source: str = "analytic"
    ci_halfwidth: float | None = None
    moments: ServiceMoments | None = None
    errors: ErrorReport | None = None


def aaoi_from_moments(moments: ServiceMoments, lam: float) -> AoiEstimate:
    if not is_stable(moments.mean_s, lam):
        return AoiEstimate(math.inf, False, None, moments=moments)
    slack = 1.0 / lam - moments.mean_s
    terms = (
        moments.mean_s,
        moments.second_moment_s / (2.0 * slack),
        slack / moments.mgf_neg_lambda,
    )
    return AoiEstimate(math.fsum(terms), True, terms, moments=moments)


def aaoi_for_eps(cfg: SystemConfig, eps: float) -> AoiEstimate:
    """Average age of ``cfg`` with the round error probability forced to ``eps``."""
    if eps >= 1.0:
        return AoiEstimate(math.inf, False, None)
    return aaoi_from_moments(moments_for(cfg, eps), cfg.lambda_rate)


def aaoi_analytic(cfg: SystemConfig, error_method: ErrorMethod = "closed_form") -> AoiEstimate:
    """Closed-form average age of ``cfg``.

    Instability (including a certain-failure link) is returned as
    ``stable=False`` with ``aaoi = inf``; it never raises.
    """
    report = system_error(cfg, error_method)
    est = aaoi_for_eps(cfg, report.eps_overall)
    return AoiEstimate(est.aaoi, est.stable, est.breakdown, "analytic", None, est.moments, report)


def stability_limit(cfg: SystemConfig, eps: float) -> float:
    """Largest stable update rate ``(1 - eps) / (n T + upsilon)``."""
    return (1.0 - eps) / cfg.attempt_duration
