"""Finite-blocklength block error probabilities over Rayleigh fading.

Two routes to the fading-averaged error of one hop:

* :func:`avg_error_closed_form` -- analytic integral of the piecewise-linear
  approximation of the normal-approximation kernel against the exponential
  SNR density.
* :func:`avg_error_quadrature` -- adaptive numerical integration with either
  the same linearized kernel or the exact Q-function kernel.  This is the
  independent oracle for the closed form.

Per-hop errors are combined into the decode-and-forward error with
:func:`overall_df_error`.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate, special

from .link_model import LinkBudget, SystemConfig, build_link_budgets

LOG2E = math.log2(math.e)
DISPERSION_LIMIT = LOG2E**2 / 2.0

ErrorMethod = Literal["closed_form", "quadrature_linearized", "quadrature_exact"]
ERROR_METHODS = ("closed_form", "quadrature_linearized", "quadrature_exact")

# exponential weight below this fraction of its peak is dropped
_WEIGHT_FLOOR = 1e-16
# Q(40) ~ 1e-350, the exact kernel is identically zero in double beyond this
_Q_ARG_CUTOFF = 40.0
_QUAD_EPSREL = 1e-12
_QUAD_TARGET_REL = 1e-9


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested accuracy."""


# ---------------------------------------------------------------------------
# clamp diagnostics

_clamp_lock = threading.Lock()
_clamp_events = 0


def clamp_count() -> int:
    """Number of closed-form evaluations clamped into [0, 1] so far."""
    return _clamp_events


def reset_clamp_count() -> None:
    global _clamp_events
    with _clamp_lock:
        _clamp_events = 0


def _clamp_probability(p: float) -> float:
    global _clamp_events
    if 0.0 <= p <= 1.0:
        return p
    with _clamp_lock:
        _clamp_events += 1
    return min(max(p, 0.0), 1.0)


# ---------------------------------------------------------------------------
# AWGN finite-blocklength building blocks

def q_function(x):
    """Gaussian tail probability ``Q(x) = P(N(0, 1) > x)``."""
    return special.ndtr(-np.asarray(x, dtype=float))[()]


def capacity(gamma):
    """AWGN capacity ``log2(1 + gamma)`` in bits per channel use."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SNR must be non-negative")
    return (np.log1p(gamma) * LOG2E)[()]


def dispersion(gamma):
    """AWGN channel dispersion in squared bits per channel use."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SNR must be non-negative")
    # 1 - 1/(1+g)^2, rewritten below g = 1 to avoid cancellation
    small = np.minimum(gamma, 1.0)
    frac = np.where(
        gamma < 1.0,
        small * (2.0 + small) / (1.0 + small) ** 2,
        1.0 - (1.0 / (1.0 + np.maximum(gamma, 1.0))) ** 2,
    )
    return (DISPERSION_LIMIT * frac)[()]


def conditional_error(gamma, n_hop: float, k: float):
    """Normal-approximation block error at a fixed SNR.

    ``Q((n C(gamma) - k) / sqrt(n V(gamma)))``; exactly 1 at ``gamma == 0``.
    Accepts arrays of SNRs.
    """
    if n_hop < 1 or k < 1:
        raise ValueError("n_hop and k must be >= 1")
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SNR must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = (n_hop * capacity(gamma) - k) / np.sqrt(n_hop * dispersion(gamma))
        out = special.ndtr(-arg)
    out = np.where(gamma == 0, 1.0, out)
    out = np.where(np.isinf(gamma), 0.0, out)
    return out[()]


# ---------------------------------------------------------------------------
# linearized kernel

@dataclass(frozen=True)
class ApproxParams:
    """Slope and breakpoints of the piecewise-linear kernel.

    The kernel is 1 below ``phi_lo``, 0 above ``delta_hi`` and falls
    linearly through 1/2 at ``psi`` in between.
    """

    beta: float
    psi: float
    phi_lo: float
    delta_hi: float
    n_hop: float

    @property
    def width(self) -> float:
        """``delta_hi - phi_lo == 1 / (beta sqrt(n))``."""
        return self.delta_hi - self.phi_lo


def approx_params(n_hop: float, k: float) -> ApproxParams:
    if n_hop < 1 or k < 1:
        raise ValueError("n_hop and k must be >= 1")
    if k / n_hop > 500:
        raise ValueError(f"rate k/n = {k / n_hop:g} bits per channel use is outside double range")
    rate_ln = k / n_hop * math.log(2.0)
    beta = 1.0 / (2.0 * math.pi * math.sqrt(math.expm1(2.0 * rate_ln)))
    psi = math.expm1(rate_ln)
    half = 1.0 / (2.0 * beta * math.sqrt(n_hop))
    return ApproxParams(beta, psi, psi - half, psi + half, n_hop)


def linearized_kernel(z, params: ApproxParams):
    z = np.asarray(z, dtype=float)
    slope = params.beta * math.sqrt(params.n_hop)
    mid = 0.5 - slope * (z - params.psi)
    return np.where(z <= params.phi_lo, 1.0, np.where(z >= params.delta_hi, 0.0, mid))[()]


def _h(t: float) -> float:
    """``t - 1 + exp(-t)``, accurate for small ``t``."""
    if abs(t) < 0.1:
        # alternating Taylor tail, truncation error < t**12 / 12!
        term, total = t * t / 2.0, 0.0
        for j in range(3, 13):
            total += term
            term *= -t / j
        return total
    return t + math.expm1(-t)


def avg_error_closed_form(budget: LinkBudget, k: float) -> float:
    """Fading-averaged hop error from the linearized kernel, in closed form.

    For ``phi_lo >= 0`` this is
    ``1 - beta sqrt(n) g (exp(-phi_lo/g) - exp(-delta_hi/g))`` with ``g`` the
    average SNR.  It is evaluated as the divided difference
    ``(h(delta_hi/g) - h(phi_lo/g)) / (width/g)``, ``h(t) = t - 1 + e^-t``,
    which is algebraically identical but keeps full relative precision when
    the error is tiny.  When ``phi_lo < 0`` the SNR density has no mass below
    zero, so the integral starts at 0 instead and ``h(0) = 0`` replaces
    ``h(phi_lo/g)``.
    """
    p = approx_params(budget.n_hop, k)
    g = budget.avg_snr
    if not g > 0:
        raise ValueError("average SNR must be positive")
    y = p.delta_hi / g
    x = p.width / g
    u = max(p.phi_lo, 0.0) / g
    if math.isinf(x):
        return _clamp_probability(1.0)
    eps = (_h(y) - _h(u)) / x
    return _clamp_probability(eps)


# ---------------------------------------------------------------------------
# quadrature oracle

def _segments(points, lo, hi):
    pts = sorted({min(max(p, lo), hi) for p in points} | {lo, hi})
    return [(a, b) for a, b in zip(pts[:-1], pts[1:]) if b > a]


def avg_error_quadrature(
    budget: LinkBudget,
    k: float,
    kernel: Literal["exact", "linearized"] = "exact",
) -> float:
    """Fading-averaged hop error by adaptive quadrature.

    Integrates ``exp(-z/g)/g * K(z)`` over ``z >= 0``.  The range is split at
    the kernel breakpoints and truncated where the exponential weight drops
    below 1e-16 of its peak (the dropped tail is bounded by that amount).

    Raises
    ------
    QuadratureError
        If the combined error estimate over all segments is not finite or
        exceeds 1e-9 relative.
    """
    g = budget.avg_snr
    n = budget.n_hop
    if not g > 0:
        raise ValueError("average SNR must be positive")
    p = approx_params(n, k)
    z_max = g * math.log(1.0 / _WEIGHT_FLOOR)

    if kernel == "linearized":
        slope = p.beta * math.sqrt(n)

        def kern(z):
            if z <= p.phi_lo:
                return 1.0
            if z >= p.delta_hi:
                return 0.0
            return 0.5 - slope * (z - p.psi)

        upper = min(p.delta_hi, z_max)
        breaks = [p.phi_lo, p.psi]
    elif kernel == "exact":
        vn = math.sqrt(n)

        def kern(z):
            if z <= 0.0:
                return 1.0
            c = math.log1p(z) * LOG2E
            v = DISPERSION_LIMIT * (z * (2.0 + z) / (1.0 + z) ** 2)
            return float(special.ndtr(-(n * c - k) / (vn * math.sqrt(v))))

        z_kernel = math.expm1((k + _Q_ARG_CUTOFF * math.sqrt(n * DISPERSION_LIMIT)) / n * math.log(2.0))
        upper = min(z_kernel, z_max)
        w = p.width
        breaks = [p.psi - w, p.psi, p.psi + w, p.psi + 4 * w]
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    # extra splits on the exponential's own scale help when g << breakpoints
    breaks += [g * m for m in (1.0, 4.0, 16.0)]

    def integrand(z):
        return math.exp(-z / g) / g * kern(z)

    total, err_total, warnings = [], 0.0, []
    for a, b in _segments(breaks, 0.0, upper):
        res = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=_QUAD_EPSREL, limit=400, full_output=1)
        if len(res) > 3:
            # a negligible segment may stall on roundoff; only the total error matters
            warnings.append(f"[{a:g}, {b:g}]: {res[3].splitlines()[0]}")
        total.append(res[0])
        err_total += res[1]
    value = math.fsum(total)
    if not math.isfinite(err_total) or err_total > _QUAD_TARGET_REL * value + 1e-300:
        detail = "; ".join(warnings) or "no segment warnings"
        raise QuadratureError(f"error estimate {err_total:.3g} exceeds target for value {value:.6g} ({detail})")
    return min(max(value, 0.0), 1.0)


# ---------------------------------------------------------------------------
# two-hop combination

def overall_df_error(eps_r: float, eps_d: float) -> float:
    for name, v in (("eps_r", eps_r), ("eps_d", eps_d)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
    # a + b - ab is bitwise symmetric and keeps precision for tiny errors
    return eps_r + eps_d - eps_r * eps_d


@dataclass(frozen=True)
class ErrorReport:
    eps_sr: float
    eps_rd: float
    eps_overall: float
    method: str


def hop_error(budget: LinkBudget, k: float, method: ErrorMethod = "closed_form") -> float:
    if method == "closed_form":
        return avg_error_closed_form(budget, k)
    if method == "quadrature_linearized":
        return avg_error_quadrature(budget, k, "linearized")
    if method == "quadrature_exact":
        return avg_error_quadrature(budget, k, "exact")
    raise ValueError(f"unknown error method {method!r}; expected one of {ERROR_METHODS}")


def system_error(cfg: SystemConfig, method: ErrorMethod = "closed_form") -> ErrorReport:
    sr, rd = build_link_budgets(cfg)
    e_r = hop_error(sr, cfg.k_bits, method)
    e_d = hop_error(rd, cfg.k_bits, method)
    return ErrorReport(e_r, e_d, overall_df_error(e_r, e_d), method)


def overall_error_product_form(cfg: SystemConfig) -> float:
    """Two-hop error written directly as one minus the product of hop successes.

    Plain textbook evaluation with no cancellation safeguards and no
    ``phi_lo < 0`` branch; only meaningful at moderate SNR with positive
    lower breakpoints.  Used to cross-check :func:`system_error`.
    """
    sr, rd = build_link_budgets(cfg)
    pr = approx_params(sr.n_hop, cfg.k_bits)
    pd = approx_params(rd.n_hop, cfg.k_bits)
    gr, gd = sr.avg_snr, rd.avg_snr
    scale = pr.beta * pd.beta * cfg.n_total * math.sqrt(cfg.eta_sr * cfg.eta_rd) * gr * gd
    term_r = math.exp(-pr.phi_lo / gr) - math.exp(-pr.delta_hi / gr)
    term_d = math.exp(-pd.phi_lo / gd) - math.exp(-pd.delta_hi / gd)
    return 1.0 - scale * term_r * term_d
