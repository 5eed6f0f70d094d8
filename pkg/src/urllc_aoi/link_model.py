"""Physical link budget for the two-hop decode-and-forward relay.

Turns the deployment parameters (distances, carrier, powers, noise) into
per-hop average SNRs and blocklength allocations.  All quantities are kept
in SI linear units internally; dB and dBm only appear in ``SystemConfig``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

SPEED_OF_LIGHT = 3e8  # m/s

HOP_SR = "S->R"
HOP_RD = "R->D"


class ConfigError(ValueError):
    """Invalid configuration value.  ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    if p_watts <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_watts) + 30.0


def path_gain(distance: float, carrier: float) -> float:
    """Free-space large-scale gain ``(c / (4 pi f d))**2`` (linear).

    Parameters
    ----------
    distance : float
        Link distance in meters.
    carrier : float
        Carrier frequency in Hz.
    """
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance!r}")
    if not carrier > 0:
        raise ValueError(f"carrier must be positive, got {carrier!r}")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * carrier * distance)) ** 2


@dataclass(frozen=True)
class SystemConfig:
    """Full parameter set of the relay link.

    Defaults are the reference deployment: 1 km link with the relay half
    way, 23 dBm shared equally, 300 channel uses split equally, 100-bit
    updates, 0.1 ms symbols and 22 updates/s.
    """

    distance_m: float = 1000.0
    tau: float = 0.5
    total_power_dbm: float = 23.0
    phi_s: float = 0.5
    phi_r: float = 0.5
    noise_dbm: float = -167.0
    carrier_hz: float = 6e9
    n_total: float = 300
    eta_sr: float = 0.5
    eta_rd: float = 0.5
    k_bits: float = 100
    symbol_duration_s: float = 1e-4
    channel_delay_s: float = 0.0
    lambda_rate: float = 22.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f.name, f"expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f.name, f"must be finite, got {value!r}")
        if not self.distance_m > 0:
            raise ConfigError("distance_m", "must be > 0")
        if not 0 < self.tau < 1:
            raise ConfigError("tau", f"must lie in (0, 1), got {self.tau}")
        for key in ("phi_s", "phi_r"):
            if not 0 < getattr(self, key) <= 1:
                raise ConfigError(key, f"must lie in (0, 1], got {getattr(self, key)}")
        for key in ("eta_sr", "eta_rd"):
            if not 0 < getattr(self, key) < 1:
                raise ConfigError(key, f"must lie in (0, 1), got {getattr(self, key)}")
        # tiny slack so that complementary sweeps (eta, 1 - eta) are accepted
        if self.eta_sr + self.eta_rd > 1 + 1e-12:
            raise ConfigError("eta_rd", "eta_sr + eta_rd must not exceed 1")
        if not self.carrier_hz > 0:
            raise ConfigError("carrier_hz", "must be > 0")
        if not self.n_total >= 2:
            raise ConfigError("n_total", f"must be >= 2, got {self.n_total}")
        if not self.k_bits >= 1:
            raise ConfigError("k_bits", f"must be >= 1, got {self.k_bits}")
        if not self.symbol_duration_s > 0:
            raise ConfigError("symbol_duration_s", "must be > 0")
        if not self.channel_delay_s >= 0:
            raise ConfigError("channel_delay_s", "must be >= 0")
        if not self.lambda_rate > 0:
            raise ConfigError("lambda_rate", "must be > 0")

    @property
    def attempt_duration(self) -> float:
        """Time occupied by one full two-hop round, ``n T + upsilon``."""
        return self.n_total * self.symbol_duration_s + self.channel_delay_s

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LinkBudget:
    hop_id: str
    alpha: float
    avg_snr: float
    n_hop: float


def build_link_budgets(cfg: SystemConfig) -> tuple[LinkBudget, LinkBudget]:
    """Per-hop budgets ``(S->R, R->D)``.

    Fractional blocklengths ``eta * n`` are kept as real numbers.
    """
    p_total = dbm_to_watts(cfg.total_power_dbm)
    noise = dbm_to_watts(cfg.noise_dbm)

    def hop(hop_id, distance, phi, eta):
        alpha = path_gain(distance, cfg.carrier_hz)
        if eta * cfg.n_total < 1:
            raise ConfigError("n_total", f"hop {hop_id} gets fewer than one channel use")
        return LinkBudget(hop_id, alpha, alpha * phi * p_total / noise, eta * cfg.n_total)

    return (
        hop(HOP_SR, cfg.tau * cfg.distance_m, cfg.phi_s, cfg.eta_sr),
        hop(HOP_RD, (1.0 - cfg.tau) * cfg.distance_m, cfg.phi_r, cfg.eta_rd),
    )
