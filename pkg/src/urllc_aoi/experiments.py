"""Parameter sweeps and optimum search over the analytic and simulated age."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .aoi_analytics import aaoi_analytic
from .aoi_simulator import SAMPLED_FADING, fixed_eps, replicate
from .finite_blocklength import ErrorMethod
from .link_model import SystemConfig

SWEEP_PARAMETERS = ("lambda_rate", "n_total", "eta_sr", "phi_s", "k_bits")

LAMBDA_GRID = tuple(float(v) for v in range(1, 34))
N_GRID = tuple(float(v) for v in sorted({10, 15, 25, *range(20, 301, 10)}))
ETA_GRID = tuple(round(0.05 * i, 10) for i in range(1, 20))
DEFAULT_GRIDS = {"lambda_rate": LAMBDA_GRID, "n_total": N_GRID, "eta_sr": ETA_GRID, "phi_s": ETA_GRID}


class NoStableBracketError(ValueError):
    """No stable point to refine around."""


def config_at(base: SystemConfig, parameter: str, value: float) -> SystemConfig:
    """``base`` with one parameter set; allocation factors stay complementary."""
    if parameter == "eta_sr":
        return replace(base, eta_sr=value, eta_rd=1.0 - value)
    if parameter == "phi_s":
        return replace(base, phi_s=value, phi_r=1.0 - value)
    if parameter in ("lambda_rate", "n_total", "k_bits"):
        return replace(base, **{parameter: value})
    raise ValueError(f"cannot sweep {parameter!r}; choose one of {SWEEP_PARAMETERS}")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    grid: tuple[float, ...]
    base: SystemConfig = field(default_factory=SystemConfig)
    evaluator: str = "analytic"
    replications: int = 10
    horizon: float = 2e4
    seed: int = 0
    error_method: ErrorMethod = "closed_form"
    sim_mode: str = "fixed_eps"
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"cannot sweep {self.parameter!r}; choose one of {SWEEP_PARAMETERS}")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if self.evaluator not in ("analytic", "simulated", "both"):
            raise ValueError(f"unknown evaluator {self.evaluator!r}")
        if self.sim_mode not in ("fixed_eps", SAMPLED_FADING):
            raise ValueError(f"unknown simulation mode {self.sim_mode!r}")
        for v in self.grid:
            config_at(self.base, self.parameter, v)  # raises ConfigError on a bad value

    def configs(self) -> list[SystemConfig]:
        return [config_at(self.base, self.parameter, v) for v in self.grid]


@dataclass(frozen=True)
class SweepRow:
    value: float
    aaoi_analytic: float | None
    aaoi_sim: float | None
    ci_halfwidth: float | None
    eps_overall: float
    stable: bool


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    rows: tuple[SweepRow, ...]

    @property
    def argmin_value(self) -> float | None:
        row = self.argmin_row
        return None if row is None else row.value

    @property
    def argmin_aaoi(self) -> float | None:
        row = self.argmin_row
        return None if row is None else _objective(row)

    @property
    def argmin_row(self) -> SweepRow | None:
        best = None
        for row in self.rows:
            v = _objective(row)
            if row.stable and v is not None and math.isfinite(v) and (best is None or v < _objective(best)):
                best = row
        return best

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    def analytic(self) -> np.ndarray:
        return np.array([math.nan if r.aaoi_analytic is None else r.aaoi_analytic for r in self.rows])


def _objective(row: SweepRow) -> float | None:
    return row.aaoi_analytic if row.aaoi_analytic is not None else row.aaoi_sim


def _evaluate_point(args) -> SweepRow:
    spec, value, index = args
    cfg = config_at(spec.base, spec.parameter, value)
    est = aaoi_analytic(cfg, spec.error_method)
    eps = est.errors.eps_overall
    analytic = est.aaoi if spec.evaluator in ("analytic", "both") else None
    sim = ci = None
    if spec.evaluator in ("simulated", "both") and est.stable:
        mode = fixed_eps(eps) if spec.sim_mode == "fixed_eps" else SAMPLED_FADING
        # one seed family per grid point keeps rows independent of evaluation order
        summary = replicate(cfg, spec.horizon, spec.seed + 1_000_003 * index, spec.replications, mode)
        sim, ci = summary.time_avg_aoi, summary.ci_halfwidth
    return SweepRow(value, analytic, sim, ci, eps, est.stable)


def sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate every grid point; rows come back in grid order.

    Unstable points are kept (``stable=False``, analytic age ``inf``) but never
    chosen as the argmin.  If every point is unstable the argmin is ``None``.
    """
    jobs = [(spec, v, i) for i, v in enumerate(spec.grid)]
    if spec.workers and spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = tuple(pool.map(_evaluate_point, jobs))
    else:
        rows = tuple(map(_evaluate_point, jobs))
    return SweepResult(spec.parameter, rows)


# ---------------------------------------------------------------------------
# refinement

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f, a: float, b: float, tol: float, max_iter: int = 200):
    """Minimise a unimodal ``f`` on ``[a, b]`` down to an interval of width ``tol``.

    Returns ``(x, f(x), iterations)``.
    """
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        it += 1
    x = 0.5 * (a + b)
    fx = f(x)
    for cand, fcand in ((c, fc), (d, fd)):
        if fcand < fx:
            x, fx = cand, fcand
    return x, fx, it


@dataclass(frozen=True)
class Optimum:
    value: float
    aaoi: float
    method: str  # "golden" or "grid_fallback"
    bracket: tuple[float, float]
    iterations: int = 0


def _is_unimodal(values) -> bool:
    diffs = np.diff(np.asarray(values, dtype=float))
    signs = np.sign(diffs[diffs != 0])
    # non-increasing run followed by a non-decreasing run
    return not np.any(np.diff(signs) < 0)


def find_optimum(spec: SweepSpec, bounds: tuple[float, float] | None = None, tol: float = 1e-6) -> Optimum:
    """Golden-section refinement of the analytic age around the grid argmin.

    Without ``bounds`` the bracket is the pair of grid neighbours of the grid
    argmin.  If the grid values inside the bracket are not unimodal, the grid
    argmin is returned instead with ``method="grid_fallback"``.
    """
    spec = replace(spec, evaluator="analytic")
    result = sweep(spec)
    best = result.argmin_row
    if best is None:
        raise NoStableBracketError(f"every {spec.parameter} grid point is unstable")
    grid = list(spec.grid)
    i = grid.index(best.value)
    if bounds is None:
        bounds = (grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)])
    lo, hi = bounds
    if not lo < hi:
        return Optimum(best.value, best.aaoi_analytic, "grid_fallback", (lo, hi))

    inside = [r for r in result.rows if lo <= r.value <= hi]
    vals = [r.aaoi_analytic for r in inside]
    if not inside or not all(r.stable for r in inside) or not _is_unimodal(vals):
        return Optimum(best.value, best.aaoi_analytic, "grid_fallback", (lo, hi))

    def f(x):
        try:
            return aaoi_analytic(config_at(spec.base, spec.parameter, x), spec.error_method).aaoi
        except ValueError:
            return math.inf

    x, fx, it = golden_section_min(f, lo, hi, tol)
    if not math.isfinite(fx):
        raise NoStableBracketError(f"no stable point found in [{lo}, {hi}]")
    if best.aaoi_analytic < fx:
        return Optimum(best.value, best.aaoi_analytic, "grid_fallback", (lo, hi), it)
    return Optimum(x, fx, "golden", (lo, hi), it)


# ---------------------------------------------------------------------------
# allocation cross-sweep

@dataclass(frozen=True)
class AllocationStudy:
    """Block-length allocation curves, one per source power share."""

    eta_grid: tuple[float, ...]
    curves: dict

    def minimum(self, phi_s: float) -> float:
        return self.curves[phi_s].argmin_aaoi

    def table(self) -> list[tuple[float, float, float]]:
        return [(phi, row.value, row.aaoi_analytic) for phi, res in self.curves.items() for row in res.rows]


def allocation_study(
    base: SystemConfig,
    phi_values=(0.3, 0.5, 0.7),
    eta_grid=ETA_GRID,
    error_method: ErrorMethod = "closed_form",
) -> AllocationStudy:
    """Analytic age over ``eta_sr`` for each source power share ``phi_s``."""
    curves = {}
    for phi in phi_values:
        cfg = config_at(base, "phi_s", phi)
        curves[phi] = sweep(SweepSpec("eta_sr", tuple(eta_grid), cfg, error_method=error_method))
    return AllocationStudy(tuple(eta_grid), curves)
