"""Command-line front end.

Subcommands ``analyze``, ``simulate``, ``sweep`` and ``validate``.  A run is
described by a :class:`RunManifest`; every output file gets a
``<out>.manifest.json`` sidecar from which it can be regenerated with
``urllc-aoi --manifest <file>``.

Exit codes: 0 success, 2 validation error, 3 unstable configuration,
4 oracle-suite failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .aoi_analytics import aaoi_analytic, moments_for, pk_mean_wait
from .aoi_simulator import SAMPLED_FADING, fixed_eps, replicate, simulate, write_trace
from .experiments import DEFAULT_GRIDS, SweepResult, SweepRow, SweepSpec, sweep
from .finite_blocklength import ERROR_METHODS, avg_error_closed_form, avg_error_quadrature, system_error
from .link_model import ConfigError, SystemConfig, build_link_budgets

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE, EXIT_ORACLE = 0, 2, 3, 4

CONFIG_KEYS = tuple(f.name for f in fields(SystemConfig))
INTEGER_KEYS = ("n_total", "k_bits")
_UNIT_SUFFIXES = ("_m", "_km", "_dbm", "_dbw", "_w", "_mw", "_hz", "_khz", "_mhz", "_ghz", "_s", "_ms", "_us")
PARAM_ALIASES = {
    "lambda": "lambda_rate", "lambda_rate": "lambda_rate",
    "n": "n_total", "n_total": "n_total",
    "eta": "eta_sr", "eta_sr": "eta_sr",
    "phi": "phi_s", "phi_s": "phi_s",
    "k": "k_bits", "k_bits": "k_bits",
}
CSV_COLUMNS = ("param_value", "aaoi_analytic_s", "aaoi_sim_s", "ci_halfwidth_s", "eps_overall", "stable")


# ---------------------------------------------------------------------------
# configuration

def _stem(key: str) -> str:
    for suffix in _UNIT_SUFFIXES:
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


_STEMS = {_stem(k): k for k in CONFIG_KEYS if _stem(k) != k}


def _check_key(key: str) -> None:
    if key in CONFIG_KEYS:
        return
    stem = _stem(key)
    if stem in _STEMS:
        raise ConfigError(key, f"unit suffix mismatch, expected {_STEMS[stem]!r}")
    raise ConfigError(key, "unknown configuration key")


def _parse_value(key: str, text) -> float:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        value = float(text)
    else:
        try:
            value = float(str(text).strip())
        except ValueError:
            raise ConfigError(key, f"not a plain number: {text!r} (units belong in the key name)") from None
    if key in INTEGER_KEYS:
        if value != int(value):
            raise ConfigError(key, f"must be an integer, got {text!r}")
        return int(value)
    return value


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        _check_key(key)
        values[key] = _parse_value(key, value)
    return values


def parse_config(path=None, overrides: dict | None = None, require_lambda: bool = False) -> SystemConfig:
    """Build a :class:`SystemConfig` from a file and/or flag overrides.

    Flags win over the file; keys missing from both take the reference
    defaults.  With ``require_lambda`` the update rate must be given.
    """
    values = read_config_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        _check_key(key)
        values[key] = _parse_value(key, value)
    if require_lambda and "lambda_rate" not in values:
        raise ConfigError("lambda_rate", "required for this subcommand")
    return SystemConfig(**values)


# ---------------------------------------------------------------------------
# manifest

@dataclass
class RunManifest:
    subcommand: str
    config: dict
    options: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    grid: list | None = None
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def system_config(self) -> SystemConfig:
        return SystemConfig(**self.config)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def write_manifest(manifest: RunManifest, out) -> Path:
    path = Path(str(out) + ".manifest.json")
    path.write_text(manifest.to_json() + "\n")
    return path


# ---------------------------------------------------------------------------
# result emission

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def _row_fields(row: SweepRow) -> tuple:
    analytic = row.aaoi_analytic
    if analytic is not None and not row.stable:
        analytic = math.inf
    return (row.value, analytic, row.aaoi_sim, row.ci_halfwidth, row.eps_overall, row.stable)


def format_results(result: SweepResult, fmt: str = "csv") -> str:
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in result.rows:
            w.writerow([_fmt(v) for v in _row_fields(row)])
    elif fmt == "jsonl":
        for row in result.rows:
            rec = dict(zip(CSV_COLUMNS, _row_fields(row)))
            rec["param"] = result.parameter
            buf.write(json.dumps(rec) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'jsonl'")
    return buf.getvalue()


def emit_results(result: SweepResult, fmt: str = "csv", out=None, manifest: RunManifest | None = None) -> str:
    """Serialize a sweep in grid order.

    Writes to ``out`` (plus a manifest sidecar when given) or returns the text.
    """
    text = format_results(result, fmt)
    if out is not None:
        try:
            Path(out).write_text(text)
            if manifest is not None:
                write_manifest(manifest, out)
        except OSError as exc:
            raise OSError(f"cannot write results to {out}: {exc.strerror}") from exc
    return text


def _parse_field(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    return float(text)


def parse_results(text: str, fmt: str = "csv", parameter: str = "") -> SweepResult:
    rows, param = [], parameter
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        records = [[_parse_field(v) for v in line] for line in reader if line]
    elif fmt == "jsonl":
        records = []
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                param = rec.get("param", param)
                records.append([rec[c] for c in CSV_COLUMNS])
    else:
        raise ValueError(f"unknown format {fmt!r}")
    for value, analytic, sim, ci, eps, stable in records:
        rows.append(SweepRow(value, analytic, sim, ci, eps, stable))
    return SweepResult(param, tuple(rows))


# ---------------------------------------------------------------------------
# subcommands

def _sim_mode(options: dict, cfg: SystemConfig):
    mode = options.get("mode", "fixed_eps")
    if mode == SAMPLED_FADING:
        return SAMPLED_FADING
    eps = options.get("eps")
    if eps is None:
        eps = system_error(cfg, options.get("error_method", "closed_form")).eps_overall
    return fixed_eps(eps)


def _analyze(manifest: RunManifest, out, err):
    cfg = manifest.system_config()
    est = aaoi_analytic(cfg, manifest.options.get("error_method", "closed_form"))
    payload = {
        "errors": asdict(est.errors),
        "aoi": {
            "aaoi_s": est.aaoi,
            "stable": est.stable,
            "breakdown_s": est.breakdown,
            "source": est.source,
        },
        "moments": asdict(est.moments) if est.moments else None,
    }
    out.write(json.dumps(payload, indent=2) + "\n")
    if not est.stable:
        m = est.moments
        mean_s = m.mean_s if m else math.inf
        err.write(
            f"unstable: mean service time {mean_s:.6g} s is not below the mean "
            f"inter-arrival time {1 / cfg.lambda_rate:.6g} s; reduce lambda_rate below "
            f"{(1 - est.errors.eps_overall) / cfg.attempt_duration:.6g} updates/s\n"
        )
        return EXIT_UNSTABLE
    return EXIT_OK


def _simulate(manifest: RunManifest, out, err):
    cfg = manifest.system_config()
    opts = manifest.options
    seed = manifest.seeds[0] if manifest.seeds else 0
    mode = _sim_mode(opts, cfg)
    horizon = opts.get("horizon_s", 2e4)
    summary = replicate(cfg, horizon, seed, opts.get("replications", 10), mode, workers=opts.get("workers"))
    if opts.get("trace"):
        run = simulate(cfg, horizon, seed, mode, replication=0, keep_trace=True)
        write_trace(opts["trace"], run.trace)
    payload = {
        "mode": summary.runs[0].mode,
        "time_avg_aoi_s": summary.time_avg_aoi,
        "ci_halfwidth_s": summary.ci_halfwidth,
        "no_delivery": summary.no_delivery,
        "replications": [
            {k: v for k, v in asdict(r).items() if k != "trace"} for r in summary.runs
        ],
    }
    out.write(json.dumps(payload, indent=2) + "\n")
    if summary.no_delivery:
        err.write("at least one replication delivered no update; age is unbounded\n")
    return EXIT_OK


def _sweep(manifest: RunManifest, out, err):
    opts = manifest.options
    spec = SweepSpec(
        parameter=opts["param"],
        grid=tuple(manifest.grid),
        base=manifest.system_config(),
        evaluator=opts.get("evaluator", "analytic"),
        replications=opts.get("replications", 10),
        horizon=opts.get("horizon_s", 2e4),
        seed=manifest.seeds[0] if manifest.seeds else 0,
        error_method=opts.get("error_method", "closed_form"),
        sim_mode=opts.get("mode", "fixed_eps"),
        workers=opts.get("workers"),
    )
    result = sweep(spec)
    target = opts.get("out")
    text = emit_results(result, opts.get("format", "csv"), target, manifest if target else None)
    if not target:
        out.write(text)
    if result.argmin_row is None:
        err.write("no stable grid point\n")
    else:
        err.write(f"argmin {spec.parameter} = {result.argmin_value:.12g} (AAoI {result.argmin_aaoi:.12g} s)\n")
    return EXIT_OK


def oracle_suite(cfg: SystemConfig, horizon: float, replications: int, seed: int) -> list[tuple[str, bool, str]]:
    """Closed-form-vs-quadrature and analytic-vs-simulation checks for ``cfg``."""
    checks = []
    for b in build_link_budgets(cfg):
        closed = avg_error_closed_form(b, cfg.k_bits)
        lin = avg_error_quadrature(b, cfg.k_bits, "linearized")
        exact = avg_error_quadrature(b, cfg.k_bits, "exact")
        checks.append((f"{b.hop_id} closed form vs linearized quadrature",
                       abs(closed - lin) <= 1e-9, f"|diff|={abs(closed - lin):.3g} <= 1e-9"))
        checks.append((f"{b.hop_id} closed form vs exact quadrature",
                       abs(closed - exact) <= 2e-2, f"|diff|={abs(closed - exact):.3g} <= 2e-2"))

    est = aaoi_analytic(cfg)
    if not est.stable:
        checks.append(("analytic stability", False, "configuration is unstable"))
        return checks
    eps = est.errors.eps_overall
    summary = replicate(cfg, horizon, seed, replications, fixed_eps(eps))
    gap = abs(summary.time_avg_aoi - est.aaoi)
    tol = max(0.05 * est.aaoi, 2 * summary.ci_halfwidth)
    checks.append(("simulated vs analytic AAoI", gap <= tol,
                   f"sim={summary.time_avg_aoi:.6g} analytic={est.aaoi:.6g} |diff|={gap:.3g} <= {tol:.3g}"))

    # queue statistics pooled over the same replications; the fixed tolerances
    # assume about 1e6 deliveries, so widen to 3 standard errors when fewer
    mom = moments_for(cfg, eps)
    for label, attr, analytic, rel in (
        ("simulated E[s] vs closed form", "mean_service", mom.mean_s, 0.01),
        ("simulated E[w] vs Pollaczek-Khinchine", "mean_wait", pk_mean_wait(mom, cfg.lambda_rate), 0.02),
    ):
        vals = np.array([getattr(r, attr) for r in summary.runs])
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        tol = max(rel * analytic, 3.0 * se)
        gap = abs(vals.mean() - analytic)
        checks.append((label, gap <= tol,
                       f"sim={vals.mean():.6g} analytic={analytic:.6g} |diff|={gap:.3g} <= {tol:.3g}"))
    return checks


def _validate(manifest: RunManifest, out, err):
    opts = manifest.options
    checks = oracle_suite(
        manifest.system_config(),
        opts.get("horizon_s", 2e4),
        opts.get("replications", 10),
        manifest.seeds[0] if manifest.seeds else 0,
    )
    for name, ok, detail in checks:
        out.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_ORACLE


SUBCOMMANDS = {"analyze": _analyze, "simulate": _simulate, "sweep": _sweep, "validate": _validate}


def run_subcommand(name: str, manifest: RunManifest, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    if name not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {name!r}")
    return SUBCOMMANDS[name](manifest, out, err)


# ---------------------------------------------------------------------------
# argument parsing

def _parse_grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    for key in CONFIG_KEYS:
        flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
        common.add_argument(*flags, dest=key, default=None, metavar="X")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--replications", type=int, default=10)
    common.add_argument("--horizon-s", type=float, default=2e4)
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    common.add_argument("--out", default=None)
    common.add_argument("--error-method", choices=ERROR_METHODS, default="closed_form")
    common.add_argument("--workers", type=int, default=None)

    parser = argparse.ArgumentParser(prog="urllc-aoi", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--manifest", help="re-run a saved run manifest")
    sub = parser.add_subparsers(dest="subcommand")
    sub.add_parser("analyze", parents=[common], help="closed-form errors and average age")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo replications")
    p.add_argument("--mode", choices=("fixed_eps", SAMPLED_FADING), default="fixed_eps")
    p.add_argument("--eps", type=float, default=None, help="round error for fixed_eps (default: closed form)")
    p.add_argument("--trace", default=None, help="write replication 0's delivery trace here")
    p = sub.add_parser("sweep", parents=[common], help="one-parameter sweep")
    p.add_argument("--param", required=True, choices=sorted(PARAM_ALIASES))
    p.add_argument("--grid", default=None, help="a,b,c or start:stop:step")
    p.add_argument("--evaluator", choices=("analytic", "simulated", "both"), default="analytic")
    p.add_argument("--mode", choices=("fixed_eps", SAMPLED_FADING), default="fixed_eps")
    sub.add_parser("validate", parents=[common], help="oracle checks at one configuration")
    return parser


def manifest_from_args(args) -> RunManifest:
    overrides = {key: getattr(args, key) for key in CONFIG_KEYS}
    cfg = parse_config(args.config, overrides, require_lambda=args.subcommand in ("analyze", "simulate"))
    options = {
        "replications": args.replications,
        "horizon_s": args.horizon_s,
        "format": args.format,
        "out": args.out,
        "error_method": args.error_method,
        "workers": args.workers,
    }
    grid = None
    if args.subcommand == "simulate":
        options.update(mode=args.mode, eps=args.eps, trace=args.trace)
    elif args.subcommand == "sweep":
        param = PARAM_ALIASES[args.param]
        options.update(param=param, evaluator=args.evaluator, mode=args.mode)
        if args.grid:
            grid = _parse_grid(args.grid)
        elif param in DEFAULT_GRIDS:
            grid = list(DEFAULT_GRIDS[param])
        else:
            raise ConfigError("grid", f"no default grid for {param}; pass --grid")
    return RunManifest(args.subcommand, cfg.to_dict(), options, [args.seed], grid)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.manifest:
            manifest = RunManifest.from_json(Path(args.manifest).read_text())
        elif args.subcommand:
            manifest = manifest_from_args(args)
        else:
            parser.print_help()
            return EXIT_INVALID
        out_path = manifest.options.get("out")
        if out_path and manifest.subcommand != "sweep":
            with open(out_path, "w") as fh:
                code = run_subcommand(manifest.subcommand, manifest, fh)
            write_manifest(manifest, out_path)
            return code
        return run_subcommand(manifest.subcommand, manifest)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
