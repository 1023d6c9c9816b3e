"""Command-line entry point: evaluate, sweep and optimize from a JSON config."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .core import ChannelParams, DomainError, IntensityProfile
from .lp import LPInfeasible
from .optimize import OptimizerOptions, optimize_profile
from .pipeline import evaluate, evaluate_baseline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

# config field -> ChannelParams attribute
CHANNEL_FIELDS = {
    "alpha_db_per_km": "alpha",
    "eta_d": "eta_d",
    "y0_per_bin": "y0",
    "ed_z": "ed_z",
    "ed_x": "ed_x",
    "f_ec": "f_ec",
    "epsilon": "epsilon",
    "distance_km": "distance_km",
    "rep_rate_hz": "rep_rate_hz",
    "n_total_pulses": "n_total",
    "split_ratio": "split_ratio",
}
PROFILE_FIELDS = ("mu", "nu", "omega", "p_mu", "p_nu", "p_omega")
RUN_FIELDS = ("mode", "rng_seed", "grid")
METHODS = ("double-scan", "baseline")
SWEEP_COLUMNS = ("distance_km", "method", "r_per_pulse", "r_bps", "y11_lower", "e11_upper", "status")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelParams
    profile: IntensityProfile
    mode: str = "expected"
    rng_seed: Optional[int] = None
    grid: Tuple[int, int] = (16, 16)

    def resolved(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {k: getattr(self.channel, a) for k, a in CHANNEL_FIELDS.items()}
        out.update(self.profile.as_dict())
        out["p_o"] = self.profile.p_o
        out["mode"] = self.mode
        out["rng_seed"] = self.rng_seed
        out["grid"] = f"{self.grid[0]}x{self.grid[1]}"
        return out


def parse_grid(text: str) -> Tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        grid = (int(a), int(b))
    except ValueError:
        raise ConfigError(f"grid: expected NxM, got {text!r}") from None
    if min(grid) < 2:
        raise ConfigError("grid: need at least 2 points per axis")
    return grid


def _number(doc: Dict[str, Any], key: str) -> float:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {v!r}")
    return float(v)


def config_from_dict(doc: Dict[str, Any]) -> RunConfig:
    """Validate a flat config document; every problem names its field."""
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    known = set(CHANNEL_FIELDS) | set(PROFILE_FIELDS) | set(RUN_FIELDS)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field")
    missing = [k for k in PROFILE_FIELDS if k not in doc]
    if missing:
        raise ConfigError(f"{missing[0]}: required field missing")

    ch_kwargs = {attr: _number(doc, key) for key, attr in CHANNEL_FIELDS.items() if key in doc}
    try:
        channel = ChannelParams(**ch_kwargs)
    except DomainError as exc:
        raise ConfigError(f"channel: {exc}") from None
    try:
        profile = IntensityProfile(**{k: _number(doc, k) for k in PROFILE_FIELDS})
    except DomainError as exc:
        raise ConfigError(f"profile: {exc}") from None

    mode = doc.get("mode", "expected")
    if mode not in ("expected", "binomial"):
        raise ConfigError(f"mode: expected 'expected' or 'binomial', got {mode!r}")
    seed = doc.get("rng_seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64):
        raise ConfigError(f"rng_seed: expected an unsigned 64-bit integer, got {seed!r}")
    grid = parse_grid(doc["grid"]) if "grid" in doc else (16, 16)
    return RunConfig(channel, profile, mode, seed, grid)


def load_config(path: str, args: argparse.Namespace) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if isinstance(doc, dict):
        # command-line flags override the file
        if getattr(args, "mode", None) is not None:
            doc["mode"] = args.mode
        if getattr(args, "rng_seed", None) is not None:
            doc["rng_seed"] = args.rng_seed
        if getattr(args, "grid", None) is not None:
            doc["grid"] = args.grid
    cfg = config_from_dict(doc)
    if cfg.mode == "binomial" and cfg.rng_seed is None:
        raise ConfigError("rng_seed: required in binomial mode")
    return cfg


def _clean(obj: Any) -> Any:
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def dump_json(doc: Dict[str, Any]) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def format_number(x: float) -> str:
    """Plain decimal, or scientific below 1e-3 in magnitude."""
    if x == 0:
        return "0"
    if abs(x) < 1e-3:
        return f"{x:.9e}"
    return f"{x:.12g}"


def evaluation_report(cfg: RunConfig, with_baseline: bool = False) -> Dict[str, Any]:
    ev = evaluate(cfg.profile, cfg.channel, mode=cfg.mode, seed=cfg.rng_seed, grid=cfg.grid)
    report = {
        "config": cfg.resolved(),
        "tallies": ev.tallies.as_dict(),
        "rectangle": ev.rectangle.as_dict(),
        "truth": {"y11": ev.observables.y11_true, "e11": ev.observables.e11_true},
        "result": ev.result.as_dict(),
    }
    if with_baseline:
        base = evaluate_baseline(cfg.profile, cfg.channel, mode=cfg.mode, seed=cfg.rng_seed)
        report["baseline"] = base.as_dict()
    return report


def explain(report: Dict[str, Any]) -> str:
    res = report["result"]
    rect = report["rectangle"]
    b = res["bounds"]
    lines = [
        f"H range        [{rect['h_low']:.6e}, {rect['h_high']:.6e}]",
        f"M range        [{rect['m_low']:.6e}, {rect['m_high']:.6e}]",
        f"worst (H, M)   ({res['argmin']['h']:.6e}, {res['argmin']['m']:.6e})",
        f"Y11 lower      {b['y11_zz_lower']:.6e}   (model value {report['truth']['y11']:.6e})",
        f"e11 upper      {b['e11_ph_upper']:.6f}   (model value {report['truth']['e11']:.6f})",
        f"signal gain    {res['q_signal']:.6e}   QBER {res['e_signal']:.6f}",
        f"failure prob   {res['composed_failure']:.3e}",
        f"key rate       {res['r_per_pulse']:.6e} per pulse, {res['r_bps']:.6g} bps ({res['status']})",
    ]
    return "\n".join(lines) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    report = evaluation_report(cfg, with_baseline=args.baseline)
    if args.explain:
        sys.stderr.write(explain(report))
    _emit(dump_json(report), args.out)
    return EXIT_OK


def sweep_distances(d_start: float, d_end: float, d_step: float) -> List[float]:
    if not (0 < d_start <= d_end):
        raise ConfigError("d_start: need 0 < d_start <= d_end")
    if not d_step > 0:
        raise ConfigError("d_step: must be > 0")
    n = int(math.floor((d_end - d_start) / d_step + 1e-9))
    return [round(d_start + k * d_step, 9) for k in range(n + 1)]


def _sweep_point(task: Tuple[RunConfig, float, Tuple[str, ...]]) -> List[Dict[str, Any]]:
    cfg, d, methods = task
    channel = cfg.channel.replace(distance_km=d)
    rows = []
    for method in methods:
        if method == "double-scan":
            res = evaluate(cfg.profile, channel, mode=cfg.mode, seed=cfg.rng_seed, grid=cfg.grid).result
        else:
            res = evaluate_baseline(cfg.profile, channel, mode=cfg.mode, seed=cfg.rng_seed)
        rows.append(
            {
                "distance_km": d,
                "method": method,
                "r_per_pulse": res.r_per_pulse,
                "r_bps": res.r_bps,
                "y11_lower": res.bounds.y11_zz_lower,
                "e11_upper": res.bounds.e11_ph_upper,
                "status": res.status,
            }
        )
    return rows


def sweep_rows(cfg: RunConfig, distances: Sequence[float], methods: Sequence[str], jobs: int = 1) -> List[Dict[str, Any]]:
    tasks = [(cfg, d, tuple(methods)) for d in sorted(distances)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_point, tasks))  # map keeps input order
    else:
        chunks = [_sweep_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def sweep_csv(rows: Sequence[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow(
            [format_number(r["distance_km"]), r["method"]]
            + [format_number(r[k]) for k in ("r_per_pulse", "r_bps", "y11_lower", "e11_upper")]
            + [r["status"]]
        )
    return buf.getvalue()


def parse_methods(text: str) -> Tuple[str, ...]:
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"methods: unknown method {bad[0] if bad else text!r}; choose from {', '.join(METHODS)}")
    return methods


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    distances = sweep_distances(args.d_start, args.d_end, args.d_step)
    methods = parse_methods(args.methods)
    rows = sweep_rows(cfg, distances, methods, jobs=args.jobs)
    if args.explain:
        for r in rows:
            sys.stderr.write(f"{r['distance_km']:g} km  {r['method']:<12} {r['r_bps']:.6g} bps  {r['status']}\n")
    _emit(sweep_csv(rows), args.out)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    channel = cfg.channel if args.distance is None else cfg.channel.replace(distance_km=args.distance)
    opts = OptimizerOptions(
        max_evals=args.max_evals,
        restarts=args.restarts,
        rng_seed=args.opt_seed,
        grid=cfg.grid,
    )
    trace_fh = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        on_eval = (lambda e: trace_fh.write(json.dumps(_clean(e), sort_keys=True) + "\n")) if trace_fh else None
        out = optimize_profile(channel, cfg.profile, opts, on_eval=on_eval)
    finally:
        if trace_fh:
            trace_fh.close()
    seed_eval = evaluate(cfg.profile, channel, grid=cfg.grid).result
    best_cfg = RunConfig(channel, out.profile, cfg.mode, cfg.rng_seed, cfg.grid)
    report = {
        "config": RunConfig(channel, cfg.profile, cfg.mode, cfg.rng_seed, cfg.grid).resolved(),
        "optimizer": {
            "max_evals": opts.max_evals,
            "restarts": opts.restarts,
            "rng_seed": opts.rng_seed,
            "n_evals": out.n_evals,
            "zero_rate": out.zero_rate,
        },
        "seed_r_bps": seed_eval.r_bps,
        "profile": dict(out.profile.as_dict(), p_o=out.profile.p_o),
        "report": evaluation_report(best_cfg),
    }
    if args.explain:
        sys.stderr.write(explain(report["report"]))
    _emit(dump_json(report), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="flat JSON config")
    common.add_argument("--mode", choices=("expected", "binomial"), default=None)
    common.add_argument("--rng-seed", type=int, default=None, metavar="U64")
    common.add_argument("--grid", default=None, metavar="NxM", help="scan grid, default 16x16")
    common.add_argument("--out", default=None, metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--explain", action="store_true", help="print intermediate bounds to stderr")

    p = argparse.ArgumentParser(prog="mdiqkd", description="Finite-size MDI-QKD key rates with a double decoy scan.")
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", parents=[common], help="key rate for one configuration (JSON report)")
    ev.add_argument("--baseline", action="store_true", help="also report the non-scanning bound")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", parents=[common], help="key rate versus distance (CSV)")
    sw.add_argument("d_start", type=float)
    sw.add_argument("d_end", type=float)
    sw.add_argument("d_step", type=float)
    sw.add_argument("--methods", default="double-scan,baseline")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sw.set_defaults(func=cmd_sweep)

    op = sub.add_parser("optimize", parents=[common], help="search intensities and probabilities")
    op.add_argument("--distance", type=float, default=None, metavar="KM", help="override distance_km")
    op.add_argument("--max-evals", type=int, default=400)
    op.add_argument("--restarts", type=int, default=4)
    op.add_argument("--opt-seed", type=int, default=0, help="seed for restart perturbations")
    op.add_argument("--trace", default=None, metavar="PATH", help="JSON-lines log of every evaluation")
    op.set_defaults(func=cmd_optimize)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except LPInfeasible as exc:
        sys.stderr.write(f"infeasible: {exc}\n")
        for v in exc.violated:
            sys.stderr.write(f"  {v}\n")
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
