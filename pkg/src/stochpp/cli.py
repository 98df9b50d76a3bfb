"""Batch front end: TOML config ingestion, subcommands, deterministic
parallel orchestration, CSV/JSON emitters, and run manifests.

Exit codes: 0 success, 2 config error, 3 critical band (classify),
4 numerical abort (step overflow), 5 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import __version__, ergodic, geometry, simulate, threshold
from .errors import (
    ConfigError,
    GridTooLargeError,
    StepOverflowError,
    StochppError,
    ValidationError,
)
from .model import DEFAULT_EPS_CRITICAL, ModelParams, NoiseMode, Regime, validate
from .simulate import SimConfig

TRAJECTORY_CAP = 4096
ENV_WORKERS = "STOCHPP_WORKERS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CRITICAL = 3
EXIT_NUMERICAL = 4
EXIT_CAP = 5


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

_SCHEMA = {
    "params": {"a1", "b1", "c1", "a2", "b2", "c2", "m1", "m2", "m3", "alpha", "beta"},
    "sim": {"dt", "horizon", "x0", "y0", "seed", "mode", "thinning"},
    "classify": {"tol", "eps_critical"},
    "simulate": {"trajectories"},
    "ergodic": {"trajectories", "functionals", "burn_in", "lyapunov"},
    "support": {"margin", "burn_in", "tol"},
    "lie_rank": {"lo", "hi", "n", "depth", "variant"},
    "sweep": {"axes", "eps_critical", "tol", "cell_cap"},
}


def load_config(path) -> dict:
    """Parse and schema-check a TOML config; unknown keys are hard errors."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    unknown_sections = set(raw) - set(_SCHEMA)
    if unknown_sections:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown_sections)}")
    for section, keys in raw.items():
        if not isinstance(keys, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        extra = set(keys) - _SCHEMA[section]
        if extra:
            raise ConfigError(
                f"{path}: unknown keys in [{section}]: {sorted(extra)}"
            )
    if "params" not in raw:
        raise ConfigError(f"{path}: missing required [params] section")
    return raw


def _params_from(cfg: dict) -> ModelParams:
    try:
        return validate(cfg["params"])
    except ValidationError as exc:
        raise ConfigError(f"[params]: {exc}") from exc


def _sim_config(cfg: dict, seed_override) -> SimConfig:
    sim = dict(cfg.get("sim", {}))
    mode_name = sim.pop("mode", "independent")
    try:
        mode = NoiseMode(mode_name)
    except ValueError as exc:
        raise ConfigError(
            f"[sim].mode must be 'independent' or 'shared', got {mode_name!r}"
        ) from exc
    if seed_override is not None:
        sim["seed"] = seed_override
    try:
        return SimConfig(mode=mode, **sim)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[sim]: {exc}") from exc


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Regime):
        return o.value
    if o == math.inf:
        return "inf"
    raise TypeError(f"not JSON serializable: {o!r}")


def _sanitize(obj):
    """Replace non-finite floats so json stays strictly standard."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def write_json(path: Path, payload) -> None:
    text = json.dumps(_sanitize(payload), indent=2, sort_keys=True,
                      default=_json_default)
    path.write_text(text + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, cfg: dict, seed, outputs, t_start: float) -> None:
    manifest = {
        "tool": "stochpp",
        "version": __version__,
        "config": cfg,
        "seed": seed,
        "wall_clock_s": time.time() - t_start,
        "outputs": {name: _digest(out_dir / name) for name in sorted(outputs)},
    }
    write_json(out_dir / "run_manifest.json", manifest)


def _resolve_workers(flag_value) -> int:
    if flag_value is not None:
        return max(1, int(flag_value))
    env = os.environ.get(ENV_WORKERS)
    if env:
        return max(1, int(env))
    return 1


def _parallel_map(fn, items, workers: int):
    """Deterministic parallel map: results returned in input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def run_classify(cfg, args, out_dir: Path) -> int:
    t0 = time.time()
    p = _params_from(cfg)
    opts = cfg.get("classify", {})
    tol = float(opts.get("tol", threshold.DEFAULT_QUAD_TOL))
    eps = float(
        args.eps_critical
        if args.eps_critical is not None
        else opts.get("eps_critical", DEFAULT_EPS_CRITICAL)
    )
    rep = threshold.threshold_report(p, tol, eps)
    write_json(out_dir / "threshold_report.json", rep.as_dict())
    write_manifest(out_dir, cfg, args.seed, ["threshold_report.json"], t0)
    if rep.lam is None:
        print(f"regime={rep.regime.value}")
    else:
        print(f"lambda={rep.lam:.6f} regime={rep.regime.value}")
    return EXIT_CRITICAL if rep.regime is Regime.CRITICAL else EXIT_OK


def _simulate_one(job):
    p, sim_cfg, idx, out_dir = job
    traj = simulate.simulate_system(p, sim_cfg, trajectory_index=idx)
    name = f"trajectory_{idx:03d}.csv"
    simulate.dump_csv(traj, Path(out_dir) / name)
    return name


def run_simulate(cfg, args, out_dir: Path) -> int:
    t0 = time.time()
    p = _params_from(cfg)
    sim_cfg = _sim_config(cfg, args.seed)
    n_traj = int(cfg.get("simulate", {}).get("trajectories", 1))
    if n_traj > TRAJECTORY_CAP:
        raise GridTooLargeError(f"{n_traj} trajectories exceeds cap {TRAJECTORY_CAP}")
    jobs = [(p, sim_cfg, i, str(out_dir)) for i in range(n_traj)]
    names = _parallel_map(_simulate_one, jobs, _resolve_workers(args.workers))
    write_manifest(out_dir, cfg, sim_cfg.seed, names, t0)
    print(f"wrote {n_traj} trajectories to {out_dir}")
    return EXIT_OK


def _ergodic_one(job):
    p, sim_cfg, idx, functionals, burn_in, lyap_components = job
    traj = simulate.simulate_system(p, sim_cfg, trajectory_index=idx)
    rec = {"trajectory": idx, "averages": {}, "lyapunov": {}}
    for f in functionals:
        rec["averages"][f] = ergodic.time_average(traj, f, burn_in=burn_in)
    for comp in lyap_components:
        rec["lyapunov"][comp] = ergodic.lyapunov_exponent(traj, comp)
    return rec


def run_ergodic(cfg, args, out_dir: Path) -> int:
    t0 = time.time()
    p = _params_from(cfg)
    sim_cfg = _sim_config(cfg, args.seed)
    opts = cfg.get("ergodic", {})
    n_traj = int(opts.get("trajectories", 1))
    if n_traj > TRAJECTORY_CAP:
        raise GridTooLargeError(f"{n_traj} trajectories exceeds cap {TRAJECTORY_CAP}")
    functionals = list(opts.get("functionals", ["x^1", "y^1"]))
    burn_in = float(opts.get("burn_in", 0.5))
    lyap = list(opts.get("lyapunov", ["v"]))
    jobs = [(p, sim_cfg, i, functionals, burn_in, lyap) for i in range(n_traj)]
    per_traj = _parallel_map(_ergodic_one, jobs, _resolve_workers(args.workers))
    merged = {
        "averages": {
            f: float(np.mean([r["averages"][f] for r in per_traj]))
            for f in functionals
        },
        "lyapunov": {
            c: float(np.mean([r["lyapunov"][c] for r in per_traj])) for c in lyap
        },
    }
    payload = {"per_trajectory": per_traj, "merged": merged}
    write_json(out_dir / "ergodic_report.json", payload)
    write_manifest(out_dir, cfg, sim_cfg.seed, ["ergodic_report.json"], t0)
    for f, v in merged["averages"].items():
        print(f"avg[{f}]={v:.6f}")
    return EXIT_OK


def _support_one(job):
    p, sim_cfg, idx, descriptor, margin, burn_in = job
    traj = simulate.simulate_system(p, sim_cfg, trajectory_index=idx)
    return geometry.support_membership(traj, descriptor, margin, burn_in)


def run_support(cfg, args, out_dir: Path) -> int:
    t0 = time.time()
    p = _params_from(cfg)
    sim_cfg = _sim_config(cfg, args.seed)
    if sim_cfg.mode is not NoiseMode.SHARED:
        raise ConfigError("support analysis requires [sim].mode = 'shared'")
    opts = cfg.get("support", {})
    margin = float(opts.get("margin", 0.05))
    burn_in = float(opts.get("burn_in", 0.5))
    tol = float(opts.get("tol", 1e-6))
    n_traj = int(cfg.get("ergodic", {}).get("trajectories", 1))
    descriptor = geometry.invariant_control_set(p, tol=tol)
    jobs = [(p, sim_cfg, i, descriptor, margin, burn_in) for i in range(n_traj)]
    fractions = _parallel_map(_support_one, jobs, _resolve_workers(args.workers))
    payload = {
        "control_set": descriptor.as_dict(),
        "margin": margin,
        "burn_in": burn_in,
        "outside_fraction_per_trajectory": fractions,
        "outside_fraction_mean": float(np.mean(fractions)),
    }
    write_json(out_dir / "support_report.json", payload)
    rows = [(i, f) for i, f in enumerate(fractions)]
    write_csv(out_dir / "support_fractions.csv", ["trajectory", "outside_fraction"], rows)
    write_manifest(
        out_dir, cfg, sim_cfg.seed,
        ["support_report.json", "support_fractions.csv"], t0,
    )
    print(
        f"control_set={descriptor.kind} "
        f"outside_fraction={payload['outside_fraction_mean']:.6f}"
    )
    return EXIT_OK


def run_lie_rank(cfg, args, out_dir: Path) -> int:
    t0 = time.time()
    p = _params_from(cfg)
    opts = cfg.get("lie_rank", {})
    lo = float(opts.get("lo", -5.0))
    hi = float(opts.get("hi", 5.0))
    n = int(opts.get("n", 21))
    depth = int(opts.get("depth", 3))
    variant = str(opts.get("variant", "both"))
    variants = ["full", "ideal"] if variant == "both" else [variant]
    grid = geometry.square_grid(lo, hi, n)
    reports = {v: geometry.verify_hormander(p, grid, depth, v) for v in variants}
    payload = {v: rep.as_dict() for v, rep in reports.items()}
    write_json(out_dir / "lie_rank_report.json", payload)
    write_manifest(out_dir, cfg, args.seed, ["lie_rank_report.json"], t0)
    for v, rep in reports.items():
        print(f"variant={v} deficient_points={len(rep.deficient_points)}")
    return EXIT_OK


def run_sweep(cfg, args, out_dir: Path) -> int:
    t0 = time.time()
    p = _params_from(cfg)
    opts = cfg.get("sweep", {})
    axes = opts.get("axes")
    if not axes:
        raise ConfigError("[sweep.axes] must list at least one coefficient range")
    eps = float(
        args.eps_critical
        if args.eps_critical is not None
        else opts.get("eps_critical", DEFAULT_EPS_CRITICAL)
    )
    tol = float(opts.get("tol", threshold.DEFAULT_QUAD_TOL))
    cap = int(opts.get("cell_cap", threshold.SWEEP_CELL_CAP))
    rows, counts = threshold.sweep(p, axes, eps, tol, cap)
    names = list(axes)
    header = names + [
        "lambda", "regime", "ji", "lw_applicable", "lw_extinct", "lw_persist",
    ]
    csv_rows = [
        tuple(r[n] for n in names)
        + (
            r["lambda"],
            r["regime"],
            r["ji_condition"],
            r["lw_applicable"],
            r["lw_extinct"],
            r["lw_persist"],
        )
        for r in rows
    ]
    write_csv(out_dir / "sweep.csv", header, csv_rows)
    write_json(out_dir / "sweep_summary.json", counts)
    write_manifest(out_dir, cfg, args.seed, ["sweep.csv", "sweep_summary.json"], t0)
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "classify": run_classify,
    "simulate": run_simulate,
    "ergodic": run_ergodic,
    "support": run_support,
    "lie-rank": run_lie_rank,
    "sweep": run_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochpp",
        description="Stochastic predator-prey threshold, simulation, and "
        "ergodicity toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML scenario config")
        sp.add_argument("--seed", type=int, default=None,
                        help="override [sim].seed")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--workers", type=int, default=None,
                        help=f"worker count (else ${ENV_WORKERS}, else 1)")
        sp.add_argument("--eps-critical", type=float, default=None,
                        dest="eps_critical", help="critical band half-width")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, args, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GridTooLargeError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except StepOverflowError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StochppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
