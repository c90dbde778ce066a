#!/usr/bin/env python3
"""
CLI for HeomCast - dataset generation, forecasting and benchmarks.
Usage:
  python cli.py [--seed N] [--out-dir DIR] [--workers N] [-v|-q] <command> [options]

Commands:
  simulate   propagate one system (preset or JSON config) to a trajectory CSV
  hierarchy  print the hierarchy size and memory estimate for N sites at depth K
  presets    list, show or save system presets
  generate   sweep the parameter box and write a dataset
  split      write the train/val/test split of a dataset
  window     export sliding windows of a split as CSV
  fit        grid-search a SARIMA model on a series and save it
  predict    forecast from a saved model
  benchmark  score a model on a dataset's test split
  fmo        seven-site demonstration with forecasts and plot data
  audit      population property audit of saved benchmark forecasts
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

# Ensure project root is on path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np
import pandas as pd

import config
from pydantic import ValidationError

from core.errors import HeomCastError, InvalidSpecError


# ── Helpers ───────────────────────────────────────────────────────────────────

def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_series(path: str, site: int = 1, column: Optional[str] = None) -> np.ndarray:
    """A trajectory file (site is 1-based) or any CSV with a numeric column."""
    from core.trajectory import read_trajectory

    with open(path) as fh:
        first = fh.readline()
    if first.startswith("#"):
        trajectory = read_trajectory(path)
        if not 1 <= site <= trajectory.n_sites:
            raise InvalidSpecError(f"site must be within 1..{trajectory.n_sites}")
        return trajectory.series(site - 1)
    frame = pd.read_csv(path)
    if column is None:
        numeric = [c for c in frame.select_dtypes("number").columns if c not in ("t_ps", "t", "time", "step")]
        if not numeric:
            raise InvalidSpecError(f"{path} has no numeric value column")
        column = numeric[0]
    if column not in frame.columns:
        raise InvalidSpecError(f"{path} has no column '{column}'")
    return frame[column].to_numpy(dtype=float)


def _grid_from_args(args):
    from core.arima import GridSpec
    return GridSpec(p_max=args.p_max, d_max=args.d_max, q_max=args.q_max,
                    P_max=args.seasonal[0], D_max=args.seasonal[1], Q_max=args.seasonal[2], m=args.seasonal[3],
                    criterion=args.criterion)


def _add_grid_args(p):
    p.add_argument("--p-max", type=int, default=5, help="Largest AR order (default: 5)")
    p.add_argument("--d-max", type=int, default=2, help="Largest differencing order (default: 2)")
    p.add_argument("--q-max", type=int, default=3, help="Largest MA order (default: 3)")
    p.add_argument("--seasonal", type=int, nargs=4, metavar=("P", "D", "Q", "M"), default=[0, 0, 0, 0],
                   help="Seasonal search bounds and period (default: off)")
    p.add_argument("--criterion", choices=["aic", "validation"], default="aic",
                   help="Order selection criterion (default: aic)")


# ── Commands ──────────────────────────────────────────────────────────────────

def cmd_simulate(args) -> int:
    from core.heom import propagate, site_density_matrix
    from core.presets import PresetManager
    from core.system import load_system_config
    from core.trajectory import write_trajectory

    if bool(args.preset) == bool(args.config):
        raise InvalidSpecError("give exactly one of --preset or --config")
    cfg = PresetManager().get_config(args.preset) if args.preset else load_system_config(args.config)
    rho0 = site_density_matrix(cfg.rho0_site, cfg.system.n_sites)
    trajectory = propagate(cfg.system, cfg.bath, rho0, t_total=args.t_total, dt=args.dt,
                           depth=args.depth, store_full=args.store_full, workers=args.workers)
    path = write_trajectory(trajectory, args.output or _out_dir(args) / "trajectory.csv")
    audit = trajectory.audit()
    print(f"Wrote {len(trajectory)} rows to {path} (max |sum P - 1| = {audit.max_sum_deviation:.2e})")
    return 0


def cmd_hierarchy(args) -> int:
    from core.hierarchy import estimate_bytes, hierarchy_size

    needed = estimate_bytes(args.sites, args.depth)
    budget = config.MEMORY_BUDGET_MB * 2**20
    print(f"N={args.sites} K={args.depth}: {hierarchy_size(args.sites, args.depth)} ADOs, "
          f"~{needed / 2**20:.1f} MiB ({'fits' if needed <= budget else 'exceeds'} "
          f"{config.MEMORY_BUDGET_MB} MiB budget)")
    return 0


def cmd_presets(args) -> int:
    from core.presets import PresetManager

    pm = PresetManager()
    if args.save:
        if not args.name:
            raise InvalidSpecError("--save needs a preset name")
        try:
            data = json.loads(Path(args.save).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpecError(f"cannot read system config {args.save}: {exc}") from exc
        cfg = pm.save_preset(args.name, data)
        print(f"Saved preset {args.name} ({cfg.system.n_sites} sites) to {pm.presets_file}")
        return 0
    if args.name:
        print(json.dumps(pm.get_preset(args.name), indent=2))
    else:
        for name in pm.list_presets():
            print(f"  {name}{'' if pm.is_builtin(name) else '  (user)'}")
    return 0


def cmd_generate(args) -> int:
    from core.sweep import HeomSettings, SweepSpec, generate_dataset, STATUS_OK

    spec = SweepSpec(n_sites=args.sites, n_samples=args.n_samples, sampling_mode=args.mode, seed=args.seed,
                     lambda_range=(args.lambda_min, args.lambda_max))
    settings = HeomSettings(dt=args.dt, t_total=args.t_total, depth=args.depth, store_full=args.store_full)
    manifest = generate_dataset(spec, settings, _out_dir(args), workers=args.workers,
                                retry_failed=args.retry_failed)
    n_ok = int((manifest["status"] == STATUS_OK).sum())
    print(f"{n_ok} trajectories ok, {len(manifest) - n_ok} failed; manifest in {args.out_dir}")
    return 0 if n_ok else 1


def cmd_split(args) -> int:
    from core.sweep import completed_ids, read_manifest
    from core.windows import SPLIT_NAME, save_split, split_dataset

    split = split_dataset(completed_ids(read_manifest(args.dataset)), args.fractions, args.seed)
    path = save_split(split, Path(args.dataset) / SPLIT_NAME)
    print(f"train={len(split.train_ids)} val={len(split.val_ids)} test={len(split.test_ids)} -> {path}")
    return 0


def cmd_window(args) -> int:
    from core.sweep import completed_ids, read_manifest, read_sweep_settings
    from core.windows import build_windowed_frame, split_for_dataset, window_count, window_points

    _, settings = read_sweep_settings(args.dataset)
    L_in, L_out = window_points(args.lin_ps, args.lout_ps, settings.dt)
    n_points = int(round(settings.t_total / settings.dt)) + 1
    per_series = window_count(n_points, L_in, L_out, args.stride)
    if per_series == 0:
        raise InvalidSpecError(f"trajectories of {n_points} points cannot hold L_in + L_out = {L_in + L_out}")
    if args.split == "all":
        ids = completed_ids(read_manifest(args.dataset))
    else:
        ids = split_for_dataset(args.dataset, seed=args.seed).ids(args.split)
    frame = build_windowed_frame(args.dataset, ids, L_in, L_out, stride=args.stride)
    path = Path(args.output) if args.output else _out_dir(args) / f"windows_{args.split}.csv"
    frame.to_csv(path, index=False, float_format="%.12g")
    print(f"{len(frame)} windows ({per_series} per site, L_in={L_in}, L_out={L_out}) "
          f"from {len(ids)} trajectories -> {path}")
    return 0


def cmd_fit(args) -> int:
    from core.arima import grid_search_arima, save_model

    series = _read_series(args.input, args.site, args.column)
    if args.lin:
        series = series[:args.lin]
    model = grid_search_arima(series, grid=_grid_from_args(args))
    path = save_model(model, args.model_out or _out_dir(args) / "model.txt")
    print(f"{model.describe()} -> {path}")
    return 0


def cmd_predict(args) -> int:
    from core.arima import forecast_recursive, load_model

    model = load_model(args.model)
    history = _read_series(args.input, args.site, args.column) if args.input else None
    values = forecast_recursive(model, history, args.horizon, clip=not args.no_clip)
    frame = pd.DataFrame({"step": np.arange(1, args.horizon + 1), "forecast": values})
    if args.output:
        frame.to_csv(args.output, index=False, float_format="%.12g")
        print(f"{args.horizon} steps -> {args.output}")
    else:
        frame.to_csv(sys.stdout, index=False, float_format="%.12g")
    return 0


def cmd_benchmark(args) -> int:
    from core.evaluation import BenchmarkSpec, format_table, read_benchmark, run_benchmark
    from core.sweep import read_sweep_settings
    from core.windows import window_points

    _, settings = read_sweep_settings(args.dataset)
    L_in, _ = window_points(args.lin_ps, args.lin_ps, settings.dt)
    spec = BenchmarkSpec(model=args.model, L_in=L_in, horizon=args.horizon,
                         max_samples=args.max_samples, seed=args.seed, grid=_grid_from_args(args))
    out = _out_dir(args)
    result = run_benchmark(args.dataset, spec, out_dir=out, workers=args.workers,
                           save_forecasts=args.save_forecasts)
    print(format_table(read_benchmark(out / "benchmark.csv")))
    if result.audit is not None:
        print(f"\naudit: {result.audit.summary()}")
    return 0


def cmd_fmo(args) -> int:
    from core.fmo import fmo_demo, load_fmo_config
    from core.windows import window_points

    cfg = load_fmo_config(args.config)
    dt = args.dt or config.DT_PS
    L_in, _ = window_points(args.lin_ps, args.lin_ps, dt)
    result = fmo_demo(cfg, L_in=L_in, horizon=args.horizon, depth=args.depth, dt=dt, t_total=args.t_total,
                      check_convergence=not args.no_check, out_dir=_out_dir(args))
    if result.converged is not None:
        print(f"depth {args.depth} vs {args.depth - 2}: max difference {result.convergence_error:.2e} "
              f"({'converged' if result.converged else 'NOT converged'})")
    for name, path in result.outputs.items():
        print(f"  {name}: {path}")
    return 0


def cmd_audit(args) -> int:
    from core.evaluation import audit_properties, forecasts_from_frame

    groups = forecasts_from_frame(pd.read_csv(args.forecasts, dtype={"source_id": str}))
    report = audit_properties(groups)
    print(report.summary())
    return 0 if report.passed else 1


# ── Parser ────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="HeomCast CLI - HEOM exciton dynamics and SARIMA forecasts")
    parser.add_argument("--seed", type=int, default=0, help="Seed for sampling, splits and window draws")
    parser.add_argument("--out-dir", default="out", help="Output directory (default: ./out)")
    parser.add_argument("--workers", type=int, default=config.WORKERS, help="Worker processes")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Propagate one system")
    p.add_argument("--preset", help="Stored preset name")
    p.add_argument("--config", help="JSON system config")
    p.add_argument("--t-total", type=float, default=config.T_TOTAL_PS, help="ps")
    p.add_argument("--dt", type=float, default=config.DT_PS, help="ps")
    p.add_argument("--depth", type=int, default=config.DEPTH, help="Hierarchy truncation depth K")
    p.add_argument("--store-full", action="store_true", help="Also write full density matrices")
    p.add_argument("--output", "-o", help="Trajectory CSV (default: <out-dir>/trajectory.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hierarchy", help="Hierarchy size and memory estimate")
    p.add_argument("--sites", type=int, required=True)
    p.add_argument("--depth", type=int, default=config.DEPTH)
    p.set_defaults(func=cmd_hierarchy)

    p = sub.add_parser("presets", help="List presets, show one or save a config as one")
    p.add_argument("name", nargs="?")
    p.add_argument("--save", metavar="CONFIG", help="Store the JSON system config CONFIG under NAME")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("generate", help="Generate a trajectory dataset")
    p.add_argument("--n-samples", type=int, default=40000)
    p.add_argument("--mode", choices=["grid", "random"], default="random")
    p.add_argument("--sites", type=int, default=2)
    p.add_argument("--lambda-min", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=100.0)
    p.add_argument("--t-total", type=float, default=config.T_TOTAL_PS, help="ps")
    p.add_argument("--dt", type=float, default=config.DT_PS, help="ps")
    p.add_argument("--depth", type=int, default=config.DEPTH)
    p.add_argument("--store-full", action="store_true")
    p.add_argument("--retry-failed", action="store_true", help="Recompute points recorded as failed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("split", help="Split a dataset into train/val/test")
    p.add_argument("--dataset", required=True)
    p.add_argument("--fractions", type=float, nargs=3, default=[0.7, 0.1, 0.2])
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("window", help="Export sliding windows as CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=["train", "val", "test", "all"], default="train")
    p.add_argument("--lin-ps", type=float, default=0.2, help="Input window (ps)")
    p.add_argument("--lout-ps", type=float, default=0.6, help="Output window (ps)")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_window)

    p = sub.add_parser("fit", help="Fit a SARIMA model to one series")
    p.add_argument("--input", "-i", required=True, help="Trajectory file or CSV")
    p.add_argument("--site", type=int, default=1, help="Site of a trajectory file (1-based)")
    p.add_argument("--column", help="Column of a plain CSV")
    p.add_argument("--lin", type=int, help="Fit on the first LIN points only")
    p.add_argument("--model-out", help="Model file (default: <out-dir>/model.txt)")
    _add_grid_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="Forecast with a saved model")
    p.add_argument("--model", "-m", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--input", "-i", help="History to continue (default: the model's training tail)")
    p.add_argument("--site", type=int, default=1)
    p.add_argument("--column")
    p.add_argument("--no-clip", action="store_true", help="Do not clamp forecasts to [0, 1]")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", help="Score a model on the test split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=["sarima", "naive"], default="sarima")
    p.add_argument("--lin-ps", type=float, default=0.2)
    p.add_argument("--horizon", type=int, default=100, help="Steps")
    p.add_argument("--max-samples", type=int, default=100, help="Windows drawn from the test split")
    p.add_argument("--save-forecasts", action="store_true", help="Write tidy forecasts for `audit`")
    _add_grid_args(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("fmo", help="Seven-site demonstration")
    p.add_argument("--config", required=True, help="JSON with hamiltonian and bath (see templates/)")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--lin-ps", type=float, default=0.2)
    p.add_argument("--horizon", type=int, help="Steps (default: rest of the trajectory)")
    p.add_argument("--t-total", type=float, default=config.T_TOTAL_PS)
    p.add_argument("--dt", type=float)
    p.add_argument("--no-check", action="store_true", help="Skip the depth convergence check")
    p.set_defaults(func=cmd_fmo)

    p = sub.add_parser("audit", help="Property audit of saved forecasts")
    p.add_argument("--forecasts", required=True, help="forecasts_*.csv written by benchmark --save-forecasts")
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HeomCastError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except ValidationError as e:
        print(f"Error: {e.errors()[0]['msg']}", file=sys.stderr)
        return 1
    except KeyError as e:
        print(f"Error: {e.args[0] if e.args else e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
