"""
Scoring, benchmark runs over a dataset's test split, and the population
property audit for forecasts.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Literal, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

import config
from .arima import GridSpec, fit_and_forecast, naive_forecast
from .errors import AuditError, BenchmarkError, HeomCastError, InvalidSpecError
from .sweep import load_dataset_trajectory, read_manifest
from .trajectory import Trajectory
from .windows import split_for_dataset

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05
SUM_TOL = 0.05
MIN_TOL = -0.02
PASS_FRACTION = 0.95

BENCHMARK_NAME = "benchmark.csv"
BENCHMARK_COLUMNS = ["model", "levels", "horizon", "mse_mean", "mse_std", "sec_per_sample", "n"]
BENCHMARK_HEADER = "# mse_std is the standard deviation over test samples"

ModelName = Literal["sarima", "naive"]


def mse(predictions: Sequence[float], truth: Sequence[float]) -> float:
    """Mean squared error."""
    pred = np.asarray(predictions, dtype=float)
    true = np.asarray(truth, dtype=float)
    if pred.shape != true.shape or pred.ndim != 1:
        raise InvalidSpecError(f"length mismatch: {pred.shape} vs {true.shape}")
    if len(pred) == 0:
        raise InvalidSpecError("mse needs at least one value")
    return float(np.mean((true - pred) ** 2))


# ── Reports ───────────────────────────────────────────────────────────────────

class EvalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    model_name: str
    system_levels: int = Field(..., ge=1)
    horizon_steps: int = Field(..., ge=1)
    mse_mean: float = Field(..., ge=0.0)
    mse_std: float = Field(..., ge=0.0)
    seconds_per_sample: float = Field(..., ge=0.0)
    n_samples: int = Field(..., ge=1)
    n_failed: int = Field(0, ge=0)

    @property
    def failure_rate(self) -> float:
        return self.n_failed / (self.n_samples + self.n_failed)

    def as_row(self) -> Dict:
        return {"model": self.model_name, "levels": self.system_levels, "horizon": self.horizon_steps,
                "mse_mean": self.mse_mean, "mse_std": self.mse_std,
                "sec_per_sample": self.seconds_per_sample, "n": self.n_samples}


def aggregate(model_name: str, levels: int, horizon: int, scores: Sequence[float],
              seconds: Sequence[float], n_failed: int = 0) -> EvalReport:
    scores = np.asarray(scores, dtype=float)
    if len(scores) == 0:
        raise BenchmarkError("no successful samples to aggregate")
    return EvalReport(model_name=model_name, system_levels=levels, horizon_steps=horizon,
                      mse_mean=float(scores.mean()), mse_std=float(scores.std()),
                      seconds_per_sample=float(np.mean(seconds)), n_samples=len(scores),
                      n_failed=n_failed)


def write_benchmark_row(report: EvalReport, path: Union[str, Path]) -> Path:
    """Append one report row, creating the file with its header comment if needed."""
    path = Path(path)
    fresh = not path.exists()
    with open(path, "a", newline="") as fh:
        if fresh:
            fh.write(BENCHMARK_HEADER + "\n")
        pd.DataFrame([report.as_row()], columns=BENCHMARK_COLUMNS).to_csv(
            fh, index=False, header=fresh, float_format="%.6g")
    return path


def read_benchmark(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def format_table(rows: pd.DataFrame) -> str:
    """
    Render benchmark rows as model x levels cells: "MSE(1e-3) ± std / sec".
    One block per horizon.
    """
    blocks = []
    for horizon, part in rows.groupby("horizon", sort=True):
        cells = part.assign(cell=[
            f"{r.mse_mean * 1e3:.4f} ± {r.mse_std * 1e3:.4f} ({r.sec_per_sample:.2f} s)"
            for r in part.itertuples()])
        table = cells.pivot_table(index="model", columns="levels", values="cell", aggfunc="last")
        table.columns = [f"{c}-level" for c in table.columns]
        blocks.append(f"horizon = {horizon} steps (MSE x 1e-3)\n{table.to_string()}")
    return "\n\n".join(blocks)


# ── Property audit ────────────────────────────────────────────────────────────

class PropertyReport(NamedTuple):
    sum_deviation: np.ndarray     # |sum_j P_j - 1| per step, all systems concatenated
    min_population: np.ndarray    # min_j P_j per step
    quantiles: Dict[str, float]
    sum_pass_fraction: float
    min_pass_fraction: float
    pass_fraction: float

    @property
    def passed(self) -> bool:
        return self.pass_fraction >= PASS_FRACTION

    def summary(self) -> str:
        q = self.quantiles
        return (f"steps={len(self.sum_deviation)} pass={self.pass_fraction:.3f} "
                f"|sum-1| median={q['sum_dev_q50']:.2e} q95={q['sum_dev_q95']:.2e} "
                f"min P q05={q['min_pop_q05']:.2e} -> {'PASS' if self.passed else 'FAIL'}")


def _as_site_matrix(group, n_sites: Optional[int]) -> np.ndarray:
    if isinstance(group, Mapping):
        if not group:
            raise AuditError("empty forecast group")
        expected = n_sites if n_sites is not None else max(group) + 1
        missing = sorted(set(range(expected)) - set(group))
        if missing:
            raise AuditError(f"forecasts missing for sites {missing}")
        lengths = {len(np.asarray(group[s])) for s in range(expected)}
        if len(lengths) != 1:
            raise AuditError(f"site forecasts are not on a common grid (lengths {sorted(lengths)})")
        return np.vstack([np.asarray(group[s], dtype=float) for s in range(expected)])
    matrix = np.asarray(group, dtype=float)
    if matrix.ndim != 2:
        raise AuditError("forecast group must be a (sites, steps) array or a site -> series mapping")
    if n_sites is not None and matrix.shape[0] != n_sites:
        raise AuditError(f"expected {n_sites} sites, got {matrix.shape[0]}")
    return matrix


def audit_properties(groups: Sequence, n_sites: Optional[int] = None) -> PropertyReport:
    """
    Check that forecasts behave like populations: per step, |sum_j P_j - 1| <= 0.05
    and min_j P_j >= -0.02, on at least 95% of steps.

    Each group holds every site of one system on a common time grid, either as a
    (sites, steps) array or as a {site: series} mapping.
    """
    if not len(groups):
        raise AuditError("no forecasts to audit")
    sums, mins = [], []
    for group in groups:
        matrix = _as_site_matrix(group, n_sites)
        sums.append(np.abs(matrix.sum(axis=0) - 1.0))
        mins.append(matrix.min(axis=0))
    sum_dev = np.concatenate(sums)
    min_pop = np.concatenate(mins)
    sum_ok = sum_dev <= SUM_TOL
    min_ok = min_pop >= MIN_TOL
    quantiles = {
        "sum_dev_q50": float(np.quantile(sum_dev, 0.5)),
        "sum_dev_q95": float(np.quantile(sum_dev, 0.95)),
        "sum_dev_max": float(sum_dev.max()),
        "min_pop_q05": float(np.quantile(min_pop, 0.05)),
        "min_pop_q50": float(np.quantile(min_pop, 0.5)),
        "min_pop_min": float(min_pop.min()),
    }
    return PropertyReport(sum_dev, min_pop, quantiles, float(sum_ok.mean()), float(min_ok.mean()),
                          float((sum_ok & min_ok).mean()))


# ── Benchmark ─────────────────────────────────────────────────────────────────

class BenchmarkSpec(BaseModel):
    """One benchmark run: model, window geometry, sample count and order-search box."""
    model_config = ConfigDict(frozen=True)

    model: ModelName = "sarima"
    L_in: int = Field(1001, ge=2)
    horizon: int = Field(100, ge=1)
    max_samples: int = Field(100, ge=1)
    seed: int = 0
    grid: GridSpec = GridSpec()


@dataclass
class BenchmarkResult:
    report: EvalReport
    samples: pd.DataFrame
    audit: Optional[PropertyReport] = None
    forecasts: Dict[Tuple[str, int], np.ndarray] = field(default_factory=dict, repr=False)


@lru_cache(maxsize=8)
def _cached_trajectory(dataset_dir: str, point_id: str) -> Trajectory:
    return load_dataset_trajectory(dataset_dir, point_id)


def _score_sample(task) -> Tuple[List[Dict], Optional[np.ndarray]]:
    """Fit and forecast every site of one (trajectory, offset) window."""
    dataset_dir, point_id, offset, spec = task
    trajectory = _cached_trajectory(dataset_dir, point_id)
    rows, forecasts = [], []
    for site in range(trajectory.n_sites):
        series = trajectory.series(site)
        history = series[offset:offset + spec.L_in]
        truth = series[offset + spec.L_in:offset + spec.L_in + spec.horizon]
        started = time.perf_counter()
        try:
            if spec.model == "naive":
                forecast = naive_forecast(history, spec.horizon)
            else:
                forecast = fit_and_forecast(history, spec.horizon, spec.grid)
            elapsed = time.perf_counter() - started
            rows.append({"source_id": point_id, "offset": offset, "site": site,
                         "mse": mse(forecast, truth), "seconds": elapsed, "status": "ok", "error": ""})
            forecasts.append(forecast)
        except (HeomCastError, np.linalg.LinAlgError) as exc:
            rows.append({"source_id": point_id, "offset": offset, "site": site,
                         "mse": float("nan"), "seconds": time.perf_counter() - started,
                         "status": "failed", "error": str(exc)})
    complete = len(forecasts) == trajectory.n_sites
    return rows, (np.vstack(forecasts) if complete else None)


def sample_windows(dataset_dir: Union[str, Path], test_ids: Sequence[str], L_in: int, horizon: int,
                   max_samples: int, seed: int) -> List[Tuple[str, int]]:
    """Seeded draw of (trajectory id, offset) pairs from the test trajectories."""
    manifest = read_manifest(dataset_dir)
    candidates: List[Tuple[str, int]] = []
    for point_id in sorted(test_ids):
        n_points = len(load_dataset_trajectory(dataset_dir, point_id, manifest))
        if n_points < L_in + horizon:
            raise BenchmarkError(f"{point_id}: {n_points} points cannot hold L_in + horizon = {L_in + horizon}")
        candidates.extend((point_id, off) for off in range(n_points - L_in - horizon + 1))
    if not candidates:
        raise BenchmarkError("test split is empty")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=min(max_samples, len(candidates)), replace=False)
    return [candidates[i] for i in sorted(chosen)]


def run_benchmark(dataset_dir: Union[str, Path], spec: Optional[BenchmarkSpec] = None,
                  out_dir: Optional[Union[str, Path]] = None, workers: Optional[int] = None,
                  save_forecasts: bool = False,
                  progress: Optional[Callable[[int, int], None]] = None) -> BenchmarkResult:
    """
    Score one model on windows sampled from the test split of a dataset.

    Every site of each sampled window is fitted on its first L_in points and
    scored on the next `horizon` points. Failed site fits are excluded; more
    than 5% failures fails the run. With out_dir, writes the per-sample CSV and
    appends the aggregate row to benchmark.csv.
    """
    spec = spec or BenchmarkSpec()
    workers = workers or config.WORKERS
    dataset_dir = str(dataset_dir)
    split = split_for_dataset(dataset_dir, seed=spec.seed)
    if not split.test_ids:
        raise BenchmarkError("test split is empty")
    windows = sample_windows(dataset_dir, split.test_ids, spec.L_in, spec.horizon, spec.max_samples, spec.seed)
    log.info("Benchmark %s: %d windows from %d test trajectories, L_in=%d, horizon=%d",
             spec.model, len(windows), len(split.test_ids), spec.L_in, spec.horizon)

    tasks = [(dataset_dir, point_id, offset, spec) for point_id, offset in windows]
    results = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, result in enumerate(pool.map(_score_sample, tasks, chunksize=4)):
                results.append(result)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, task in enumerate(tasks):
            results.append(_score_sample(task))
            if progress:
                progress(i + 1, len(tasks))

    samples = pd.DataFrame([row for rows, _ in results for row in rows])
    ok = samples[samples["status"] == "ok"]
    n_failed = len(samples) - len(ok)
    rate = n_failed / len(samples)
    if rate > MAX_FAILURE_RATE:
        raise BenchmarkError(f"{n_failed} of {len(samples)} site fits failed ({rate:.1%} > 5%)")
    if n_failed:
        log.warning("%d of %d site fits failed and were excluded", n_failed, len(samples))

    levels = int(samples["site"].max()) + 1
    report = aggregate(spec.model, levels, spec.horizon, ok["mse"], ok["seconds"], n_failed)
    forecasts = {(pid, off): f for (pid, off), (_, f) in zip(windows, results) if f is not None}
    audit = audit_properties(list(forecasts.values())) if forecasts else None
    result = BenchmarkResult(report=report, samples=samples, audit=audit, forecasts=forecasts)
    log.info("Benchmark %s: mse %.4e ± %.4e over %d samples (%.3f s/sample)",
             spec.model, report.mse_mean, report.mse_std, report.n_samples, report.seconds_per_sample)

    if out_dir is not None:
        write_benchmark_outputs(result, spec, out_dir, save_forecasts)
    return result


def write_benchmark_outputs(result: BenchmarkResult, spec: BenchmarkSpec,
                            out_dir: Union[str, Path], save_forecasts: bool = False) -> Dict[str, Path]:
    """
    Per-sample scores (deterministic columns only), the appended aggregate row
    and optionally the tidy forecasts used by `audit`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{spec.model}_L{result.report.system_levels}_h{spec.horizon}"
    paths = {"samples": out / f"samples_{stem}.csv", "benchmark": out / BENCHMARK_NAME}
    (result.samples.drop(columns=["seconds"])
        .sort_values(["source_id", "offset", "site"])
        .to_csv(paths["samples"], index=False, float_format="%.10e"))
    write_benchmark_row(result.report, paths["benchmark"])
    if save_forecasts:
        paths["forecasts"] = out / f"forecasts_{stem}.csv"
        forecasts_to_frame(result.forecasts).to_csv(paths["forecasts"], index=False, float_format="%.10e")
    return paths


def forecasts_to_frame(forecasts: Mapping[Tuple[str, int], np.ndarray]) -> pd.DataFrame:
    """Tidy layout: source_id, offset, site, step, value."""
    frames = []
    for (point_id, offset), matrix in sorted(forecasts.items()):
        n_sites, n_steps = matrix.shape
        frames.append(pd.DataFrame({
            "source_id": point_id,
            "offset": offset,
            "site": np.repeat(np.arange(n_sites), n_steps),
            "step": np.tile(np.arange(n_steps), n_sites),
            "value": matrix.ravel(),
        }))
    if not frames:
        return pd.DataFrame(columns=["source_id", "offset", "site", "step", "value"])
    return pd.concat(frames, ignore_index=True)


def forecasts_from_frame(frame: pd.DataFrame) -> List[Dict[int, np.ndarray]]:
    """Group a tidy forecast table back into one {site: series} mapping per system window."""
    required = {"source_id", "offset", "site", "step", "value"}
    if not required <= set(frame.columns):
        raise AuditError(f"forecast table needs columns {sorted(required)}")
    groups = []
    for _, part in frame.groupby(["source_id", "offset"], sort=True):
        groups.append({int(site): rows.sort_values("step")["value"].to_numpy()
                       for site, rows in part.groupby("site")})
    return groups
