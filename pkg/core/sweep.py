"""
Parameter sweeps over the exciton parameter box and dataset generation.

A dataset directory looks like:

    <out>/sweep.json              sweep + propagation settings (seed included)
    <out>/manifest.csv            one row per parameter point, status ok|failed
    <out>/failures.csv            failed points with their error
    <out>/trajectories/p000000.csv
"""

from __future__ import annotations

import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

import config
from .errors import HeomCastError, InvalidSpecError
from .heom import propagate, site_density_matrix
from .system import BathSpec, SystemSpec
from .trajectory import Trajectory, read_trajectory, write_trajectory

log = logging.getLogger(__name__)

# Parameter box of the benchmark dataset (cm^-1)
EPSILON_BOUNDS = (-100.0, 100.0)
J_BOUNDS = (-100.0, 100.0)
LAMBDA_BOUNDS = (1.0, 100.0)

MANIFEST_NAME = "manifest.csv"
FAILURES_NAME = "failures.csv"
SWEEP_NAME = "sweep.json"
TRAJECTORY_DIR = "trajectories"

STATUS_OK = "ok"
STATUS_FAILED = "failed"

CHECKPOINT_EVERY = 50


# ── Specs ─────────────────────────────────────────────────────────────────────

def _within(rng: Tuple[float, float], bounds: Tuple[float, float], name: str) -> None:
    lo, hi = rng
    if lo > hi:
        raise ValueError(f"{name} range is reversed: {rng}")
    if lo < bounds[0] or hi > bounds[1]:
        raise ValueError(f"{name} range {rng} leaves the parameter box {bounds}")


class SweepSpec(BaseModel):
    """What to sample: ranges (cm^-1), fixed bath cut-off/temperature, count, mode and seed."""
    model_config = ConfigDict(frozen=True)

    n_sites: int = Field(2, ge=2)
    epsilon_range: Tuple[float, float] = EPSILON_BOUNDS
    J_range: Tuple[float, float] = J_BOUNDS
    lambda_range: Tuple[float, float] = LAMBDA_BOUNDS
    gamma: float = Field(53.0, gt=0.0)
    temperature: float = Field(300.0, gt=0.0)
    n_samples: int = Field(40000, ge=1)
    sampling_mode: Literal["grid", "random"] = "random"
    seed: int = 0

    @model_validator(mode="after")
    def _check_ranges(self) -> "SweepSpec":
        _within(self.epsilon_range, EPSILON_BOUNDS, "epsilon")
        _within(self.J_range, J_BOUNDS, "J")
        _within(self.lambda_range, LAMBDA_BOUNDS, "lambda")
        if self.lambda_range[0] <= 0.0:
            raise ValueError("lambda lower bound must be strictly positive")
        return self


class HeomSettings(BaseModel):
    """Propagation protocol shared by every point of a sweep."""
    model_config = ConfigDict(frozen=True)

    dt: float = Field(default_factory=lambda: config.DT_PS, gt=0.0)
    t_total: float = Field(default_factory=lambda: config.T_TOTAL_PS, gt=0.0)
    depth: int = Field(default_factory=lambda: config.DEPTH, ge=0)
    store_full: bool = False
    rho0_site: int = Field(0, ge=0)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    epsilon: Tuple[float, ...]      # N site energies; the last site is the reference at 0
    J: Tuple[float, ...]            # N-1 nearest-neighbour couplings
    lam: float

    @property
    def point_id(self) -> str:
        return f"p{self.index:06d}"

    def system(self) -> SystemSpec:
        return SystemSpec.chain(self.epsilon, self.J)

    def bath(self, gamma: float, temperature: float) -> BathSpec:
        return BathSpec.uniform(len(self.epsilon), self.lam, gamma, temperature)


# ── Sampling ──────────────────────────────────────────────────────────────────

def grid_points_per_axis(n_samples: int, n_axes: int) -> int:
    """Largest k with k**n_axes <= n_samples."""
    k = max(1, int(round(n_samples ** (1.0 / n_axes))))
    while k ** n_axes > n_samples and k > 1:
        k -= 1
    while (k + 1) ** n_axes <= n_samples:
        k += 1
    return k


def sample_parameters(spec: SweepSpec) -> List[SweepPoint]:
    """
    Deterministic parameter points for a sweep.

    Axes: N-1 site energies (site N is fixed at 0), N-1 chain couplings, lambda.
    Grid mode lays k equally spaced values per axis with k**axes <= n_samples;
    random mode draws n_samples points uniformly from the box.
    """
    n = spec.n_sites
    n_axes = 2 * (n - 1) + 1
    if spec.sampling_mode == "grid":
        k = grid_points_per_axis(spec.n_samples, n_axes)
        eps_axis = np.linspace(*spec.epsilon_range, k)
        J_axis = np.linspace(*spec.J_range, k)
        lam_axis = np.linspace(*spec.lambda_range, k)
        axes = [eps_axis] * (n - 1) + [J_axis] * (n - 1) + [lam_axis]
        rows = np.array(list(itertools.product(*axes)), dtype=float)
        if len(rows) != spec.n_samples:
            log.warning("Grid mode: %d samples requested, %d^%d = %d points laid out",
                        spec.n_samples, k, n_axes, len(rows))
    else:
        rng = np.random.default_rng(spec.seed)
        eps = rng.uniform(*spec.epsilon_range, size=(spec.n_samples, n - 1))
        J = rng.uniform(*spec.J_range, size=(spec.n_samples, n - 1))
        lam = rng.uniform(*spec.lambda_range, size=(spec.n_samples, 1))
        rows = np.hstack([eps, J, lam])

    return [
        SweepPoint(index=i,
                   epsilon=tuple(float(v) for v in row[:n - 1]) + (0.0,),
                   J=tuple(float(v) for v in row[n - 1:2 * (n - 1)]),
                   lam=float(row[-1]))
        for i, row in enumerate(rows)
    ]


# ── Generation ────────────────────────────────────────────────────────────────

def _manifest_row(point: SweepPoint, spec: SweepSpec, status: str, file: str, error: str = "") -> Dict:
    row: Dict = {"id": point.point_id}
    row.update({f"epsilon_{j + 1}": v for j, v in enumerate(point.epsilon)})
    row.update({f"J_{j + 1}{j + 2}": v for j, v in enumerate(point.J)})
    row.update({"lambda": point.lam, "gamma": spec.gamma, "T": spec.temperature,
                "status": status, "file": file, "seed": spec.seed, "error": error})
    return row


def _trajectory_file(point: SweepPoint) -> str:
    return f"{TRAJECTORY_DIR}/{point.point_id}.csv"


def _acquire_lock(path: Path) -> bool:
    try:
        fd = os.open(str(path), os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        return False
    os.close(fd)
    return True


def run_point(point: SweepPoint, spec: SweepSpec, settings: HeomSettings, out_dir: str) -> Optional[Dict]:
    """
    Propagate one parameter point and write its trajectory file.

    Never raises for HEOM failures. Returns None when another worker holds the
    point's lock; the point is then left for a later run.
    """
    rel = _trajectory_file(point)
    lock = Path(out_dir) / TRAJECTORY_DIR / f"{point.point_id}.lock"
    if not _acquire_lock(lock):
        log.warning("Point %s is locked by another worker, leaving it unrecorded", point.point_id)
        return None
    try:
        system = point.system()
        bath = point.bath(spec.gamma, spec.temperature)
        rho0 = site_density_matrix(settings.rho0_site, spec.n_sites)
        trajectory = propagate(system, bath, rho0, t_total=settings.t_total, dt=settings.dt,
                               depth=settings.depth, store_full=settings.store_full)
        audit = trajectory.audit()
        if not audit.ok:
            raise InvalidSpecError(
                f"trajectory failed audit (sum deviation {audit.max_sum_deviation:.2e}, "
                f"populations in [{audit.min_population:.3g}, {audit.max_population:.3g}])")
        write_trajectory(trajectory, Path(out_dir) / rel)
        return _manifest_row(point, spec, STATUS_OK, rel)
    except HeomCastError as exc:
        log.warning("Point %s failed: %s", point.point_id, exc)
        return _manifest_row(point, spec, STATUS_FAILED, "", str(exc))
    finally:
        lock.unlink(missing_ok=True)


def _run_point_job(args) -> Optional[Dict]:
    return run_point(*args)


def _check_same_sweep(out: Path, spec: SweepSpec, settings: HeomSettings) -> None:
    """A dataset directory only ever holds one sweep; resuming with other settings is refused."""
    path = out / SWEEP_NAME
    if not path.exists():
        return
    old_spec, old_settings = read_sweep_settings(out)
    changed = []
    for before, after in ((old_spec, spec), (old_settings, settings)):
        current = after.model_dump(mode="json")
        for name, old in before.model_dump(mode="json").items():
            new = current.get(name)
            if new != old:
                changed.append(f"{name}: {old!r} -> {new!r}")
    if changed:
        raise InvalidSpecError(f"{out} holds a sweep generated with other settings "
                               f"({'; '.join(changed)}); use a fresh output directory")


def _clear_stale_locks(out: Path) -> None:
    stale = list((out / TRAJECTORY_DIR).glob("*.lock"))
    for lock in stale:
        lock.unlink(missing_ok=True)
    if stale:
        log.warning("Removed %d stale lock file(s) left by an interrupted sweep", len(stale))


def _recorded_points(out: Path, points: List[SweepPoint], spec: SweepSpec, retry_failed: bool) -> Dict[str, Dict]:
    """Points a previous run finished: manifest rows first, then trajectory files the manifest never saw."""
    done: Dict[str, Dict] = {}
    if (out / MANIFEST_NAME).exists():
        for row in read_manifest(out).to_dict("records"):
            finished = row["status"] == STATUS_OK and (out / str(row["file"])).exists()
            if finished or (row["status"] == STATUS_FAILED and not retry_failed):
                done[row["id"]] = row
    recovered = 0
    for point in points:
        if point.point_id not in done and (out / _trajectory_file(point)).exists():
            done[point.point_id] = _manifest_row(point, spec, STATUS_OK, _trajectory_file(point))
            recovered += 1
    if recovered:
        log.info("Recovered %d finished trajectories missing from the manifest", recovered)
    return done


def generate_dataset(spec: SweepSpec, settings: Optional[HeomSettings] = None,
                     out_dir: Union[str, Path] = "dataset", workers: Optional[int] = None,
                     retry_failed: bool = False,
                     progress: Optional[Callable[[int, int], None]] = None,
                     should_stop: Optional[Callable[[], bool]] = None) -> pd.DataFrame:
    """
    Propagate every sweep point not already finished and write the manifest.

    One sweep process per directory. Re-runs in the same directory must use the
    same SweepSpec and HeomSettings (InvalidSpecError otherwise). They skip points already recorded (failed
    points too, unless retry_failed) and trajectory files already on disk. The
    manifest is checkpointed every CHECKPOINT_EVERY points, so an interrupted
    sweep loses at most the points in flight. Per-point failures are recorded,
    never raised.
    """
    settings = settings or HeomSettings()
    workers = workers or config.WORKERS
    out = Path(out_dir)
    (out / TRAJECTORY_DIR).mkdir(parents=True, exist_ok=True)
    _check_same_sweep(out, spec, settings)
    (out / SWEEP_NAME).write_text(json.dumps(
        {"sweep": spec.model_dump(mode="json"), "heom": settings.model_dump(mode="json")}, indent=2))
    _clear_stale_locks(out)

    points = sample_parameters(spec)
    done = _recorded_points(out, points, spec, retry_failed)
    todo = [p for p in points if p.point_id not in done]
    log.info("Sweep: %d points, %d already recorded, %d to run (workers=%d)",
             len(points), len(points) - len(todo), len(todo), workers)

    results: Dict[str, Dict] = {}
    jobs = [(p, spec, settings, str(out)) for p in todo]

    def collect(i: int, row: Optional[Dict]) -> None:
        if row is not None:
            results[row["id"]] = row
        if progress:
            progress(i + 1, len(jobs))
        if (i + 1) % CHECKPOINT_EVERY == 0:
            write_manifest(_merge(points, results, done), out)

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, row in enumerate(pool.map(_run_point_job, jobs)):
                collect(i, row)
    else:
        for i, job in enumerate(jobs):
            if should_stop and should_stop():
                log.info("Sweep stopped after %d of %d points", i, len(jobs))
                break
            collect(i, _run_point_job(job))

    manifest = _merge(points, results, done)
    write_manifest(manifest, out)
    n_failed = int((manifest["status"] == STATUS_FAILED).sum()) if len(manifest) else 0
    log.info("Sweep finished: %d ok, %d failed", len(manifest) - n_failed, n_failed)
    return manifest


def _merge(points: List[SweepPoint], results: Dict[str, Dict], done: Dict[str, Dict]) -> pd.DataFrame:
    rows = [results.get(p.point_id) or done.get(p.point_id) for p in points]
    return pd.DataFrame([r for r in rows if r is not None])


# ── Manifest ──────────────────────────────────────────────────────────────────

def write_manifest(manifest: pd.DataFrame, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    manifest = manifest.sort_values("id").reset_index(drop=True) if len(manifest) else manifest
    manifest.to_csv(out / MANIFEST_NAME, index=False)
    failed = manifest[manifest["status"] == STATUS_FAILED] if len(manifest) else manifest
    failed.loc[:, [c for c in ("id", "error") if c in failed.columns]].to_csv(out / FAILURES_NAME, index=False)


def read_manifest(dataset_dir: Union[str, Path]) -> pd.DataFrame:
    path = Path(dataset_dir) / MANIFEST_NAME
    if not path.exists():
        raise InvalidSpecError(f"no manifest at {path}")
    return pd.read_csv(path, dtype={"id": str, "file": str, "error": str}, keep_default_na=False)


def completed_ids(manifest: pd.DataFrame) -> List[str]:
    return sorted(manifest.loc[manifest["status"] == STATUS_OK, "id"].tolist())


def load_dataset_trajectory(dataset_dir: Union[str, Path], point_id: str,
                            manifest: Optional[pd.DataFrame] = None) -> Trajectory:
    """Read one trajectory and re-audit its populations at ingestion."""
    manifest = manifest if manifest is not None else read_manifest(dataset_dir)
    match = manifest.loc[manifest["id"] == point_id]
    if match.empty or match.iloc[0]["status"] != STATUS_OK:
        raise InvalidSpecError(f"{point_id} is not a completed point of {dataset_dir}")
    trajectory = read_trajectory(Path(dataset_dir) / match.iloc[0]["file"])
    audit = trajectory.audit()
    if not audit.ok:
        raise InvalidSpecError(f"{point_id}: stored populations fail the audit "
                               f"(sum deviation {audit.max_sum_deviation:.2e})")
    return trajectory


def read_sweep_settings(dataset_dir: Union[str, Path]) -> Tuple[SweepSpec, HeomSettings]:
    """The sweep and propagation settings a dataset was generated with."""
    path = Path(dataset_dir) / SWEEP_NAME
    try:
        data = json.loads(path.read_text())
        return SweepSpec(**data["sweep"]), HeomSettings(**data["heom"])
    except (OSError, ValueError, KeyError) as exc:
        raise InvalidSpecError(f"cannot read sweep settings {path}: {exc}") from exc
