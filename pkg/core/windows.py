"""
Sliding windows over population series and train/val/test splits of a dataset.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InvalidSpecError, SeriesTooShortError
from .sweep import load_dataset_trajectory, read_manifest

log = logging.getLogger(__name__)

SPLIT_NAME = "split.json"
DEFAULT_FRACTIONS = (0.7, 0.1, 0.2)


@dataclass
class WindowedSample:
    input: np.ndarray
    target: np.ndarray
    source_id: str = ""
    offset: int = 0
    site: int = 0


def window_points(input_ps: float, output_ps: float, dt: float) -> Tuple[int, int]:
    """
    Window lengths in samples for durations in ps.

    The input window includes both end points (0.2 ps at 0.2 fs -> 1001 samples);
    the output continues from the next sample (0.6 ps -> 3000 samples).
    """
    if dt <= 0 or input_ps <= 0 or output_ps <= 0:
        raise InvalidSpecError("window durations and dt must be positive")
    return int(round(input_ps / dt)) + 1, int(round(output_ps / dt))


def window_count(n_points: int, L_in: int, L_out: int, stride: int = 1) -> int:
    span = L_in + L_out
    if n_points < span:
        return 0
    return (n_points - span) // stride + 1


def slide_windows(series: Sequence[float], L_in: int, L_out: int, source_id: str = "",
                  site: int = 0, stride: int = 1) -> List[WindowedSample]:
    """Every (input, target) pair of consecutive L_in and L_out samples, offset advancing by stride."""
    if L_in < 1 or L_out < 1 or stride < 1:
        raise InvalidSpecError(f"need L_in, L_out, stride >= 1 (got {L_in}, {L_out}, {stride})")
    values = np.asarray(series, dtype=float)
    if len(values) < L_in + L_out:
        raise SeriesTooShortError(L_in + L_out, len(values))
    views = sliding_window_view(values, L_in + L_out)[::stride]
    return [
        WindowedSample(input=view[:L_in].copy(), target=view[L_in:].copy(),
                       source_id=source_id, offset=i * stride, site=site)
        for i, view in enumerate(views)
    ]


# ── Splits ────────────────────────────────────────────────────────────────────

class SplitManifest(BaseModel):
    """Disjoint train/val/test trajectory ids plus the seed that produced them."""
    model_config = ConfigDict(frozen=True)

    train_ids: Tuple[str, ...]
    val_ids: Tuple[str, ...]
    test_ids: Tuple[str, ...]
    fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS
    seed: int = 0

    @model_validator(mode="after")
    def _check_disjoint(self) -> "SplitManifest":
        train, val, test = set(self.train_ids), set(self.val_ids), set(self.test_ids)
        if train & val or train & test or val & test:
            raise ValueError("split partitions overlap")
        return self

    def ids(self, part: str) -> Tuple[str, ...]:
        try:
            return {"train": self.train_ids, "val": self.val_ids, "test": self.test_ids}[part]
        except KeyError:
            raise InvalidSpecError(f"unknown split part '{part}'") from None


def split_dataset(ids: Iterable[str], fractions: Sequence[float] = DEFAULT_FRACTIONS,
                  seed: int = 0) -> SplitManifest:
    """Seeded shuffle of trajectory ids into train/val/test; the test part is never empty."""
    ids = sorted(set(ids))
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidSpecError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    if not ids:
        raise InvalidSpecError("cannot split an empty dataset")

    n = len(ids)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    while n_train + n_val > n - 1 and (n_train or n_val):
        if n_val:
            n_val -= 1
        else:
            n_train -= 1

    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    manifest = SplitManifest(
        train_ids=tuple(sorted(shuffled[:n_train])),
        val_ids=tuple(sorted(shuffled[n_train:n_train + n_val])),
        test_ids=tuple(sorted(shuffled[n_train + n_val:])),
        fractions=fractions,
        seed=seed,
    )
    log.info("Split %d trajectories: %d train / %d val / %d test (seed %d)",
             n, len(manifest.train_ids), len(manifest.val_ids), len(manifest.test_ids), seed)
    return manifest


def save_split(manifest: SplitManifest, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(manifest.model_dump_json(indent=2))
    return path


def load_split(path: Union[str, Path]) -> SplitManifest:
    try:
        return SplitManifest.model_validate_json(Path(path).read_text())
    except (OSError, ValidationError) as exc:
        raise InvalidSpecError(f"cannot read split manifest {path}: {exc}") from exc


def split_for_dataset(dataset_dir: Union[str, Path], seed: int = 0,
                      fractions: Sequence[float] = DEFAULT_FRACTIONS) -> SplitManifest:
    """Load <dataset>/split.json, creating it from the completed ids on first use."""
    path = Path(dataset_dir) / SPLIT_NAME
    if path.exists():
        return load_split(path)
    manifest = read_manifest(dataset_dir)
    ids = manifest.loc[manifest["status"] == "ok", "id"].tolist()
    split = split_dataset(ids, fractions, seed)
    save_split(split, path)
    return split


# ── Tabular export ────────────────────────────────────────────────────────────

def build_windowed_frame(dataset_dir: Union[str, Path], ids: Iterable[str], L_in: int, L_out: int,
                         stride: int = 1, sites: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """
    One row per window: source_id, site, offset, input_0..input_{L_in-1}, target_0..
    Sites are 0-based; all sites are used when `sites` is None.
    """
    manifest = read_manifest(dataset_dir)
    keys: List[Tuple[str, int, int]] = []
    blocks: List[np.ndarray] = []
    for point_id in ids:
        trajectory = load_dataset_trajectory(dataset_dir, point_id, manifest)
        for site in (sites if sites is not None else range(trajectory.n_sites)):
            series = trajectory.series(site)
            if window_count(len(series), L_in, L_out, stride) == 0:
                raise SeriesTooShortError(L_in + L_out, len(series), f"trajectory {point_id}")
            views = sliding_window_view(series, L_in + L_out)[::stride]
            blocks.append(views)
            keys.extend((point_id, site, i * stride) for i in range(len(views)))

    columns = [f"input_{i}" for i in range(L_in)] + [f"target_{i}" for i in range(L_out)]
    values = np.vstack(blocks) if blocks else np.empty((0, L_in + L_out))
    frame = pd.DataFrame(values, columns=columns)
    frame.insert(0, "offset", [k[2] for k in keys])
    frame.insert(0, "site", [k[1] for k in keys])
    frame.insert(0, "source_id", [k[0] for k in keys])
    return frame
