"""
Trajectory container and the on-disk trajectory format.

File layout (one per parameter point):

    # sites=2 dt_ps=0.0002 K=20 epsilon=100,0 J=0,100;100,0 lambda=35,35 gamma=53,53 T=300
    t_ps,P1,P2
    0,1,0
    ...

Full density matrices, when stored, go to a sidecar `<name>.rho.bin`: row-major
little-endian complex128 (real/imag float64 pairs), shape (n_times, N, N).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, NamedTuple, Optional, Union

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

POPULATION_TOL = 1e-6
SIDECAR_SUFFIX = ".rho.bin"
_SIDECAR_DTYPE = np.dtype("<c16")


class TrajectoryAudit(NamedTuple):
    max_sum_deviation: float
    min_population: float
    max_population: float

    @property
    def ok(self) -> bool:
        return (self.max_sum_deviation <= POPULATION_TOL
                and self.min_population >= -POPULATION_TOL
                and self.max_population <= 1.0 + POPULATION_TOL)


@dataclass
class Trajectory:
    times: np.ndarray                          # (T,) ps
    populations: np.ndarray                    # (T, N) real
    density_matrices: Optional[np.ndarray] = None   # (T, N, N) complex
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return int(self.populations.shape[1])

    def __len__(self) -> int:
        return len(self.times)

    def series(self, site: int) -> np.ndarray:
        return self.populations[:, site]

    def audit(self) -> TrajectoryAudit:
        P = self.populations
        if not np.all(np.isfinite(P)):
            return TrajectoryAudit(float("inf"), float("-inf"), float("inf"))
        return TrajectoryAudit(
            max_sum_deviation=float(np.max(np.abs(P.sum(axis=1) - 1.0))),
            min_population=float(P.min()),
            max_population=float(P.max()),
        )


# ── Header ────────────────────────────────────────────────────────────────────

def _fmt_list(values) -> str:
    return ",".join(f"{float(v):.12g}" for v in values)


def format_header(meta: Dict[str, Any]) -> str:
    J = np.asarray(meta.get("J", [[0.0]]), dtype=float)
    parts = [
        f"sites={meta['sites']}",
        f"dt_ps={float(meta['dt_ps']):.12g}",
        f"K={meta['K']}",
        f"epsilon={_fmt_list(meta['epsilon'])}",
        "J=" + ";".join(_fmt_list(row) for row in J),
        f"lambda={_fmt_list(meta['lambda'])}",
        f"gamma={_fmt_list(meta['gamma'])}",
        f"T={float(meta['T']):.12g}",
    ]
    return "# " + " ".join(parts)


def parse_header(line: str) -> Dict[str, Any]:
    meta: Dict[str, Any] = {}
    for token in line.lstrip("#").split():
        key, _, value = token.partition("=")
        if key in ("sites", "K"):
            meta[key] = int(value)
        elif key in ("dt_ps", "T"):
            meta[key] = float(value)
        elif key == "J":
            meta[key] = [[float(v) for v in row.split(",")] for row in value.split(";")]
        elif key in ("epsilon", "lambda", "gamma"):
            meta[key] = [float(v) for v in value.split(",")]
    return meta


# ── Read / write ──────────────────────────────────────────────────────────────

def write_trajectory(trajectory: Trajectory, path: Union[str, Path]) -> Path:
    """Write header + CSV; writes the density sidecar too when matrices are present."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["t_ps"] + [f"P{j + 1}" for j in range(trajectory.n_sites)]
    frame = pd.DataFrame(np.column_stack([trajectory.times, trajectory.populations]), columns=columns)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "w", newline="") as fh:
        fh.write(format_header(trajectory.meta) + "\n")
        frame.to_csv(fh, index=False, float_format="%.15g")
    tmp.replace(path)
    log.debug("Wrote %s (%d steps, %d sites)", path, len(trajectory), trajectory.n_sites)
    if trajectory.density_matrices is not None:
        write_density_sidecar(trajectory.density_matrices, sidecar_path(path))
    return path


def read_trajectory(path: Union[str, Path], load_full: bool = False) -> Trajectory:
    path = Path(path)
    with open(path) as fh:
        meta = parse_header(fh.readline())
        frame = pd.read_csv(fh)
    values = frame.to_numpy(dtype=float)
    density = None
    if load_full and sidecar_path(path).exists():
        density = read_density_sidecar(sidecar_path(path), values.shape[1] - 1)
    return Trajectory(times=values[:, 0], populations=values[:, 1:], density_matrices=density, meta=meta)


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + SIDECAR_SUFFIX)


def write_density_sidecar(matrices: np.ndarray, path: Union[str, Path]) -> None:
    np.ascontiguousarray(matrices, dtype=_SIDECAR_DTYPE).tofile(str(path))


def read_density_sidecar(path: Union[str, Path], n_sites: int) -> np.ndarray:
    data = np.fromfile(str(path), dtype=_SIDECAR_DTYPE)
    return data.reshape(-1, n_sites, n_sites).astype(np.complex128)

