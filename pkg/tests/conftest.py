import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

import config  # noqa: E402
from core.system import BathSpec, SystemSpec  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep preset files and other per-user state out of the real home directory."""
    home = tmp_path / "heomcast-home"
    monkeypatch.setattr(config, "HEOMCAST_HOME", home)
    return home


@pytest.fixture
def dimer():
    return SystemSpec.chain([100.0, 0.0], [100.0])


@pytest.fixture
def dimer_bath():
    return BathSpec.uniform(2, 35.0, 53.0, 300.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def repo_root():
    return ROOT


def write_toy_dataset(root: Path, populations: dict, dt: float = 0.0002) -> Path:
    """Dataset directory holding the given {id: (steps, sites) array} trajectories, all ok."""
    from core.sweep import STATUS_OK, TRAJECTORY_DIR, write_manifest
    from core.trajectory import Trajectory, write_trajectory
    import pandas as pd

    rows = []
    for point_id, P in populations.items():
        P = np.asarray(P, dtype=float)
        n_steps, n_sites = P.shape
        meta = {"sites": n_sites, "dt_ps": dt, "K": 0, "epsilon": [0.0] * n_sites,
                "J": np.zeros((n_sites, n_sites)).tolist(), "lambda": [35.0] * n_sites,
                "gamma": [53.0] * n_sites, "T": 300.0}
        rel = f"{TRAJECTORY_DIR}/{point_id}.csv"
        write_trajectory(Trajectory(times=np.arange(n_steps) * dt, populations=P, meta=meta), root / rel)
        rows.append({"id": point_id, "lambda": 35.0, "gamma": 53.0, "T": 300.0,
                     "status": STATUS_OK, "file": rel, "seed": 0, "error": ""})
    write_manifest(pd.DataFrame(rows), root)
    return root


@pytest.fixture
def toy_dataset(tmp_path):
    """Ten two-site trajectories of 300 steps with damped exchange between the sites."""
    t = np.arange(300) * 0.0002
    populations = {}
    for i in range(10):
        p1 = 0.5 + 0.5 * np.exp(-t / (0.02 + 0.005 * i)) * np.cos(2 * np.pi * t / 0.015)
        populations[f"p{i:06d}"] = np.column_stack([p1, 1.0 - p1])
    return write_toy_dataset(tmp_path / "dataset", populations)


@pytest.fixture
def dataset_writer():
    return write_toy_dataset
