import numpy as np
import pytest

from core.trajectory import (Trajectory, format_header, parse_header, read_trajectory, sidecar_path,
                             write_trajectory)

META = {"sites": 2, "dt_ps": 0.0002, "K": 20, "epsilon": [100.0, 0.0], "J": [[0.0, 100.0], [100.0, 0.0]],
        "lambda": [35.0, 35.0], "gamma": [53.0, 53.0], "T": 300.0}


def _trajectory(store_full=False):
    times = np.arange(5) * 0.0002
    p1 = np.linspace(1.0, 0.6, 5)
    P = np.column_stack([p1, 1.0 - p1])
    rho = None
    if store_full:
        rho = np.zeros((5, 2, 2), dtype=complex)
        rho[:, 0, 0], rho[:, 1, 1] = P[:, 0], P[:, 1]
        rho[:, 0, 1] = 0.1 + 0.2j
        rho[:, 1, 0] = 0.1 - 0.2j
    return Trajectory(times=times, populations=P, density_matrices=rho, meta=dict(META))


def test_header_format():
    assert format_header(META) == ("# sites=2 dt_ps=0.0002 K=20 epsilon=100,0 J=0,100;100,0 "
                                   "lambda=35,35 gamma=53,53 T=300")


def test_header_parse_recovers_values():
    meta = parse_header(format_header(META))
    assert meta == META


def test_file_layout(tmp_path):
    path = write_trajectory(_trajectory(), tmp_path / "traj" / "p000001.csv")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# sites=2")
    assert lines[1] == "t_ps,P1,P2"
    assert len(lines) == 7
    assert not (tmp_path / "traj" / "p000001.csv.part").exists()
    assert not sidecar_path(path).exists()


def test_read_back_populations(tmp_path):
    original = _trajectory()
    loaded = read_trajectory(write_trajectory(original, tmp_path / "t.csv"))
    np.testing.assert_allclose(loaded.populations, original.populations, rtol=1e-14)
    np.testing.assert_allclose(loaded.times, original.times, rtol=1e-14)
    assert loaded.meta["K"] == 20
    assert loaded.density_matrices is None


def test_density_sidecar(tmp_path):
    original = _trajectory(store_full=True)
    path = write_trajectory(original, tmp_path / "t.csv")
    assert sidecar_path(path).name == "t.rho.bin"
    assert sidecar_path(path).stat().st_size == 5 * 2 * 2 * 16
    loaded = read_trajectory(path, load_full=True)
    np.testing.assert_array_equal(loaded.density_matrices, original.density_matrices)


def test_audit_flags_bad_populations():
    traj = _trajectory()
    assert traj.audit().ok
    traj.populations[2, 0] += 0.01
    audit = traj.audit()
    assert not audit.ok
    assert audit.max_sum_deviation == pytest.approx(0.01)


def test_audit_of_non_finite_populations():
    traj = _trajectory()
    traj.populations[1, 1] = np.nan
    assert not traj.audit().ok
