"""
Seven-site (or any N-site) complex demonstration: propagate a user-supplied
Hamiltonian at reduced depth, forecast the reported sites from a short
training window and emit plot-ready data.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import config
from .arima import GridSpec, grid_search_arima, forecast_recursive
from .errors import CapacityError, InvalidSpecError, SeriesTooShortError
from .heom import propagate, site_density_matrix
from .hierarchy import estimate_bytes
from .system import BathSpec, SystemSpec, per_site
from .trajectory import Trajectory, write_trajectory

log = logging.getLogger(__name__)

DEFAULT_DEPTH = 6
CONVERGENCE_TOL = 5e-3


class FmoConfig(BaseModel):
    """Full site Hamiltonian (cm^-1) with its bath; sites are 1-based here."""
    model_config = ConfigDict(frozen=True)

    hamiltonian: Tuple[Tuple[float, ...], ...]
    bath: BathSpec
    initial_site: int = Field(1, ge=1)
    report_sites: Tuple[int, ...] = (1, 2, 3)

    @model_validator(mode="after")
    def _check(self) -> "FmoConfig":
        H = np.asarray(self.hamiltonian, dtype=float)
        n = H.shape[0]
        if H.ndim != 2 or H.shape != (n, n):
            raise ValueError("hamiltonian must be a square matrix")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-9):
            raise ValueError("hamiltonian must be symmetric")
        if self.bath.n_sites != n:
            raise ValueError(f"bath has {self.bath.n_sites} sites, hamiltonian has {n}")
        if not 1 <= self.initial_site <= n:
            raise ValueError(f"initial_site must be within 1..{n}")
        if not self.report_sites or any(not 1 <= s <= n for s in self.report_sites):
            raise ValueError(f"report_sites must be within 1..{n}")
        return self

    @property
    def n_sites(self) -> int:
        return len(self.hamiltonian)

    def system(self) -> SystemSpec:
        """Site energies measured from their mean; populations do not depend on the offset."""
        H = np.asarray(self.hamiltonian, dtype=float)
        energies = np.diag(H) - np.mean(np.diag(H))
        couplings = H - np.diag(np.diag(H))
        couplings = 0.5 * (couplings + couplings.T)
        return SystemSpec.from_matrix(energies, couplings)


def load_fmo_config(path: Union[str, Path]) -> FmoConfig:
    """
    JSON layout: hamiltonian (NxN, cm^-1), lambda, gamma (scalar or per site),
    temperature_K, initial_site, report_sites.
    """
    try:
        data = json.loads(Path(path).read_text())
        n = len(data["hamiltonian"])
        bath = BathSpec(lambdas=per_site(data["lambda"], n, "lambda"),
                        gammas=per_site(data.get("gamma", 53.0), n, "gamma"),
                        temperature=float(data.get("temperature_K", 300.0)))
        return FmoConfig(hamiltonian=data["hamiltonian"], bath=bath,
                         initial_site=int(data.get("initial_site", 1)),
                         report_sites=tuple(data.get("report_sites", (1, 2, 3))))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidSpecError(f"cannot read FMO config {path}: {exc}") from exc
    except ValidationError as exc:
        raise InvalidSpecError(f"invalid FMO config {path}: {exc.errors()[0]['msg']}") from exc


def largest_feasible_depth(n_sites: int, budget_bytes: Optional[int] = None) -> int:
    budget = budget_bytes if budget_bytes is not None else config.MEMORY_BUDGET_MB * 2**20
    depth = 0
    while estimate_bytes(n_sites, depth + 1) <= budget:
        depth += 1
    return depth


@dataclass
class FmoResult:
    trajectory: Trajectory
    forecasts: Dict[int, np.ndarray]          # 1-based site -> forecast
    plot_data: pd.DataFrame                   # t_ps, series, value
    convergence_error: Optional[float] = None
    converged: Optional[bool] = None
    outputs: Dict[str, Path] = field(default_factory=dict)


def _propagate(cfg: FmoConfig, depth: int, dt: float, t_total: float, budget_bytes: Optional[int]) -> Trajectory:
    rho0 = site_density_matrix(cfg.initial_site - 1, cfg.n_sites)
    try:
        return propagate(cfg.system(), cfg.bath, rho0, t_total=t_total, dt=dt, depth=depth,
                         budget_bytes=budget_bytes)
    except CapacityError as exc:
        suggestion = largest_feasible_depth(cfg.n_sites, budget_bytes)
        raise CapacityError(exc.count, exc.estimated_bytes, exc.budget_bytes,
                            hint=f"try --depth {suggestion} or raise HEOMCAST_MEMORY_BUDGET_MB") from exc


def fmo_demo(cfg: FmoConfig, L_in: int = 1001, horizon: Optional[int] = None,
             depth: int = DEFAULT_DEPTH, dt: Optional[float] = None, t_total: Optional[float] = None,
             check_convergence: bool = True, grid: Optional[GridSpec] = None,
             out_dir: Optional[Union[str, Path]] = None,
             budget_bytes: Optional[int] = None) -> FmoResult:
    """
    Propagate, then fit a SARIMA model per reported site on the first L_in points
    and forecast `horizon` steps (the rest of the trajectory by default).

    With check_convergence, the trajectory is recomputed at depth - 2 and the
    largest population difference is reported against a 5e-3 threshold.
    """
    dt = config.DT_PS if dt is None else dt
    t_total = config.T_TOTAL_PS if t_total is None else t_total
    trajectory = _propagate(cfg, depth, dt, t_total, budget_bytes)
    n_points = len(trajectory)
    horizon = n_points - L_in if horizon is None else horizon
    if L_in < 2 or horizon < 1 or L_in + horizon > n_points:
        raise SeriesTooShortError(L_in + max(horizon, 1), n_points, "trajectory")

    convergence_error = converged = None
    if check_convergence and depth >= 2:
        coarse = _propagate(cfg, depth - 2, dt, t_total, budget_bytes)
        convergence_error = float(np.max(np.abs(coarse.populations - trajectory.populations)))
        converged = convergence_error < CONVERGENCE_TOL
        if converged:
            log.info("Depth %d agrees with depth %d to %.2e (< %.0e)", depth, depth - 2,
                     convergence_error, CONVERGENCE_TOL)
        else:
            log.warning("Depth %d differs from depth %d by %.2e; increase the depth",
                        depth, depth - 2, convergence_error)

    times = trajectory.times
    forecasts: Dict[int, np.ndarray] = {}
    frames = []
    for site in cfg.report_sites:
        series = trajectory.series(site - 1)
        history = series[:L_in]
        model = grid_search_arima(history, grid=grid)
        log.info("Site %d: %s", site, model.describe())
        forecasts[site] = forecast_recursive(model, history, horizon)
        frames += [
            pd.DataFrame({"t_ps": times, "series": f"truth_P{site}", "value": series}),
            pd.DataFrame({"t_ps": times[:L_in], "series": f"train_P{site}", "value": history}),
            pd.DataFrame({"t_ps": times[L_in:L_in + horizon], "series": f"forecast_P{site}",
                          "value": forecasts[site]}),
        ]
    plot_data = pd.concat(frames, ignore_index=True)
    result = FmoResult(trajectory, forecasts, plot_data, convergence_error, converged)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.outputs["trajectory"] = write_trajectory(trajectory, out / "fmo_trajectory.csv")
        wide = pd.DataFrame({"t_ps": times[L_in:L_in + horizon]})
        for site, values in forecasts.items():
            wide[f"forecast_P{site}"] = values
        result.outputs["forecast"] = out / "fmo_forecast.csv"
        wide.to_csv(result.outputs["forecast"], index=False, float_format="%.10e")
        result.outputs["plot"] = out / "fmo_plot.csv"
        plot_data.to_csv(result.outputs["plot"], index=False, float_format="%.10e")
    return result
