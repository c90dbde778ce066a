"""
/api/v1/simulate: propagate one system and return its site populations
/api/v1/hierarchy: hierarchy size and memory estimate
"""

from __future__ import annotations
import time
from fastapi import APIRouter, HTTPException

import config
from ..models import SimulateRequest, SimulateResponse, HierarchySizeResponse

router = APIRouter(tags=["Simulation"])


@router.post("/simulate", response_model=SimulateResponse, summary="Propagate a system")
def simulate(req: SimulateRequest):
    """
    Run the HEOM propagation synchronously. Give either an inline `system`
    or the name of a stored `preset`. Large runs belong in a generate job.
    """
    from core.heom import propagate, site_density_matrix
    from core.presets import PresetManager
    from core.system import system_from_mapping

    if (req.system is None) == (req.preset is None):
        raise HTTPException(422, "Give exactly one of 'system' or 'preset'")
    if req.preset is not None:
        try:
            cfg = PresetManager().get_config(req.preset)
        except KeyError:
            raise HTTPException(404, f"Preset not found: {req.preset}")
    else:
        cfg = system_from_mapping(req.system.as_mapping())

    t0 = time.perf_counter()
    trajectory = propagate(cfg.system, cfg.bath, site_density_matrix(cfg.rho0_site, cfg.system.n_sites),
                           t_total=req.t_total, dt=req.dt, depth=req.depth)
    rows = slice(None, None, req.every)
    return SimulateResponse(
        times=trajectory.times[rows].tolist(),
        populations=trajectory.populations[rows].tolist(),
        meta=trajectory.meta,
        duration_ms=round((time.perf_counter() - t0) * 1000, 1),
    )


@router.get("/hierarchy", response_model=HierarchySizeResponse, summary="Hierarchy size for N sites at depth K")
def hierarchy(sites: int, depth: int = 20):
    from core.hierarchy import estimate_bytes, hierarchy_size

    if sites < 1 or depth < 0:
        raise HTTPException(422, "sites must be >= 1 and depth >= 0")
    needed = estimate_bytes(sites, depth)
    return HierarchySizeResponse(
        sites=sites, depth=depth, count=hierarchy_size(sites, depth),
        estimated_mib=round(needed / 2**20, 3),
        fits_budget=needed <= config.MEMORY_BUDGET_MB * 2**20,
    )
