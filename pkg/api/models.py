"""
Pydantic models for HeomCast API request/response schemas.
"""

from __future__ import annotations
from typing import Optional, List, Dict, Any, Union, Literal
from enum import Enum
from datetime import datetime
from pydantic import BaseModel, ConfigDict, Field


# ── Enums ─────────────────────────────────────────────────────────────────────

class JobKind(str, Enum):
    GENERATE  = "generate"
    BENCHMARK = "benchmark"


class JobStatus(str, Enum):
    PENDING   = "pending"
    RUNNING   = "running"
    COMPLETED = "completed"
    FAILED    = "failed"
    CANCELLED = "cancelled"


# ── System models ─────────────────────────────────────────────────────────────

class SystemModel(BaseModel):
    """Same key layout as the JSON system config files."""
    model_config = ConfigDict(populate_by_name=True, json_schema_extra={
        "example": {"sites": 2, "epsilon": [100, 0], "J": [100], "lambda": 35,
                    "gamma": 53, "temperature_K": 300, "rho0_site": 1}
    })

    sites:          int                              = Field(..., ge=1)
    epsilon:        Union[float, List[float]]        = Field(..., description="Site energies, cm^-1")
    J:              Union[float, List[float], List[List[float]]] = Field(
        0.0, description="Chain couplings (N-1 values) or a full NxN matrix, cm^-1")
    lambda_:        Union[float, List[float]]        = Field(..., alias="lambda", description="Reorganization energy, cm^-1")
    gamma:          Union[float, List[float]]        = Field(53.0, description="Bath cut-off, cm^-1")
    temperature_K:  float                            = Field(300.0, gt=0)
    rho0_site:      int                              = Field(1, ge=1, description="Initially excited site (1-based)")

    def as_mapping(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True)


class SimulateRequest(BaseModel):
    system:         Optional[SystemModel]            = Field(None, description="Inline system (or give a preset)")
    preset:         Optional[str]                    = Field(None, description="Name of a stored preset")
    t_total:        float                            = Field(1.0, gt=0, le=10.0, description="ps")
    dt:             float                            = Field(0.0002, gt=0, description="ps")
    depth:          int                              = Field(20, ge=0)
    every:          int                              = Field(1, ge=1, description="Return every n-th time point")

    model_config = ConfigDict(json_schema_extra={
        "example": {"preset": "dimer", "t_total": 1.0, "dt": 0.0002, "depth": 20, "every": 10}
    })


class SimulateResponse(BaseModel):
    times:          List[float]
    populations:    List[List[float]]                = Field(..., description="One row per time, one column per site")
    meta:           Dict[str, Any]
    duration_ms:    float


class HierarchySizeResponse(BaseModel):
    sites:          int
    depth:          int
    count:          int
    estimated_mib:  float
    fits_budget:    bool


# ── Forecast models ───────────────────────────────────────────────────────────

class ForecastRequest(BaseModel):
    series:         List[float]                      = Field(..., min_length=1)
    horizon:        int                              = Field(..., ge=1)
    model:          Literal["sarima", "naive"]       = "sarima"
    p_max:          int                              = Field(5, ge=0)
    d_max:          int                              = Field(2, ge=0)
    q_max:          int                              = Field(3, ge=0)
    criterion:      Literal["aic", "validation"]     = "aic"

    model_config = ConfigDict(json_schema_extra={
        "example": {"series": [1.0, 0.98, 0.93, 0.86, 0.78], "horizon": 3, "model": "naive"}
    })


class ForecastResponse(BaseModel):
    forecast:       List[float]
    order:          Optional[str]                    = None
    aic:            Optional[float]                  = None
    fallback:       bool                             = False
    duration_ms:    float


# ── Job models ────────────────────────────────────────────────────────────────

class GenerateParams(BaseModel):
    out_dir:        str
    n_sites:        int                              = Field(2, ge=2)
    n_samples:      int                              = Field(40000, ge=1)
    sampling_mode:  Literal["grid", "random"]        = "random"
    seed:           int                              = 0
    dt:             float                            = Field(0.0002, gt=0)
    t_total:        float                            = Field(1.0, gt=0)
    depth:          int                              = Field(20, ge=0)


class BenchmarkParams(BaseModel):
    dataset_dir:    str
    out_dir:        Optional[str]                    = None
    model:          Literal["sarima", "naive"]       = "sarima"
    lin_ps:         float                            = Field(0.2, gt=0)
    horizon:        int                              = Field(100, ge=1)
    max_samples:    int                              = Field(100, ge=1)
    seed:           int                              = 0


class JobRequest(BaseModel):
    """Create an asynchronous dataset generation or benchmark job."""
    kind:           JobKind
    generate:       Optional[GenerateParams]         = None
    benchmark:      Optional[BenchmarkParams]        = None
    webhook_url:    Optional[str]                    = Field(None, description="POST callback URL on job completion")

    model_config = ConfigDict(json_schema_extra={
        "example": {"kind": "generate",
                    "generate": {"out_dir": "/data/dimer", "n_samples": 200, "seed": 7}}
    })


class JobProgress(BaseModel):
    current:        int
    total:          int
    percent:        float


class JobSummary(BaseModel):
    job_id:         str
    kind:           JobKind
    status:         JobStatus
    created_at:     datetime
    started_at:     Optional[datetime]   = None
    completed_at:   Optional[datetime]   = None
    progress:       JobProgress
    last_message:   Optional[str]        = None
    error:          Optional[str]        = None


class JobDetail(JobSummary):
    request:        JobRequest
    result:         Dict[str, Any]       = {}
    log:            List[str]            = []


# ── Preset models ─────────────────────────────────────────────────────────────

class PresetEntry(BaseModel):
    name:           str
    builtin:        bool                 = False
    system:         Dict[str, Any]


class PresetCreateRequest(BaseModel):
    name:           str = Field(..., min_length=1)
    system:         SystemModel


class PresetsResponse(BaseModel):
    presets:        List[PresetEntry]


# ── Health model ──────────────────────────────────────────────────────────────

class HealthResponse(BaseModel):
    status:         str
    version:        str                  = "1.0"
    memory_budget_mb: int
    workers:        int
