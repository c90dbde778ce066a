"""
HeomCast HTTP service.

    uvicorn api.app:app --port 8060

Interactive docs are served at /docs and /redoc.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, RedirectResponse

sys.path.insert(0, str(Path(__file__).parent.parent))

import config
from core.errors import CapacityError, DivergenceError, HeomCastError, InvalidSpecError, SeriesTooShortError

from .models import HealthResponse
from .routes.forecast import router as forecast_router
from .routes.jobs import router as jobs_router
from .routes.library import presets_router
from .routes.simulate import router as simulate_router

log = logging.getLogger(__name__)

PREFIX = "/api/v1"
VERSION = "1.0.0"

# Most specific first; anything else derived from HeomCastError maps to 500.
ERROR_STATUS = (
    (CapacityError, 413),
    (SeriesTooShortError, 422),
    (InvalidSpecError, 422),
    (DivergenceError, 422),
)

DESCRIPTION = """\
HEOM exciton dynamics and SARIMA population forecasts over HTTP.

* `GET  /api/v1/presets`: stored physical systems
* `POST /api/v1/simulate`: propagate one system
* `POST /api/v1/forecast`: forecast one population series
* `POST /api/v1/jobs`: dataset sweeps and benchmarks in the background
"""


def _status_for(exc: HeomCastError) -> int:
    return next((code for cls, code in ERROR_STATUS if isinstance(exc, cls)), 500)


def create_app() -> FastAPI:
    api = FastAPI(title="HeomCast API", description=DESCRIPTION, version=VERSION,
                  license_info={"name": "MIT"})
    # local tool: any origin
    api.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    for router in (simulate_router, forecast_router, jobs_router, presets_router):
        api.include_router(router, prefix=PREFIX)

    @api.get("/", include_in_schema=False)
    def index():
        return RedirectResponse("/docs")

    @api.get(f"{PREFIX}/health", response_model=HealthResponse, tags=["Info"], summary="Service status")
    def health():
        return HealthResponse(status="ok", memory_budget_mb=config.MEMORY_BUDGET_MB, workers=config.WORKERS)

    @api.exception_handler(HeomCastError)
    async def domain_error(request: Request, exc: HeomCastError):
        status = _status_for(exc)
        log.warning("%s on %s %s: %s", type(exc).__name__, request.method, request.url.path, exc)
        return JSONResponse(status_code=status, content={"detail": str(exc), "error": type(exc).__name__})

    @api.exception_handler(Exception)
    async def unexpected_error(request: Request, exc: Exception):
        log.exception("Unhandled error on %s %s", request.method, request.url.path)
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    return api


app = create_app()
