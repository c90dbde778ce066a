"""
/api/v1/forecast: fit and forecast a single series
"""

from __future__ import annotations
import time
from fastapi import APIRouter

from ..models import ForecastRequest, ForecastResponse

router = APIRouter(tags=["Forecast"])


@router.post("/forecast", response_model=ForecastResponse, summary="Forecast a population series")
def forecast(req: ForecastRequest):
    """
    Grid-search a SARIMA order on `series` and forecast `horizon` steps,
    or repeat the last value with `model="naive"`. Outputs are clamped to [0, 1].
    """
    from core.arima import forecast_recursive, grid_search_arima, naive_forecast

    t0 = time.perf_counter()
    if req.model == "naive":
        values = naive_forecast(req.series, req.horizon)
        return ForecastResponse(forecast=values.tolist(), fallback=False,
                                duration_ms=round((time.perf_counter() - t0) * 1000, 1))

    model = grid_search_arima(req.series, req.p_max, req.d_max, req.q_max, req.criterion)
    values = forecast_recursive(model, req.series, req.horizon)
    return ForecastResponse(
        forecast=values.tolist(),
        order=None if model.fallback else model.order.label(),
        aic=None if model.fallback else model.aic,
        fallback=model.fallback,
        duration_ms=round((time.perf_counter() - t0) * 1000, 1),
    )
