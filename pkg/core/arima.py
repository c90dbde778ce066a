"""
Seasonal ARIMA written from scratch on numpy/scipy.

Fitting follows a two-stage regression: a long autoregression supplies
innovation estimates, then the series is regressed on its own lags plus the
lagged innovations by least squares. Seasonal terms are expanded into the
multiplicative lag set {k + m*i}, so a SARIMA model is an ARMA model on a
sparse lag set. Forecasting runs the recursion with future innovations set to
zero, then undoes the differencing.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from .errors import InvalidSpecError, SeriesTooShortError

log = logging.getLogger(__name__)

STATIONARITY_TOL = 1e-6
SOLVE_RCOND = 1e-10
LONG_AR_MAX = 20
MIN_FIT_MARGIN = 10
DEFAULT_HOLDOUT = 100

Criterion = Literal["aic", "validation"]


# ── Orders ────────────────────────────────────────────────────────────────────

class ArimaOrder(BaseModel):
    """(p, d, q) with optional seasonal (P, D, Q) at period m."""
    model_config = ConfigDict(frozen=True)

    p: int = Field(0, ge=0)
    d: int = Field(0, ge=0)
    q: int = Field(0, ge=0)
    P: int = Field(0, ge=0)
    D: int = Field(0, ge=0)
    Q: int = Field(0, ge=0)
    m: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_season(self) -> "ArimaOrder":
        if self.m == 0 and (self.P or self.D or self.Q):
            raise ValueError("seasonal orders need a period m >= 2")
        if self.m == 1:
            raise ValueError("seasonal period must be 0 (none) or >= 2")
        return self

    @property
    def seasonal(self) -> bool:
        return self.m >= 2

    @property
    def ar_lags(self) -> Tuple[int, ...]:
        return _expand_lags(self.p, self.P, self.m)

    @property
    def ma_lags(self) -> Tuple[int, ...]:
        return _expand_lags(self.q, self.Q, self.m)

    @property
    def differencing_loss(self) -> int:
        return self.d + self.D * self.m

    @property
    def n_params(self) -> int:
        return len(self.ar_lags) + len(self.ma_lags) + 1

    def min_length(self) -> int:
        lags = self.ar_lags + self.ma_lags
        return self.differencing_loss + (max(lags) if lags else 0) + MIN_FIT_MARGIN

    def label(self) -> str:
        text = f"({self.p},{self.d},{self.q})"
        if self.seasonal:
            text += f"({self.P},{self.D},{self.Q})_{self.m}"
        return text

    def as_tuple(self) -> Tuple[int, ...]:
        return (self.p, self.d, self.q, self.P, self.D, self.Q, self.m)


def _expand_lags(k: int, K: int, m: int) -> Tuple[int, ...]:
    if m < 2:
        return tuple(range(1, k + 1))
    return tuple(sorted({a + m * b for a in range(k + 1) for b in range(K + 1)} - {0}))


# ── Model ─────────────────────────────────────────────────────────────────────

@dataclass
class ArimaModel:
    order: ArimaOrder
    ar_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ma_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intercept: float = 0.0
    residual_variance: float = 0.0
    n_obs: int = 0
    aic: float = math.nan
    training_tail: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual_tail: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stationary: bool = True
    invertible: bool = True
    fallback: bool = False

    def __post_init__(self):
        self.ar_coeffs = np.asarray(self.ar_coeffs, dtype=float)
        self.ma_coeffs = np.asarray(self.ma_coeffs, dtype=float)
        self.training_tail = np.asarray(self.training_tail, dtype=float)
        self.residual_tail = np.asarray(self.residual_tail, dtype=float)
        if len(self.ar_coeffs) != len(self.order.ar_lags) or len(self.ma_coeffs) != len(self.order.ma_lags):
            raise InvalidSpecError(
                f"coefficient counts ({len(self.ar_coeffs)}, {len(self.ma_coeffs)}) do not match "
                f"order {self.order.label()}")

    @property
    def ar_lags(self) -> Tuple[int, ...]:
        return self.order.ar_lags

    @property
    def ma_lags(self) -> Tuple[int, ...]:
        return self.order.ma_lags

    def describe(self) -> str:
        if self.fallback:
            return "naive (all candidates rejected)"
        return f"ARIMA{self.order.label()} aic={self.aic:.3f} sigma2={self.residual_variance:.3e}"


# ── Differencing ──────────────────────────────────────────────────────────────

def difference(series: Sequence[float], d: int) -> np.ndarray:
    """Apply (1 - B)^d."""
    values = np.asarray(series, dtype=float)
    if d < 0:
        raise InvalidSpecError(f"differencing order must be >= 0, got {d}")
    if len(values) <= d:
        raise SeriesTooShortError(d + 1, len(values))
    return np.diff(values, n=d) if d else values.copy()


def undifference(diffed_forecast: Sequence[float], history: Sequence[float], d: int) -> np.ndarray:
    """Invert `difference` for values continuing `history`, using its last d levels."""
    forecast = np.asarray(diffed_forecast, dtype=float).copy()
    history = np.asarray(history, dtype=float)
    if d == 0:
        return forecast
    if len(history) < d:
        raise SeriesTooShortError(d, len(history), "history")
    for level in range(d - 1, -1, -1):
        anchor = np.diff(history, n=level)[-1] if level else history[-1]
        forecast = anchor + np.cumsum(forecast)
    return forecast


def seasonal_difference(series: Sequence[float], D: int, m: int) -> np.ndarray:
    """Apply (1 - B^m)^D."""
    values = np.asarray(series, dtype=float)
    if D == 0:
        return values.copy()
    if m < 2:
        raise InvalidSpecError(f"seasonal period must be >= 2, got {m}")
    if len(values) <= D * m:
        raise SeriesTooShortError(D * m + 1, len(values))
    for _ in range(D):
        values = values[m:] - values[:-m]
    return values


def seasonal_undifference(diffed_forecast: Sequence[float], history: Sequence[float],
                          D: int, m: int) -> np.ndarray:
    forecast = np.asarray(diffed_forecast, dtype=float).copy()
    if D == 0:
        return forecast
    history = np.asarray(history, dtype=float)
    if len(history) < D * m:
        raise SeriesTooShortError(D * m, len(history), "history")
    for level in range(D - 1, -1, -1):
        base = seasonal_difference(history, level, m)[-m:]
        extended = np.concatenate([base, np.empty(len(forecast))])
        for t in range(len(forecast)):
            extended[m + t] = forecast[t] + extended[t]
        forecast = extended[m:]
    return forecast


def _stationary_part(series: np.ndarray, order: ArimaOrder) -> np.ndarray:
    return difference(seasonal_difference(series, order.D, order.m), order.d)


# ── Least-squares fits ────────────────────────────────────────────────────────

class ArFit(NamedTuple):
    coeffs: np.ndarray
    intercept: float
    residuals: np.ndarray


class ArmaFit(NamedTuple):
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    intercept: float
    residual_variance: float
    residuals: np.ndarray


def _lag_matrix(values: np.ndarray, lags: Sequence[int], start: int) -> np.ndarray:
    n = len(values)
    return np.column_stack([values[start - lag:n - lag] for lag in lags]) if lags else np.empty((n - start, 0))


def _solve(X: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray]:
    """
    Least squares of target on [X, 1].

    Columns are centred and scaled to unit norm first. Constant columns get a
    zero coefficient, and singular directions below SOLVE_RCOND of the largest
    are cut, so the near-collinear lags of a smooth series still give the
    minimum-norm fit.
    """
    coeffs = np.zeros(X.shape[1])
    y_mean = float(np.mean(target))
    x_mean = X.mean(axis=0)
    centred = X - x_mean
    scale = np.linalg.norm(centred, axis=0)
    live = scale > 1e-12 * np.linalg.norm(X, axis=0)
    if np.any(live):
        beta, *_ = linalg.lstsq(centred[:, live] / scale[live], target - y_mean, cond=SOLVE_RCOND)
        coeffs[live] = beta / scale[live]
    intercept = y_mean - float(x_mean @ coeffs)
    return coeffs, intercept, target - X @ coeffs - intercept


def _fit_lags(values: np.ndarray, lags: Sequence[int]) -> ArFit:
    start = max(lags) if lags else 0
    coeffs, intercept, residuals = _solve(_lag_matrix(values, lags, start), values[start:])
    return ArFit(coeffs, intercept, residuals)


def fit_ar_ls(series: Sequence[float], p: int) -> ArFit:
    """AR(p) with intercept by ordinary least squares."""
    values = np.asarray(series, dtype=float)
    if p < 0:
        raise InvalidSpecError(f"AR order must be >= 0, got {p}")
    if len(values) < 3 * p + 10:
        raise SeriesTooShortError(3 * p + 10, len(values))
    return _fit_lags(values, tuple(range(1, p + 1)))


def long_ar_innovations(values: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """
    Innovation estimates from a long autoregression, aligned with `values`;
    the first `order` entries are NaN.
    """
    k = order if order is not None else min(LONG_AR_MAX, len(values) // 4)
    k = max(k, 1)
    innovations = np.full(len(values), np.nan)
    innovations[k:] = _fit_lags(values, tuple(range(1, k + 1))).residuals
    return innovations


def fit_arma_hr(series: Sequence[float], p: int = 0, q: int = 0, *,
                ar_lags: Optional[Sequence[int]] = None, ma_lags: Optional[Sequence[int]] = None,
                innovations: Optional[np.ndarray] = None,
                long_ar_order: Optional[int] = None) -> ArmaFit:
    """
    ARMA fit by two-stage regression.

    Lags default to 1..p and 1..q; sparse seasonal lag sets may be passed instead.
    With no MA lags this is exactly `fit_ar_ls`.
    """
    values = np.asarray(series, dtype=float)
    ar_lags = tuple(ar_lags) if ar_lags is not None else tuple(range(1, p + 1))
    ma_lags = tuple(ma_lags) if ma_lags is not None else tuple(range(1, q + 1))
    needed = 3 * (len(ar_lags) + len(ma_lags)) + 20 if ma_lags else 3 * len(ar_lags) + 10
    needed = max(needed, max(ar_lags + ma_lags, default=0) + MIN_FIT_MARGIN)
    if len(values) < needed:
        raise SeriesTooShortError(needed, len(values))

    if not ma_lags:
        fit = _fit_lags(values, ar_lags)
        return ArmaFit(fit.coeffs, np.zeros(0), fit.intercept, float(np.mean(fit.residuals ** 2)), fit.residuals)

    if innovations is None:
        innovations = long_ar_innovations(values, long_ar_order)
    first_valid = int(np.argmax(np.isfinite(innovations)))
    start = max(max(ar_lags, default=0), first_valid + max(ma_lags))
    if len(values) - start < len(ar_lags) + len(ma_lags) + 1:
        raise SeriesTooShortError(start + len(ar_lags) + len(ma_lags) + 1, len(values))

    X = np.column_stack([_lag_matrix(values, ar_lags, start), _lag_matrix(innovations, ma_lags, start)])
    beta, intercept, residuals = _solve(X, values[start:])
    return ArmaFit(beta[:len(ar_lags)], beta[len(ar_lags):], intercept,
                   float(np.mean(residuals ** 2)), residuals)


# ── Stationarity and invertibility ────────────────────────────────────────────

def _lag_polynomial_roots(coeffs: Sequence[float], lags: Optional[Sequence[int]], sign: float) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    lags = tuple(lags) if lags is not None else tuple(range(1, len(coeffs) + 1))
    if not lags:
        return np.zeros(0, dtype=complex)
    poly = np.zeros(max(lags) + 1)
    poly[0] = 1.0
    for lag, c in zip(lags, coeffs):
        poly[lag] += sign * c
    return np.roots(poly[::-1])


def ar_roots(ar_coeffs: Sequence[float], ar_lags: Optional[Sequence[int]] = None) -> np.ndarray:
    """Roots of 1 - sum phi_l z^l."""
    return _lag_polynomial_roots(ar_coeffs, ar_lags, -1.0)


def ma_roots(ma_coeffs: Sequence[float], ma_lags: Optional[Sequence[int]] = None) -> np.ndarray:
    """Roots of 1 + sum theta_l z^l."""
    return _lag_polynomial_roots(ma_coeffs, ma_lags, 1.0)


def _outside_unit_circle(roots: np.ndarray, tol: float) -> bool:
    return bool(len(roots) == 0 or np.min(np.abs(roots)) >= 1.0 - tol)


def is_stationary(ar_coeffs: Sequence[float], ar_lags: Optional[Sequence[int]] = None,
                  tol: float = STATIONARITY_TOL) -> bool:
    """True when every AR root has modulus >= 1 - tol."""
    return _outside_unit_circle(ar_roots(ar_coeffs, ar_lags), tol)


def is_invertible(ma_coeffs: Sequence[float], ma_lags: Optional[Sequence[int]] = None,
                  tol: float = STATIONARITY_TOL) -> bool:
    """True when every MA root has modulus >= 1 - tol."""
    return _outside_unit_circle(ma_roots(ma_coeffs, ma_lags), tol)


# ── Fitting and selection ─────────────────────────────────────────────────────

def _aic(residual_variance: float, n: int, n_params: int, floor: float) -> float:
    return n * math.log(max(residual_variance, floor)) + 2 * n_params


def _variance_floor(values: np.ndarray) -> float:
    return max(float(np.var(values)) * 1e-20, np.finfo(float).tiny)


def fit_arima(series: Sequence[float], order: ArimaOrder, *,
              innovations: Optional[np.ndarray] = None) -> ArimaModel:
    """Fit one SARIMA order to `series`."""
    values = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidSpecError("series contains non-finite values")
    if len(values) < order.min_length():
        raise SeriesTooShortError(order.min_length(), len(values))

    w = _stationary_part(values, order)
    fit = fit_arma_hr(w, ar_lags=order.ar_lags, ma_lags=order.ma_lags, innovations=innovations)
    n_eff = len(fit.residuals)
    tail_len = min(len(values), max(order.ar_lags, default=0) + order.differencing_loss + 1)
    n_ma = max(order.ma_lags, default=0)
    return ArimaModel(
        order=order,
        ar_coeffs=fit.ar_coeffs,
        ma_coeffs=fit.ma_coeffs,
        intercept=fit.intercept,
        residual_variance=fit.residual_variance,
        n_obs=n_eff,
        aic=_aic(fit.residual_variance, len(w), order.n_params, _variance_floor(values)),
        training_tail=values[-tail_len:],
        residual_tail=fit.residuals[-n_ma:] if n_ma else np.zeros(0),
        stationary=is_stationary(fit.ar_coeffs, order.ar_lags),
        invertible=is_invertible(fit.ma_coeffs, order.ma_lags),
    )


class GridSpec(BaseModel):
    """Candidate box for the order search."""
    model_config = ConfigDict(frozen=True)

    p_max: int = Field(5, ge=0)
    d_max: int = Field(2, ge=0)
    q_max: int = Field(3, ge=0)
    P_max: int = Field(0, ge=0)
    D_max: int = Field(0, ge=0)
    Q_max: int = Field(0, ge=0)
    m: int = Field(0, ge=0)
    criterion: Criterion = "aic"
    holdout: int = Field(DEFAULT_HOLDOUT, ge=1)

    def orders(self) -> List[ArimaOrder]:
        """Candidates in lexicographic (p, d, q, P, D, Q) order."""
        seasonal = (range(self.P_max + 1), range(self.D_max + 1), range(self.Q_max + 1)) if self.m >= 2 \
            else ((0,), (0,), (0,))
        return [ArimaOrder(p=p, d=d, q=q, P=P, D=D, Q=Q, m=self.m if self.m >= 2 else 0)
                for p, d, q, P, D, Q in itertools.product(
                    range(self.p_max + 1), range(self.d_max + 1), range(self.q_max + 1), *seasonal)]


def _naive_model(values: np.ndarray) -> ArimaModel:
    return ArimaModel(order=ArimaOrder(), intercept=float(values[-1]) if len(values) else 0.0,
                      training_tail=values[-1:], fallback=True)


def _score_candidates(values: np.ndarray, grid: GridSpec) -> Tuple[Optional[ArimaModel], int]:
    best: Optional[ArimaModel] = None
    rejected = 0
    innovation_cache: Dict[Tuple[int, int], np.ndarray] = {}
    for order in grid.orders():
        try:
            innovations = None
            if order.ma_lags:
                key = (order.d, order.D)
                if key not in innovation_cache:
                    innovation_cache[key] = long_ar_innovations(_stationary_part(values, order))
                innovations = innovation_cache[key]
            model = fit_arima(values, order, innovations=innovations)
        except SeriesTooShortError:
            log.debug("Skipping %s: series too short", order.label())
            continue
        if not (model.stationary and model.invertible) or not math.isfinite(model.aic):
            rejected += 1
            continue
        if best is None or model.aic < best.aic:
            best = model
    return best, rejected


def grid_search_arima(series: Sequence[float], p_max: int = 5, d_max: int = 2, q_max: int = 3,
                      criterion: Criterion = "aic", *, grid: Optional[GridSpec] = None) -> ArimaModel:
    """
    Exhaustive order search.

    criterion="aic" keeps the stationary, invertible candidate with the lowest AIC;
    criterion="validation" holds out the last `holdout` points, picks the order
    with the lowest forecast MSE on them and refits it on the full series.
    Ties go to the lexicographically smallest order. When no candidate survives
    the result is a naive (last value) fallback model. A GridSpec, when given,
    replaces the individual bounds.
    """
    grid = grid or GridSpec(p_max=p_max, d_max=d_max, q_max=q_max, criterion=criterion)
    values = np.asarray(series, dtype=float)
    if len(values) == 0:
        raise SeriesTooShortError(1, 0)

    if grid.criterion == "validation":
        model = _select_by_validation(values, grid)
    else:
        model, rejected = _score_candidates(values, grid)
        if rejected:
            log.debug("%d non-stationary or non-invertible candidates rejected", rejected)
    if model is None:
        log.warning("No admissible ARIMA order for a series of %d points, falling back to naive", len(values))
        return _naive_model(values)
    log.debug("Selected %s", model.describe())
    return model


def _select_by_validation(values: np.ndarray, grid: GridSpec) -> Optional[ArimaModel]:
    if len(values) <= grid.holdout:
        raise SeriesTooShortError(grid.holdout + 1, len(values))
    train, held = values[:-grid.holdout], values[-grid.holdout:]
    best_order, best_score = None, math.inf
    for order in grid.orders():
        try:
            model = fit_arima(train, order)
        except SeriesTooShortError:
            continue
        if not (model.stationary and model.invertible):
            continue
        score = float(np.mean((forecast_recursive(model, train, grid.holdout) - held) ** 2))
        if math.isfinite(score) and score < best_score:
            best_order, best_score = order, score
    if best_order is None:
        return None
    return fit_arima(values, best_order)


# ── Forecasting ───────────────────────────────────────────────────────────────

def naive_forecast(history: Sequence[float], h: int) -> np.ndarray:
    """Repeat the last observed value h times."""
    values = np.asarray(history, dtype=float)
    if len(values) == 0:
        raise SeriesTooShortError(1, 0, "history")
    return np.full(max(h, 0), values[-1])


def forecast_recursive(model: ArimaModel, history: Optional[Sequence[float]], h: int,
                       clip: bool = True) -> np.ndarray:
    """
    h-step forecast continuing `history` (the training tail when omitted).

    Future innovations are zero; past ones come from the fit. Values are
    clamped to [0, 1] unless clip is False.
    """
    if h <= 0:
        raise InvalidSpecError(f"forecast horizon must be >= 1, got {h}")
    values = np.asarray(model.training_tail if history is None else history, dtype=float)
    if model.fallback:
        out = naive_forecast(values, h)
        return np.clip(out, 0.0, 1.0) if clip else out

    order = model.order
    n_ar = max(order.ar_lags, default=0)
    loss = order.differencing_loss
    needed = loss + max(n_ar, 1) if loss else n_ar
    if len(values) < needed:
        raise SeriesTooShortError(needed, len(values), "history")

    seasonal_level = seasonal_difference(values, order.D, order.m) if order.D else values
    w = difference(seasonal_level, order.d) if order.d else seasonal_level

    n_ma = max(order.ma_lags, default=0)
    w_buf = np.concatenate([w[len(w) - n_ar:] if n_ar else np.zeros(0), np.empty(h)])
    e_buf = np.zeros(n_ma + h)
    if n_ma:
        tail = model.residual_tail[-n_ma:]
        e_buf[n_ma - len(tail):n_ma] = tail

    ar_lags = np.asarray(order.ar_lags, dtype=int)
    ma_lags = np.asarray(order.ma_lags, dtype=int)
    for t in range(h):
        value = model.intercept
        if n_ar:
            value += float(model.ar_coeffs @ w_buf[n_ar + t - ar_lags])
        if n_ma:
            value += float(model.ma_coeffs @ e_buf[n_ma + t - ma_lags])
        w_buf[n_ar + t] = value

    out = w_buf[n_ar:]
    if order.d:
        out = undifference(out, seasonal_level, order.d)
    if order.D:
        out = seasonal_undifference(out, values, order.D, order.m)
    return np.clip(out, 0.0, 1.0) if clip else out


def fit_and_forecast(history: Sequence[float], h: int, grid: Optional[GridSpec] = None) -> np.ndarray:
    model = grid_search_arima(history, grid=grid)
    return forecast_recursive(model, history, h)


# ── Persistence ───────────────────────────────────────────────────────────────

def _floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_model(model: ArimaModel, path: Union[str, Path]) -> Path:
    """Plain-text key = value model file."""
    path = Path(path)
    lines = [
        f"order = {','.join(str(v) for v in model.order.as_tuple())}",
        f"ar_lags = {','.join(str(v) for v in model.ar_lags)}",
        f"ar_coeffs = {_floats(model.ar_coeffs)}",
        f"ma_lags = {','.join(str(v) for v in model.ma_lags)}",
        f"ma_coeffs = {_floats(model.ma_coeffs)}",
        f"intercept = {float(model.intercept)!r}",
        f"residual_variance = {float(model.residual_variance)!r}",
        f"n_obs = {model.n_obs}",
        f"aic = {float(model.aic)!r}",
        f"stationary = {str(model.stationary).lower()}",
        f"invertible = {str(model.invertible).lower()}",
        f"fallback = {str(model.fallback).lower()}",
        f"training_tail = {_floats(model.training_tail)}",
        f"residual_tail = {_floats(model.residual_tail)}",
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_model(path: Union[str, Path]) -> ArimaModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidSpecError(f"cannot read model file {path}: {exc}") from exc
    fields: Dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidSpecError(f"malformed model line: {line!r}")
        fields[key.strip()] = value.strip()

    def floats(key: str) -> np.ndarray:
        raw = fields.get(key, "")
        return np.array([float(v) for v in raw.split(",")]) if raw else np.zeros(0)

    try:
        p, d, q, P, D, Q, m = (int(v) for v in fields["order"].split(","))
        return ArimaModel(
            order=ArimaOrder(p=p, d=d, q=q, P=P, D=D, Q=Q, m=m),
            ar_coeffs=floats("ar_coeffs"),
            ma_coeffs=floats("ma_coeffs"),
            intercept=float(fields["intercept"]),
            residual_variance=float(fields.get("residual_variance", "0")),
            n_obs=int(fields.get("n_obs", "0")),
            aic=float(fields.get("aic", "nan")),
            training_tail=floats("training_tail"),
            residual_tail=floats("residual_tail"),
            stationary=fields.get("stationary", "true") == "true",
            invertible=fields.get("invertible", "true") == "true",
            fallback=fields.get("fallback", "false") == "true",
        )
    except (KeyError, ValueError) as exc:
        raise InvalidSpecError(f"invalid model file {path}: {exc}") from exc
