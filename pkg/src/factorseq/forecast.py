"""One-step-ahead forecast comparisons with strong and weak factors.

Three regressions are compared for every series ``i``:

* ``both``: ``y_{i,t+1}`` on ``(F^s_t, F^w_t)``;
* ``strong_only``: ``y_{i,t+1}`` on ``F^s_t``;
* ``sw``: ``y_{i,t+1}`` on ``(F^s_t, y_{i,t}, ..., y_{i,t-p})`` with ``p``
  chosen by AIC per series.

All regressions include an intercept.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .lowrank import fit_slra
from .panel import Panel, standardize
from .statespace import SimulatedPanel

MODELS = ("both", "strong_only", "sw")
COND_LIMIT = 1e12


@dataclass(frozen=True)
class ForecastSpec:
    model: str
    max_lag: int = 6
    horizon: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise DataError(f"forecast model must be one of {MODELS}, got {self.model!r}")
        if self.max_lag < 0:
            raise DataError("max_lag must be >= 0")
        if self.horizon != 1:
            raise DataError("only one-step-ahead forecasts are supported")


@dataclass(frozen=True)
class ForecastResult:
    """Predictions for the target period and their squared errors.

    ``lags`` holds the AIC-selected own-lag order per series for ``sw``
    (empty otherwise).
    """

    model: str
    predictions: np.ndarray
    squared_errors: np.ndarray
    msfe: float
    target: int
    lags: tuple = ()


@dataclass(frozen=True)
class OlsFit:
    coef: np.ndarray
    resid: np.ndarray

    @property
    def rss(self) -> float:
        return float(self.resid @ self.resid)


def fit_ols(X, y) -> OlsFit:
    """Least squares ``y = X b + u``.

    Raises
    ------
    DataError
        If ``X`` does not have more rows than columns.
    NumericalError
        If ``X'X`` is rank deficient (condition number above 1e12).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T, k = X.shape
    if y.shape != (T,):
        raise DataError(f"y has shape {y.shape}, expected ({T},)")
    if T <= k:
        raise DataError(f"need more observations than regressors (T={T}, k={k})")
    if k:
        cond = np.linalg.cond(X.T @ X)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NumericalError(f"design matrix is rank deficient (cond(X'X) = {cond:.3g})")
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    else:
        coef = np.zeros(0)
    return OlsFit(coef, y - X @ coef)


def _lag_matrix(y: np.ndarray, lags: Sequence[int], start: int, stop: int) -> np.ndarray:
    return np.column_stack([y[start - l:stop - l] for l in lags]) if lags else np.zeros((stop - start, 0))


def aic_lag_select(y, p_max: int = 6) -> int:
    """Autoregressive order minimizing ``T log(RSS/T) + 2 (p + 1)``.

    Every candidate ``p = 0..p_max`` is fitted with an intercept on the
    common sample ``t >= p_max`` so the criteria are comparable.
    """
    y = np.asarray(y, dtype=float)
    T = y.size
    p_max = int(p_max)
    if p_max < 0:
        raise DataError("p_max must be >= 0")
    if T <= p_max + 10:
        raise DataError(f"series of length {T} too short for p_max={p_max}")
    if p_max == 0:
        return 0
    target = y[p_max:]
    Teff = target.size
    best_p, best = 0, np.inf
    for p in range(p_max + 1):
        X = np.column_stack([np.ones(Teff), _lag_matrix(y, range(1, p + 1), p_max, T)])
        rss = fit_ols(X, target).rss
        crit = Teff * np.log(max(rss, 1e-300) / Teff) + 2.0 * (p + 1)
        if crit < best:
            best_p, best = p, crit
    return best_p


def split_strong_weak(eigenvalues: np.ndarray, r_chi: int) -> int:
    """Number of strong factors: position of the largest ratio gap among the
    leading ``r_chi`` eigenvalues (at least 1)."""
    lam = np.asarray(eigenvalues[:r_chi], dtype=float)
    if lam.size <= 1:
        return int(lam.size)
    ratios = lam[:-1] / np.maximum(lam[1:], 1e-300)
    return int(np.argmax(ratios)) + 1


def training_factors(data, train_end: int, factor_mode: str = "oracle", r_chi: int = 2,
                     n_strong: Optional[int] = None):
    """Strong and weak factor series over columns ``0..train_end``.

    ``oracle`` takes the true states in transition order: ``x_1`` is the
    strong factor and the remaining states are weak (falls back to the
    stored ``(F^s, F^w)`` when no state path is available). ``estimated``
    runs SLRA with ``r_chi`` factors on the standardized training panel
    and splits them by the largest eigenvalue-ratio gap unless
    ``n_strong`` is given.
    """
    stop = train_end + 1
    if factor_mode == "oracle":
        if not isinstance(data, SimulatedPanel):
            raise DataError("oracle factors need a SimulatedPanel")
        if data.states is not None:
            return data.states[:1, :stop], data.states[1:, :stop]
        fs, fw = data.factors
        return fs[:, :stop], fw[:, :stop]
    if factor_mode == "estimated":
        y = data.y if isinstance(data, SimulatedPanel) else data
        z = standardize(y.columns(0, stop))
        fit = fit_slra(z, r_chi)
        k = split_strong_weak(fit.eigenvalues, r_chi) if n_strong is None else int(n_strong)
        return fit.factors[:k], fit.factors[k:]
    raise DataError(f"factor_mode must be 'oracle' or 'estimated', got {factor_mode!r}")


def _forecast_series(spec: ForecastSpec, yi: np.ndarray, fs: np.ndarray, fw: np.ndarray, train_end: int):
    """Fit on ``t <= train_end`` and predict ``train_end + 1``; returns (prediction, lag)."""
    stop = train_end + 1
    if spec.model == "sw":
        p = aic_lag_select(yi[:stop], spec.max_lag)
        # regress y_{t+1} on (1, F^s_t, y_t..y_{t-p}) for t = p..train_end-1
        t_idx = np.arange(p, train_end)
        own = np.column_stack([yi[t_idx - l] for l in range(p + 1)])
        X = np.column_stack([np.ones(t_idx.size), fs[:, t_idx].T, own])
        fit = fit_ols(X, yi[t_idx + 1])
        x_new = np.concatenate([[1.0], fs[:, train_end], yi[train_end - np.arange(p + 1)]])
        return float(x_new @ fit.coef), p
    regs = fs if spec.model == "strong_only" else np.vstack([fs, fw])
    X = np.column_stack([np.ones(train_end), regs[:, :train_end].T])
    fit = fit_ols(X, yi[1:stop])
    x_new = np.concatenate([[1.0], regs[:, train_end]])
    return float(x_new @ fit.coef), None


def run_forecast_models(sim, specs: Sequence[ForecastSpec], train_end: Optional[int] = None,
                        factor_mode: str = "oracle", r_chi: int = 2, n_strong: Optional[int] = None,
                        workers: int = 1) -> dict:
    """Compare forecast models on one panel.

    Parameters
    ----------
    sim : SimulatedPanel or Panel
        A plain :class:`Panel` requires ``factor_mode="estimated"``.
    specs : sequence of ForecastSpec
    train_end : int, optional
        Last training column (array position); default ``T - 2`` so the
        final column is forecast.
    factor_mode : {"oracle", "estimated"}

    Returns
    -------
    dict mapping model name to :class:`ForecastResult`.
    """
    y = sim.y if isinstance(sim, SimulatedPanel) else sim
    if not isinstance(y, Panel):
        raise DataError("expected a SimulatedPanel or Panel")
    T = y.T
    train_end = T - 2 if train_end is None else int(train_end)
    if train_end + 1 >= T or train_end < 0:
        raise DataError(f"train_end={train_end} leaves no target column (T={T})")
    needed = max([s.max_lag for s in specs if s.model == "sw"] + [0]) + 12
    if train_end + 1 < needed:
        raise DataError(f"training window of {train_end + 1} periods is too short")
    fs, fw = training_factors(sim, train_end, factor_mode, r_chi, n_strong)
    target = train_end + 1
    actual = y.values[:, target]
    out = {}
    for spec in specs:
        def one(i, spec=spec):
            return _forecast_series(spec, y.values[i], fs, fw, train_end)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                res = list(ex.map(one, range(y.n)))
        else:
            res = [one(i) for i in range(y.n)]
        preds = np.array([r[0] for r in res])
        sq = (actual - preds) ** 2
        lags = tuple(r[1] for r in res) if spec.model == "sw" else ()
        out[spec.model] = ForecastResult(spec.model, preds, sq, float(np.mean(sq)), target, lags)
    return out
