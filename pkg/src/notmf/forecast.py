"""Latent forecasting with inverse differencing, and the rolling scheme."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix
from .errors import ConfigError, SeriesTooShortError
from .model import FactorModel, ModelConfig, fit
from .solvers import VarCoefficients, cgtf, update_coefficients


@dataclass(eq=False)
class ForecastResult:
    values: np.ndarray
    start_index: int
    horizon: int
    windows: int = 1

    def __post_init__(self):
        if self.values.shape[1] != self.horizon * self.windows:
            raise ValueError(
                f"{self.values.shape[1]} forecast columns != horizon {self.horizon} x windows {self.windows}"
            )

    @property
    def stop_index(self) -> int:
        return self.start_index + self.values.shape[1]


def forecast_latent(X, coeffs: VarCoefficients, m: int, delta: int,
                    first_order: bool = False) -> np.ndarray:
    """Forecast ``delta`` new columns of X.

    The series is differenced at lag ``m`` (if ``m > 0``) and then at lag 1
    (if ``first_order``); the VAR extrapolates the innermost series and each
    layer is integrated back with x_hat[t] = x[t - lag] + z_hat[t], where
    x[t - lag] is itself a forecast once t - lag reaches past the data.
    """
    X = np.asarray(X, dtype=float)
    R, T = X.shape
    d = coeffs.d
    lags = ([m] if m > 0 else []) + ([1] if first_order else [])
    if T < d + sum(lags):
        raise SeriesTooShortError(
            f"need T >= d + m{' + 1' if first_order else ''} to forecast (T={T}, d={d}, m={m})"
        )
    if delta == 0:
        return np.zeros((R, 0))
    # layers[j] holds the series after j differencing steps, aligned so that
    # column t of every layer refers to time t (leading entries undefined).
    layers = [np.concatenate([X, np.zeros((R, delta))], axis=1)]
    for lag in lags:
        prev = layers[-1]
        z = np.full_like(prev, np.nan)
        z[:, lag:T] = prev[:, lag:T] - prev[:, :T - lag]
        layers.append(z)
    inner = layers[-1]
    for t in range(T, T + delta):
        inner[:, t] = sum(coeffs.block(k) @ inner[:, t - k] for k in range(1, d + 1))
        for j in range(len(lags) - 1, -1, -1):
            lag = lags[j]
            layers[j][:, t] = layers[j][:, t - lag] + layers[j + 1][:, t]
    return layers[0][:, T:].copy()


def forecast_observations(model: FactorModel, delta: int) -> ForecastResult:
    cfg = model.config
    Xf = forecast_latent(model.X, model.coeffs, cfg.season, delta, cfg.first_order)
    return ForecastResult(model.W.T @ Xf, model.X.shape[1], delta, 1)


def rolling_forecast(Y_full: MaskedMatrix, config: ModelConfig, T_train: int,
                     delta: int, S: int, return_model: bool = False):
    """Fit on the first ``T_train`` columns, then repeatedly reveal ``delta``
    columns, refresh X (warm-started, W fixed) and A, and forecast ``delta``.

    Window s (0-based) covers columns T_train + s*delta .. T_train + (s+1)*delta - 1.
    """
    if delta < 1 or S < 1:
        raise ConfigError(f"need horizon >= 1 and windows >= 1 (got {delta}, {S})")
    if T_train + delta * S > Y_full.n_cols:
        raise ConfigError(
            f"T_train + horizon*windows = {T_train + delta * S} exceeds {Y_full.n_cols} columns"
        )
    model = fit(Y_full.columns(T_train), config)
    W = model.W
    X, coeffs = model.X, model.coeffs
    m, fo = config.season, config.first_order
    out = []
    for s in range(S):
        if s > 0:
            T_s = T_train + s * delta
            Y_s = Y_full.columns(T_s)
            fam = config.family(T_s)
            X0 = np.concatenate([X, Xf], axis=1)
            X = cgtf(Y_s, W, X0, coeffs, fam, config.lam, config.rho,
                     n_x=config.cg_iters, tol=config.cg_tol)
            coeffs = update_coefficients(X, fam, config.lam, config.diagonal)
        Xf = forecast_latent(X, coeffs, m, delta, fo)
        out.append(W.T @ Xf)
    result = ForecastResult(np.concatenate(out, axis=1), T_train, delta, S)
    if return_model:
        final = FactorModel(W, X, coeffs, config, config.family(X.shape[1]),
                            list(model.objective_trace))
        return result, final
    return result
