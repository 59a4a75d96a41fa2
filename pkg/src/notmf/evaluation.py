"""Forecast metrics, validation grid search and the synthetic benchmark."""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix
from .errors import ConfigError, DimensionError
from .forecast import rolling_forecast
from .model import ModelConfig


@dataclass(frozen=True)
class MetricReport:
    mape: float
    rmse: float
    n_evaluated: int


def _scored(actual, predicted, mask):
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if mask is None:
        mask = ~np.isnan(actual)
    mask = np.asarray(mask, dtype=bool)
    if not (actual.shape == predicted.shape == mask.shape):
        raise DimensionError(
            f"shapes differ: actual {actual.shape}, predicted {predicted.shape}, mask {mask.shape}"
        )
    return actual, predicted, mask


def mape(actual, predicted, mask=None) -> float:
    """Mean absolute percentage error (in percent) over observed, non-zero actuals."""
    actual, predicted, mask = _scored(actual, predicted, mask)
    keep = mask & (actual != 0)
    if not keep.any():
        raise ValueError("no observed non-zero entries to score MAPE on")
    a, p = actual[keep], predicted[keep]
    return float(np.mean(np.abs(a - p) / np.abs(a)) * 100)


def rmse(actual, predicted, mask=None) -> float:
    actual, predicted, mask = _scored(actual, predicted, mask)
    if not mask.any():
        raise ValueError("no observed entries to score RMSE on")
    diff = actual[mask] - predicted[mask]
    return float(np.sqrt(np.mean(diff**2)))


def report(actual, predicted, mask=None) -> MetricReport:
    actual, predicted, mask = _scored(actual, predicted, mask)
    return MetricReport(mape(actual, predicted, mask), rmse(actual, predicted, mask),
                        int(mask.sum()))


def score_forecast(Y: MaskedMatrix, forecast) -> MetricReport:
    """Score a :class:`ForecastResult` against the observed entries of ``Y``."""
    sl = slice(forecast.start_index, forecast.stop_index)
    return report(Y.values[:, sl], forecast.values, Y.mask[:, sl])


@dataclass(frozen=True)
class GridResult:
    best_lam: float
    best_rho: float
    table: list  # rows of (lam, rho, mape, rmse), grid order

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "rho", "mape", "rmse"])
        for row in self.table:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def grid_search(Y: MaskedMatrix, split, config_base: ModelConfig, lam_grid, rho_grid,
                horizon: int = 1) -> GridResult:
    """Pick (lambda, rho) by rolling-forecast MAPE on the validation columns.

    ``split`` is ``(n_train, n_val)``: train on the first ``n_train``
    columns, score the next ``n_val``. Ties go to smaller RMSE, then smaller
    lambda, then smaller rho.
    """
    n_train, n_val = split
    lam_grid, rho_grid = list(lam_grid), list(rho_grid)
    if not lam_grid or not rho_grid:
        raise ConfigError("empty hyperparameter grid")
    if n_train < 1 or n_val < horizon or n_train + n_val > Y.n_cols:
        raise ConfigError(f"bad split {split} for {Y.n_cols} columns and horizon {horizon}")
    windows = n_val // horizon
    table = []
    for lam, rho in itertools.product(lam_grid, rho_grid):
        cfg = config_base.replace(lam=float(lam), rho=float(rho))
        fc = rolling_forecast(Y, cfg, n_train, horizon, windows)
        rep = score_forecast(Y, fc)
        table.append((float(lam), float(rho), rep.mape, rep.rmse))
    best = min(table, key=lambda r: (r[2], r[3], r[0], r[1]))
    return GridResult(best[0], best[1], table)


def _stable_var(rng, R, d, radius):
    """Random VAR(d) coefficients whose companion matrix has spectral radius ``radius``."""
    A = rng.standard_normal((R, d * R))
    comp = np.zeros((d * R, d * R))
    comp[:R] = A
    comp[R:, :-R] = np.eye((d - 1) * R)
    rho = np.max(np.abs(np.linalg.eigvals(comp)))
    # scaling A_k by c^k scales companion eigenvalues by c
    c = radius / rho
    for k in range(d):
        A[:, k * R:(k + 1) * R] *= c ** (k + 1)
    return A


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    W: np.ndarray
    X: np.ndarray
    A: np.ndarray
    var_series: np.ndarray
    Y_clean: np.ndarray
    Y_full: np.ndarray


def make_synthetic(N: int = 60, T: int = 420, R_true: int = 4, m_true: int = 28,
                   d_true: int = 2, noise_sd: float = 0.1, missing_rate: float = 0.6,
                   seed: int = 1):
    """Low-rank nonstationary panel whose seasonally differenced factors follow a VAR.

    Each factor row is level + periodic profile (period ``m_true``) + linear
    trend + a seasonally integrated VAR(d_true) process, so
    x[t] - x[t-m] = m * slope + e[t] with e stationary. Loadings are
    i.i.d. N(1, 0.3^2), keeping every series well away from zero.
    Returns ``(MaskedMatrix, SyntheticTruth)``.
    """
    if min(N, T, R_true, d_true) < 1 or m_true < 1:
        raise ConfigError("N, T, R_true, d_true, m_true must be positive")
    if T <= d_true + 2 * m_true:
        raise ConfigError(f"T={T} must exceed d_true + 2*m_true = {d_true + 2 * m_true}")
    if R_true >= min(N, T):
        raise ConfigError(f"R_true={R_true} must be < min(N, T)")
    if not 0 <= missing_rate < 1 or noise_sd < 0:
        raise ConfigError("need 0 <= missing_rate < 1 and noise_sd >= 0")
    rng = np.random.default_rng(seed)
    t = np.arange(T)
    level = 5.0 + rng.uniform(0, 1, size=(R_true, 1))
    phase = 2 * np.pi * t / m_true
    seasonal = np.zeros((R_true, T))
    for h in (1, 2, 3):
        amp = rng.standard_normal((R_true, 1)) / h
        shift = rng.uniform(0, 2 * np.pi, size=(R_true, 1))
        seasonal += amp * np.sin(h * phase + shift)
    slope = rng.uniform(-1, 1, size=(R_true, 1)) * 2e-3
    A = _stable_var(rng, R_true, d_true, 0.8)
    e = np.zeros((R_true, T))
    shocks = 0.3 * rng.standard_normal((R_true, T))
    for s in range(T):
        e[:, s] = shocks[:, s]
        for k in range(1, d_true + 1):
            if s - k >= 0:
                e[:, s] += A[:, (k - 1) * R_true:k * R_true] @ e[:, s - k]
    integrated = e.copy()
    for s in range(m_true, T):
        integrated[:, s] += integrated[:, s - m_true]
    X = level + seasonal + slope * t + integrated
    W = 1.0 + 0.3 * rng.standard_normal((R_true, N))
    Y_clean = W.T @ X
    Y_full = Y_clean + noise_sd * rng.standard_normal((N, T))
    mask = rng.uniform(size=(N, T)) >= missing_rate
    return (MaskedMatrix(Y_full, mask),
            SyntheticTruth(W, X, A, e, Y_clean, Y_full))
