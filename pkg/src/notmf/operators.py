"""Temporal differencing operators applied matrix-free.

For a temporal factor matrix X (R x T) the family differences the columns
once at lag ``m`` (skipped when ``m == 0``) and optionally once more at
lag 1, giving a series Z of length ``T - m - first_order``. The k-th
operator then selects the window ``Z[:, d-k : d-k+out_cols]``, so

    apply_psi(fam, X, 0) - sum_k A_k apply_psi(fam, X, k)

is the VAR(d) residual of the differenced latent series. With ``m >= 1``
and no first-order layer, column j (0-based) of ``apply_psi(X, k)`` is
``x[d+m+j-k] - x[d+j-k]``; with ``m == 0`` it is the plain lag ``x[d+j-k]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SeriesTooShortError, SizeCapError

DENSE_CAP = 10**6


@dataclass(frozen=True)
class OperatorFamily:
    d: int
    m: int
    T: int
    first_order: bool = False

    @property
    def lags(self) -> tuple[int, ...]:
        """Differencing lags in application order."""
        return ((self.m,) if self.m > 0 else ()) + ((1,) if self.first_order else ())

    @property
    def diff_len(self) -> int:
        return self.T - sum(self.lags)

    @property
    def out_cols(self) -> int:
        return self.diff_len - self.d


def build(d: int, m: int, T: int, first_order: bool = False) -> OperatorFamily:
    if d < 1:
        raise SeriesTooShortError(f"VAR order d must be >= 1, got {d}")
    if m < 0:
        raise SeriesTooShortError(f"season m must be >= 0, got {m}")
    if T < 1:
        raise SeriesTooShortError(f"time length T must be >= 1, got {T}")
    fam = OperatorFamily(int(d), int(m), int(T), bool(first_order))
    if fam.out_cols < 1:
        extra = " with first-order differencing" if first_order else ""
        raise SeriesTooShortError(
            f"series too short for (d, m): T={T} needs T > d + m{' + 1' if first_order else ''} "
            f"= {d + m + int(first_order)} (d={d}, m={m}){extra}"
        )
    return fam


def difference(fam: OperatorFamily, X: np.ndarray) -> np.ndarray:
    """Apply the differencing layers along columns: R x T -> R x diff_len."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fam.T:
        raise DimensionError(f"expected {fam.T} columns, got shape {X.shape}")
    Z = X
    for lag in fam.lags:
        Z = Z[:, lag:] - Z[:, :-lag]
    return Z


def difference_adjoint(fam: OperatorFamily, G: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`difference`: R x diff_len -> R x T."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[1] != fam.diff_len:
        raise DimensionError(f"expected {fam.diff_len} columns, got shape {G.shape}")
    out = G
    for lag in reversed(fam.lags):
        n = out.shape[1] + lag
        up = np.zeros((out.shape[0], n))
        up[:, lag:] += out
        up[:, :-lag] -= out
        out = up
    return out


def _check_k(fam, k):
    if not 0 <= k <= fam.d:
        raise IndexError(f"operator index k={k} outside 0..{fam.d}")


def apply_psi(fam: OperatorFamily, X: np.ndarray, k: int) -> np.ndarray:
    """X Psi_k^T (composed with Phi^T when first_order)."""
    _check_k(fam, k)
    Z = difference(fam, X)
    start = fam.d - k
    return Z[:, start:start + fam.out_cols]


def apply_psi_adjoint(fam: OperatorFamily, G: np.ndarray, k: int) -> np.ndarray:
    """G Psi_k (composed with Phi when first_order)."""
    _check_k(fam, k)
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[1] != fam.out_cols:
        raise DimensionError(f"expected {fam.out_cols} columns, got shape {G.shape}")
    GZ = np.zeros((G.shape[0], fam.diff_len))
    start = fam.d - k
    GZ[:, start:start + fam.out_cols] = G
    return difference_adjoint(fam, GZ)


def dense_psi(fam: OperatorFamily, k: int) -> np.ndarray:
    """Explicit out_cols x T matrix of the k-th operator. Tests and oracles only."""
    _check_k(fam, k)
    if fam.out_cols * fam.T > DENSE_CAP:
        raise SizeCapError(
            f"dense operator of {fam.out_cols}x{fam.T} exceeds cap of {DENSE_CAP} entries"
        )
    # rows of the identity pushed through the forward map
    return apply_psi(fam, np.eye(fam.T), k).T.copy()
