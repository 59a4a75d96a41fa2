"""Partially observed data matrix and the projection onto its observed entries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

MISSING_RULES = ("nan", "zero", "mask")


@dataclass(frozen=True, eq=False)
class MaskedMatrix:
    """N x T values with a boolean mask (True = observed).

    Values stored at unobserved positions are never read by downstream code;
    use :attr:`filled` to get the zero-filled observed data.
    """

    values: np.ndarray
    mask: np.ndarray
    _row_index: tuple = field(init=False, repr=False)
    _col_index: tuple = field(init=False, repr=False)
    _filled: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise DimensionError(
                f"values {values.shape} and mask {mask.shape} must be equal 2-d shapes"
            )
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionError(f"empty matrix of shape {values.shape}")
        values.setflags(write=False)
        mask.setflags(write=False)
        filled = np.where(mask, values, 0.0)
        filled.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_filled", filled)
        object.__setattr__(
            self, "_row_index", tuple(np.flatnonzero(r) for r in mask)
        )
        object.__setattr__(
            self, "_col_index", tuple(np.flatnonzero(c) for c in mask.T)
        )

    @classmethod
    def from_dense(cls, values, missing_rule: str = "nan", mask=None) -> "MaskedMatrix":
        """Build from a dense array.

        ``missing_rule`` is one of ``"nan"`` (NaN is missing), ``"zero"``
        (NaN and exact zeros are missing) or ``"mask"`` (use ``mask``).
        """
        try:
            arr = np.array(values, dtype=float)
        except ValueError as exc:
            raise DimensionError(f"ragged or non-numeric input: {exc}") from None
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2-d array, got ndim={arr.ndim}")
        if missing_rule == "nan":
            obs = ~np.isnan(arr)
        elif missing_rule == "zero":
            obs = ~np.isnan(arr) & (arr != 0)
        elif missing_rule == "mask":
            if mask is None:
                raise DimensionError("explicit mask rule needs a mask")
            obs = np.array(mask, dtype=bool)
        else:
            raise ValueError(f"unknown missing rule {missing_rule!r}")
        return cls(arr, obs)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def observed_count(self) -> int:
        return int(self.mask.sum())

    @property
    def filled(self) -> np.ndarray:
        """P_Omega(Y): observed values, zeros elsewhere."""
        return self._filled

    def row_observed(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_rows:
            raise IndexError(f"row {i} out of range [0, {self.n_rows})")
        return self._row_index[i]

    def column_observed(self, t: int) -> np.ndarray:
        if not 0 <= t < self.n_cols:
            raise IndexError(f"column {t} out of range [0, {self.n_cols})")
        return self._col_index[t]

    def columns(self, stop: int) -> "MaskedMatrix":
        """The first ``stop`` columns as a new matrix."""
        return MaskedMatrix(self.values[:, :stop], self.mask[:, :stop])


def project(mask: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Keep entries of ``M`` where ``mask`` is True, zero the rest."""
    mask = np.asarray(mask, dtype=bool)
    M = np.asarray(M, dtype=float)
    if mask.shape != M.shape:
        raise DimensionError(f"mask {mask.shape} does not match matrix {M.shape}")
    return np.where(mask, M, 0.0)


def column_observed(mask: np.ndarray, t: int) -> list[int]:
    mask = np.asarray(mask, dtype=bool)
    if not 0 <= t < mask.shape[1]:
        raise IndexError(f"column {t} out of range [0, {mask.shape[1]})")
    return np.flatnonzero(mask[:, t]).tolist()


def row_observed(mask: np.ndarray, i: int) -> list[int]:
    mask = np.asarray(mask, dtype=bool)
    if not 0 <= i < mask.shape[0]:
        raise IndexError(f"row {i} out of range [0, {mask.shape[0]})")
    return np.flatnonzero(mask[i]).tolist()
