"""CSV ingestion and emission.

Layout: the first row is a header whose first cell names the id column
(free text, must not be empty or numeric) and whose remaining cells are
time labels. Each following row is a series id followed by one value per
time step. Empty cells and ``nan`` are missing; ``0`` is missing only
under the zero rule.

Numbers are written with Python's shortest round-trip ``repr``, and missing
entries as empty cells, so loading an emitted file reproduces values, mask
and labels exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix
from .errors import ParseError


@dataclass(eq=False)
class LabeledMatrix:
    data: MaskedMatrix
    row_labels: list
    col_labels: list
    corner: str = "series"


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, missing_rule: str = "nan") -> LabeledMatrix:
    if missing_rule not in ("nan", "zero"):
        raise ValueError(f"CSV missing rule must be 'nan' or 'zero', got {missing_rule!r}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or not header[0] or _is_number(header[0]) or any(not c for c in header[1:]):
        raise ParseError(
            f"{path}: missing or malformed header on line 1 (expected an id-column name "
            f"followed by non-empty time labels)"
        )
    T = len(header) - 1
    body = rows[1:]
    if not body:
        raise ParseError(f"{path}: no data rows")
    values = np.full((len(body), T), np.nan)
    labels = []
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != T + 1:
            raise ParseError(f"{path}: line {line} has {len(row) - 1} values, expected {T}")
        labels.append(row[0].strip())
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() == "nan":
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at line {line}, column {j + 2}"
                ) from None
    data = MaskedMatrix.from_dense(values, "zero" if missing_rule == "zero" else "nan")
    return LabeledMatrix(data, labels, header[1:], header[0])


def format_value(v: float) -> str:
    return repr(float(v))


def write_matrix(path, values, row_labels, col_labels, mask=None, corner: str = "series") -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner, *col_labels])
        for i, label in enumerate(row_labels):
            cells = [
                format_value(v) if (mask is None or mask[i, j]) and not np.isnan(v) else ""
                for j, v in enumerate(values[i])
            ]
            w.writerow([label, *cells])


def write_csv(path, lm: LabeledMatrix) -> None:
    write_matrix(path, lm.data.values, lm.row_labels, lm.col_labels, lm.data.mask, lm.corner)


def standardize(Y: MaskedMatrix, n_cols: int):
    """Z-score each series using its observed entries among the first ``n_cols`` columns.

    Returns ``(Y_scaled, offset, scale)``; rows with fewer than two
    observations keep scale 1.
    """
    obs = Y.mask[:, :n_cols]
    vals = Y.filled[:, :n_cols]
    count = obs.sum(axis=1)
    offset = np.where(count > 0, vals.sum(axis=1) / np.maximum(count, 1), 0.0)
    var = np.where(obs, (vals - offset[:, None]) ** 2, 0.0).sum(axis=1) / np.maximum(count - 1, 1)
    scale = np.sqrt(var)
    scale = np.where((count > 1) & (scale > 0), scale, 1.0)
    scaled = (Y.values - offset[:, None]) / scale[:, None]
    return MaskedMatrix(scaled, Y.mask), offset, scale
