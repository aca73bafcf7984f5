"""CSV loading for the ETT / exchange-rate / ILI benchmark layouts.

Files are UTF-8, comma separated, with a header row and an optional leading
date column. The target defaults to ``OT`` when present, otherwise the last
column. Numbers are parsed with ``float()``, which is locale independent.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .records import atomic_write, load_matrix, save_matrix
from .timeseries import TimeSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    name: str = ""
    target_column: str | None = None
    date_column: str | None = None

    @property
    def label(self) -> str:
        return self.name or Path(self.path).stem


def load_csv(spec: DatasetSpec) -> TimeSeries:
    """Read the target column of a benchmark CSV as a :class:`TimeSeries`.

    Raises
    ------
    DataFormatError
        Missing column (message lists the header), a non-numeric or
        non-finite cell (``err.row`` is the 1-based data row), a blank line
        before the end of the data, or no data rows at all.
    """
    path = Path(spec.path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file (no header row)")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    trailing = 0
    while body and not any(cell.strip() for cell in body[-1]):
        body.pop()
        trailing += 1
    if not body:
        raise DataFormatError(f"{path}: no data rows")

    column = spec.target_column or ("OT" if "OT" in header else header[-1])
    if column not in header:
        raise DataFormatError(f"{path}: column {column!r} not found; available columns: {header}")
    if spec.date_column is not None and spec.date_column not in header:
        raise DataFormatError(f"{path}: date column {spec.date_column!r} not found; available columns: {header}")
    col = header.index(column)

    values = np.empty(len(body))
    for i, row in enumerate(body, start=1):
        if not any(cell.strip() for cell in row):
            raise DataFormatError(f"{path}: blank line at data row {i}", row=i)
        try:
            values[i - 1] = float(row[col])
        except (ValueError, IndexError):
            cell = row[col] if col < len(row) else "<missing>"
            raise DataFormatError(f"{path}: non-numeric value {cell!r} in column {column!r} at data row {i}",
                                  row=i) from None
        if not np.isfinite(values[i - 1]):
            raise DataFormatError(f"{path}: non-finite value in column {column!r} at data row {i}", row=i)
    log.info("loaded %s: %d rows from column %r (%d blank trailing line(s) skipped)",
             path.name, len(values), column, trailing)
    return TimeSeries(spec.label, values)


def write_csv(series: TimeSeries, path, column: str = "OT", dates=None) -> Path:
    """Write a single-column benchmark-style CSV; values round-trip exactly."""
    lines = [("date," if dates is not None else "") + column]
    for i, v in enumerate(series.values):
        prefix = f"{dates[i]}," if dates is not None else ""
        lines.append(prefix + repr(float(v)))
    return atomic_write(path, "\n".join(lines) + "\n")


def save_series(series: TimeSeries, path) -> Path:
    return save_matrix(path, series.values, name=series.name)


def load_series(path) -> TimeSeries:
    header, values = load_matrix(path)
    return TimeSeries(header.get("name", ""), values)
