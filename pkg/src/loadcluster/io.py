"""CSV ingestion, gap filling and min-max scaling of area load profiles.

Wide layout only: ``timestamp,<area_id>,...`` with ISO-8601 datetimes.
"""

from __future__ import annotations

import csv
import logging
import os
import tempfile
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from loadcluster.errors import DataQualityError, ParseError, ValidationError

logger = logging.getLogger(__name__)

MAX_MISSING_FRACTION = 0.20
_MISSING = {"", "nan", "NaN", "NA", "null"}


@dataclass(frozen=True)
class IngestSummary:
    filled_cells: int
    filled_per_area: dict


@dataclass(frozen=True, eq=False)
class LoadMatrix:
    """T x N load matrix, one column per area.

    ``scalers`` holds one ``(x_min, x_max)`` pair per area once normalized.
    """

    timestamps: np.ndarray  # datetime64[s], strictly increasing
    values: np.ndarray
    area_ids: tuple
    normalized: bool = False
    scalers: Optional[tuple] = None
    summary: Optional[IngestSummary] = field(default=None, compare=False)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "area_ids", tuple(str(a) for a in self.area_ids))
        if vals.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if ts.shape != (vals.shape[0],):
            raise ValueError(f"{ts.shape[0]} timestamps for {vals.shape[0]} rows")
        if len(self.area_ids) != vals.shape[1]:
            raise ValueError(f"{len(self.area_ids)} area ids for {vals.shape[1]} columns")
        if len(set(self.area_ids)) != len(self.area_ids):
            raise ValidationError("duplicate area ids")
        if ts.size > 1 and not np.all(np.diff(ts).astype(np.int64) > 0):
            raise ValidationError("timestamps must be strictly increasing")
        if self.normalized and self.scalers is None:
            raise ValueError("normalized matrix requires scalers")

    @property
    def shape(self):
        return self.values.shape


def _parse_timestamp(text, row):
    try:
        return np.datetime64(text.strip().rstrip("Z"), "s")
    except ValueError as exc:
        raise ParseError(f"row {row}: cannot parse timestamp {text!r}") from exc


def _parse_value(text, row, col):
    text = text.strip()
    if text in _MISSING:
        return np.nan
    try:
        v = float(text)
    except ValueError as exc:
        raise ParseError(f"row {row}, column {col}: not a number: {text!r}") from exc
    if not np.isfinite(v):
        raise ParseError(f"row {row}, column {col}: non-finite value {text!r}")
    return v


def fill_gaps(ts: np.ndarray, column: np.ndarray) -> tuple[np.ndarray, int]:
    """Linear interpolation inside, nearest value at the edges."""
    missing = np.isnan(column)
    n_missing = int(missing.sum())
    if n_missing == 0:
        return column, 0
    if n_missing == column.size:
        raise ValueError("cannot fill an all-missing column")
    x = ts.astype(np.int64).astype(float)
    out = column.copy()
    out[missing] = np.interp(x[missing], x[~missing], column[~missing])
    return out, n_missing


def load_profiles(path, schema: Optional[Mapping[str, str]] = None) -> LoadMatrix:
    """Read a wide CSV of area loads into a raw :class:`LoadMatrix`.

    ``schema`` optionally maps CSV column names to area ids; when given,
    only the mapped columns are kept, in mapping order.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 2:
            raise ParseError(f"{path}: need a timestamp column and at least one area")
        ncol = len(header)
        stamps, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != ncol:
                raise ParseError(
                    f"row {lineno}: expected {ncol} fields, found {len(rec)}"
                )
            stamps.append(_parse_timestamp(rec[0], lineno))
            rows.append([_parse_value(c, lineno, header[j + 1]) for j, c in enumerate(rec[1:])])
    if not rows:
        raise ParseError(f"{path}: no data rows")

    ts = np.array(stamps, dtype="datetime64[s]")
    data = np.array(rows, dtype=float)
    names = [h.strip() for h in header[1:]]

    if schema is not None:
        idx = []
        for col in schema:
            if col not in names:
                raise ValidationError(f"schema column {col!r} not in CSV header")
            idx.append(names.index(col))
        data = data[:, idx]
        names = [schema[c] for c in schema]

    diffs = np.diff(ts).astype(np.int64)
    if np.any(diffs == 0):
        dup = ts[1:][diffs == 0][0]
        raise ValidationError(f"duplicate timestamp {dup}")
    if np.any(diffs < 0):
        raise ValidationError("timestamps are not in increasing order")

    filled = {}
    for j, area in enumerate(names):
        frac = float(np.isnan(data[:, j]).mean())
        if frac > MAX_MISSING_FRACTION:
            raise DataQualityError(area, frac)
        data[:, j], filled[area] = fill_gaps(ts, data[:, j])
    summary = IngestSummary(sum(filled.values()), filled)
    if summary.filled_cells:
        logger.info("filled %d missing cells", summary.filled_cells)
    return LoadMatrix(ts, data, names, summary=summary)


def normalize(m: LoadMatrix) -> LoadMatrix:
    """Per-area min-max scaling to [0, 1].

    A constant column maps to zeros with a warning.
    """
    if m.normalized:
        raise ValueError("matrix is already normalized")
    if not np.all(np.isfinite(m.values)):
        raise ValueError("values must be finite before normalization")
    lo = m.values.min(axis=0)
    hi = m.values.max(axis=0)
    span = hi - lo
    flat = span == 0
    for j in np.flatnonzero(flat):
        warnings.warn(f"area {m.area_ids[j]!r} is constant; mapped to zeros", stacklevel=2)
    out = (m.values - lo) / np.where(flat, 1.0, span)
    out[:, flat] = 0.0
    scalers = tuple((float(a), float(b)) for a, b in zip(lo, hi))
    return replace(m, values=out, normalized=True, scalers=scalers)


def denormalize(m: LoadMatrix) -> LoadMatrix:
    if not m.normalized:
        raise ValueError("matrix is not normalized")
    lo = np.array([s[0] for s in m.scalers])
    hi = np.array([s[1] for s in m.scalers])
    return replace(m, values=m.values * (hi - lo) + lo, normalized=False, scalers=None)


def format_float(x) -> str:
    """Shortest round-trip representation, so CSV re-reads are bit exact."""
    return repr(float(x))


def format_timestamp(t) -> str:
    return str(np.datetime64(t, "s"))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def matrix_csv(timestamps: np.ndarray, values: np.ndarray, area_ids: Sequence[str]) -> str:
    lines = [",".join(["timestamp", *area_ids])]
    for t, row in zip(timestamps, values):
        lines.append(",".join([format_timestamp(t), *map(format_float, row)]))
    return "\n".join(lines) + "\n"


def write_profiles(m: LoadMatrix, path) -> None:
    """Write ``m`` in the same wide CSV layout :func:`load_profiles` reads."""
    atomic_write_text(path, matrix_csv(m.timestamps, m.values, m.area_ids))
