"""In-memory series table and CSV ingestion.

CSV dialect: comma separated, UTF-8, header row, decimal point.  Column 1
is a strictly increasing integer or ISO-8601 timestamp used only to check
ordering.  Every other column is numeric; empty cells and ``NA``/``NaN``
are missing values.  The UCI Beijing PM2.5 layout is recognised and mapped
onto this model (calendar columns dropped, wind direction coded).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none"}

PM25_COLUMNS = ("No", "year", "month", "day", "hour", "pm2.5",
                "DEWP", "TEMP", "PRES", "cbwd", "Iws", "Is", "Ir")
PM25_EXOGENOUS = ("DEWP", "TEMP", "PRES", "cbwd", "Iws", "Is", "Ir")
PM25_TARGET = "pm2.5"
WIND_CODES = {"NE": 0.0, "NW": 1.0, "SE": 2.0, "cv": 3.0}


@dataclass
class SeriesFrame:
    """``T x N`` float table with the target column last.

    ``rows`` holds each row's position in the source before missing rows
    were dropped; two rows are adjacent in time iff their positions differ
    by one.
    """

    columns: list[str]
    values: np.ndarray
    rows: np.ndarray | None = None
    index_name: str = "t"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise DataError(
                f"values shape {self.values.shape} does not match {len(self.columns)} columns"
            )
        if len(set(self.columns)) != len(self.columns):
            raise DataError(f"duplicate column names in {self.columns}")
        if self.rows is None:
            self.rows = np.arange(self.values.shape[0])
        self.rows = np.asarray(self.rows, dtype=np.int64)

    @property
    def target(self) -> str:
        return self.columns[-1]

    @property
    def exogenous(self) -> list[str]:
        return self.columns[:-1]

    @property
    def n_vars(self) -> int:
        return len(self.columns)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def with_target(self, target: str) -> "SeriesFrame":
        """Reorder so that ``target`` is the last column."""
        if target not in self.columns:
            raise DataError(f"target column {target!r} not found; columns are {self.columns}")
        order = [c for c in self.columns if c != target] + [target]
        idx = [self.columns.index(c) for c in order]
        return SeriesFrame(order, self.values[:, idx], self.rows.copy(), self.index_name)

    def drop_missing(self) -> "SeriesFrame":
        keep = np.all(np.isfinite(self.values), axis=1)
        dropped = int((~keep).sum())
        if dropped:
            log.info("dropped %d of %d rows with missing values", dropped, len(keep))
        return SeriesFrame(list(self.columns), self.values[keep], self.rows[keep], self.index_name)


def _parse_float(cell: str, line: int, col: str) -> float:
    if cell.strip().lower() in MISSING:
        return np.nan
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"line {line}: non-numeric value {cell!r} in column {col!r}") from None


def _parse_stamp(cell: str, line: int):
    cell = cell.strip()
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(cell)
    except ValueError:
        raise DataError(f"line {line}: timestamp {cell!r} is neither integer nor ISO-8601") from None


def _check_increasing(stamps: list, name: str):
    kinds = {type(s) for s in stamps}
    if len(kinds) > 1:
        raise DataError(f"timestamp column {name!r} mixes integer and ISO-8601 values")
    for k in range(1, len(stamps)):
        if not stamps[k] > stamps[k - 1]:
            raise DataError(
                f"timestamp column {name!r} is not strictly increasing at data row {k + 1}"
            )


def read_csv(path: str | Path, target: str | None = None) -> SeriesFrame:
    """Load a CSV into a :class:`SeriesFrame`, target last, missing rows dropped.

    Without ``target`` the last CSV column is the target (the PM2.5 layout
    defaults to ``pm2.5``).
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path} has a header but no data rows")

    if set(PM25_COLUMNS) <= set(header):
        frame = _pm25_frame(header, body)
        target = target or PM25_TARGET
    else:
        frame = _generic_frame(header, body)
    if target is not None:
        frame = frame.with_target(target)
    return frame.drop_missing()


def _generic_frame(header: list[str], body: list[list[str]]) -> SeriesFrame:
    if len(header) < 3:
        raise DataError("CSV needs a timestamp column and at least two variables")
    columns = header[1:]
    values = np.empty((len(body), len(columns)))
    stamps = []
    for k, row in enumerate(body):
        line = k + 2
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        stamps.append(_parse_stamp(row[0], line))
        for c, cell in enumerate(row[1:]):
            values[k, c] = _parse_float(cell, line, columns[c])
    _check_increasing(stamps, header[0])
    return SeriesFrame(columns, values, index_name=header[0])


def _pm25_frame(header: list[str], body: list[list[str]]) -> SeriesFrame:
    pos = {name: header.index(name) for name in PM25_COLUMNS}
    columns = list(PM25_EXOGENOUS) + [PM25_TARGET]
    values = np.empty((len(body), len(columns)))
    stamps = []
    for k, row in enumerate(body):
        line = k + 2
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        stamps.append(_parse_stamp(row[pos["No"]], line))
        for c, name in enumerate(columns):
            cell = row[pos[name]].strip()
            if name == "cbwd":
                if cell.lower() in MISSING:
                    values[k, c] = np.nan
                elif cell in WIND_CODES:
                    values[k, c] = WIND_CODES[cell]
                else:
                    raise DataError(f"line {line}: unknown wind direction {cell!r}")
            else:
                values[k, c] = _parse_float(cell, line, name)
    _check_increasing(stamps, "No")
    return SeriesFrame(columns, values, index_name="No")


def write_csv(frame: SeriesFrame, path: str | Path) -> None:
    """Write ``frame`` in the package CSV dialect; floats round-trip exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([frame.index_name] + list(frame.columns))
        for stamp, row in zip(frame.rows, frame.values):
            w.writerow([int(stamp)] + ["" if not np.isfinite(v) else repr(float(v)) for v in row])
