"""Load-panel ingestion, normalization, and train/test splitting.

A load panel is an N x d matrix of samples (rows are time, columns are
stations) recorded on a strictly uniform time grid. Ingestion is strict:
missing cells, ragged timestamps, and short files are rejected rather than
repaired, because silent imputation would alter every spectral quantity
computed downstream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    FileError,
    InsufficientData,
    ParseError,
    RangeError,
    SpacingError,
)

# Sub-sample jitter tolerated in exported timestamps, in seconds.
SPACING_TOLERANCE_S = 1.0


@dataclass(frozen=True)
class LoadPanel:
    """Time-ordered load samples for a set of stations.

    Attributes
    ----------
    values : ndarray, shape (N, d)
        Load samples, one row per time step, one column per station.
    sample_interval_s : float
        Spacing of the time grid in seconds.
    station_ids : tuple of str
        Column labels, in column order.
    start_timestamp : float
        Epoch seconds of the first row.
    """

    values: np.ndarray
    sample_interval_s: float
    station_ids: tuple
    start_timestamp: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise InsufficientData("panel values must be a 2-d array")
        if vals.shape[0] < 2:
            raise InsufficientData("a panel needs at least 2 rows")
        if vals.shape[1] < 1:
            raise InsufficientData("a panel needs at least 1 station")
        if vals.shape[1] != len(self.station_ids):
            raise InsufficientData("station_ids do not match column count")
        if not np.all(np.isfinite(vals)):
            r, c = np.argwhere(~np.isfinite(vals))[0]
            raise ParseError(int(r), int(c), "non-finite value")
        if not self.sample_interval_s > 0:
            raise SpacingError("sample interval must be positive")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "station_ids", tuple(str(s) for s in self.station_ids))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_stations(self) -> int:
        return self.values.shape[1]

    def timestamps(self) -> np.ndarray:
        """Epoch seconds of every row."""
        return self.start_timestamp + self.sample_interval_s * np.arange(self.n_samples)

    def with_values(self, values: np.ndarray) -> "LoadPanel":
        """Copy of this panel with the same grid and ids but new values."""
        return LoadPanel(values, self.sample_interval_s, self.station_ids,
                         self.start_timestamp)


@dataclass(frozen=True)
class NormStats:
    """Per-column min/max statistics of a normalization window.

    Columns where ``max == min`` are flagged constant; they normalize to
    zero and denormalize back to their constant level.
    """

    col_min: np.ndarray
    col_max: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        lo = np.asarray(self.col_min, dtype=float)
        hi = np.asarray(self.col_max, dtype=float)
        if np.any(hi < lo):
            raise RangeError("per-column max must be >= min")
        const = hi == lo if self.constant is None else np.asarray(self.constant, bool)
        for name, arr in (("col_min", lo), ("col_max", hi), ("constant", const)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def span(self) -> np.ndarray:
        """Denominator of the min-max map; 1 on constant columns."""
        return np.where(self.constant, 1.0, self.col_max - self.col_min)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Map values through (x - min) / (max - min), 0 on constant columns."""
        out = (np.asarray(values, float) - self.col_min) / self.span
        if np.any(self.constant):
            out = out.copy()
            out[:, self.constant] = 0.0
        return out

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`apply`; constant columns return their level."""
        out = np.asarray(normalized, float) * self.span + self.col_min
        if np.any(self.constant):
            out = out.copy()
            out[:, self.constant] = self.col_min[self.constant]
        return out


@dataclass(frozen=True)
class SplitSpec:
    """Half-open train and test index ranges, train strictly before test."""

    train_range: tuple
    test_range: tuple

    def validate(self, n_samples: int):
        a, b = self.train_range
        c, d = self.test_range
        for lo, hi, name in ((a, b, "train"), (c, d, "test")):
            if not (0 <= lo < hi <= n_samples):
                raise RangeError(f"{name} range [{lo}, {hi}) invalid for N={n_samples}")
        if b > c:
            raise RangeError("train range must end before test range begins")


def _parse_timestamp(text: str, row: int) -> float:
    """Epoch seconds from ISO-8601 or a plain epoch number."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        iso = text[:-1] + "+00:00" if text.endswith("Z") else text
        dt = datetime.fromisoformat(iso)
    except ValueError:
        raise ParseError(row, 0, f"timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_csv(path, schema: dict | None = None) -> LoadPanel:
    """Read a load panel from CSV.

    The expected layout is a header row ``timestamp,<station_id>,...``
    followed by one row per sample. Timestamps may be ISO-8601 or epoch
    seconds; the sampling interval is inferred from consecutive rows and
    must be constant to within one second.

    Parameters
    ----------
    path : str or Path
        CSV file to read.
    schema : dict, optional
        Column mapping with keys ``timestamp`` (column name of the time
        axis) and ``stations`` (names of the value columns to keep, in
        order). Defaults to first column = time, remaining columns =
        stations.

    Raises
    ------
    FileError, ParseError, SpacingError, InsufficientData
    """
    path = Path(path)
    if not path.is_file():
        raise FileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InsufficientData(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if schema:
            ts_col = header.index(schema.get("timestamp", header[0]))
            names = schema.get("stations") or [h for i, h in enumerate(header) if i != ts_col]
            station_cols = [header.index(n) for n in names]
        else:
            ts_col = 0
            names = header[1:]
            station_cols = list(range(1, len(header)))
        if not station_cols:
            raise InsufficientData(f"{path} has no station columns")

        times, rows = [], []
        for r, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            times.append(_parse_timestamp(record[ts_col], r))
            vals = []
            for c in station_cols:
                cell = record[c].strip() if c < len(record) else ""
                if not cell:
                    raise ParseError(r, c, "empty cell")
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(r, c, repr(cell)) from None
                if math.isnan(v):
                    raise ParseError(r, c, "NaN")
                vals.append(v)
            rows.append(vals)

    if len(rows) < 2:
        raise InsufficientData(f"{path} has {len(rows)} data rows; need at least 2")

    times = np.asarray(times)
    deltas = np.diff(times)
    tau = float(deltas[0])
    if tau <= 0:
        raise SpacingError("timestamps must be strictly increasing")
    if np.any(np.abs(deltas - tau) > SPACING_TOLERANCE_S):
        bad = int(np.argmax(np.abs(deltas - tau) > SPACING_TOLERANCE_S)) + 1
        raise SpacingError(
            f"non-uniform spacing at row {bad + 1}: delta {deltas[bad - 1]:g}s vs {tau:g}s")

    return LoadPanel(np.asarray(rows, float), tau, tuple(names), float(times[0]))


def write_csv(panel: LoadPanel, path) -> None:
    """Write a panel in the same layout :func:`load_csv` reads.

    Floats carry 17 significant digits so a round trip is value-stable.
    """
    ts = panel.timestamps()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *panel.station_ids])
        for i in range(panel.n_samples):
            writer.writerow([f"{ts[i]:.17g}"] + [f"{v:.17g}" for v in panel.values[i]])


def minmax_normalize(panel: LoadPanel, mode: str = "per-station"):
    """Min-max normalize a panel to [0, 1].

    ``mode='per-station'`` rescales each column by its own range;
    ``mode='global'`` uses a single range shared by all columns. Constant
    columns map to zero and are flagged in the returned stats rather than
    raising.

    Returns
    -------
    (LoadPanel, NormStats)
    """
    vals = panel.values
    if mode == "per-station":
        lo, hi = vals.min(axis=0), vals.max(axis=0)
    elif mode == "global":
        lo = np.full(panel.n_stations, vals.min())
        hi = np.full(panel.n_stations, vals.max())
    else:
        raise RangeError(f"unknown normalization mode {mode!r}")
    stats = NormStats(lo, hi)
    return panel.with_values(stats.apply(vals)), stats


def split(panel: LoadPanel, spec: SplitSpec):
    """Slice a panel into raw (unnormalized) train and test panels."""
    spec.validate(panel.n_samples)
    tau = panel.sample_interval_s
    parts = []
    for lo, hi in (spec.train_range, spec.test_range):
        parts.append(LoadPanel(panel.values[lo:hi], tau, panel.station_ids,
                               panel.start_timestamp + tau * lo))
    return tuple(parts)


def split_normalized(panel: LoadPanel, spec: SplitSpec, mode: str = "per-station"):
    """Split and normalize, with statistics taken from the training range only.

    Applying train-window statistics to both halves keeps the test window
    out of every fitted quantity downstream.

    Returns
    -------
    (LoadPanel, LoadPanel, NormStats)
        Normalized train panel, normalized test panel, and the stats that
        invert both.
    """
    train, test = split(panel, spec)
    train_n, stats = minmax_normalize(train, mode=mode)
    return train_n, test.with_values(stats.apply(test.values)), stats
