"""Building-telemetry pipeline: CSV ingestion, cleaning, 30-minute
aggregation, min-max scaling, valve labels, sliding windows, and training
sequences.

The canonical record is a TimeSeriesFrame: strictly increasing, evenly
spaced timestamps plus eight float64 columns. Temperatures/irradiance are
averaged when aggregating; energies are summed.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    InputError,
    IntegrityError,
    SchemaError,
    ShapeError,
)

log = logging.getLogger(__name__)

COLUMNS = ("oat", "orh", "wbt", "sol", "avg_stpt", "sat", "hwe", "cwe")
MEAN_COLUMNS = ("oat", "orh", "wbt", "sol", "avg_stpt", "sat")
SUM_COLUMNS = ("hwe", "cwe")
ENERGY_COLUMNS = SUM_COLUMNS

FIVE_MIN = np.timedelta64(5, "m")
THIRTY_MIN = np.timedelta64(30, "m")

SCALE_CLAMP_LO = -0.1
SCALE_CLAMP_HI = 1.1

LOOKBACK = 6


class TimeSeriesFrame:
    """Evenly spaced multivariate series with the fixed 8-column schema."""

    def __init__(self, timestamps, columns):
        timestamps = np.asarray(timestamps, dtype="datetime64[s]")
        if timestamps.ndim != 1 or timestamps.size == 0:
            raise InputError("timestamps must be a non-empty 1-D array")
        missing = [c for c in COLUMNS if c not in columns]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        self.timestamps = timestamps
        self.columns = {}
        for name in COLUMNS:
            arr = np.asarray(columns[name], dtype=np.float64)
            if arr.shape != timestamps.shape:
                raise ShapeError(f"column {name!r} length does not match timestamps")
            self.columns[name] = arr
        if timestamps.size > 1:
            deltas = np.diff(timestamps)
            if np.any(deltas <= np.timedelta64(0, "s")):
                idx = int(np.argmax(deltas <= np.timedelta64(0, "s")))
                raise IntegrityError(
                    f"timestamps not strictly increasing at row {idx + 1}"
                )
            if np.any(deltas != deltas[0]):
                idx = int(np.argmax(deltas != deltas[0]))
                raise IntegrityError(f"uneven sampling period at row {idx + 1}")
            self.period = deltas[0]
        else:
            self.period = None
        for name in ENERGY_COLUMNS:
            col = self.columns[name]
            if np.any(col < 0):
                idx = int(np.argmax(col < 0))
                raise IntegrityError(f"negative {name} at row {idx}")

    def __len__(self):
        return int(self.timestamps.size)

    def column(self, name):
        if name not in self.columns:
            raise SchemaError(f"unknown column {name!r}")
        return self.columns[name]

    def matrix(self, names=COLUMNS):
        return np.column_stack([self.columns[n] for n in names])

    def slice(self, start, stop):
        return TimeSeriesFrame(
            self.timestamps[start:stop],
            {n: v[start:stop] for n, v in self.columns.items()},
        )

    def copy(self):
        return TimeSeriesFrame(
            self.timestamps.copy(), {n: v.copy() for n, v in self.columns.items()}
        )

    def samples_per_week(self):
        if self.period is None:
            raise InputError("cannot derive a week length from one sample")
        week = np.timedelta64(7 * 24 * 60, "m")
        step = self.period.astype("timedelta64[m]")
        return int(week // step)


def ingest_csv(path):
    """Read and validate a telemetry CSV (header + ISO-8601 timestamps)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty CSV") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "timestamp":
            raise SchemaError("first column must be 'timestamp'")
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        index = {name: header.index(name) for name in COLUMNS}
        stamps, rows = [], []
        for lineno, row in enumerate(reader):
            if not row:
                continue
            try:
                stamps.append(np.datetime64(row[0]))
                rows.append([float(row[index[c]]) for c in COLUMNS])
            except (ValueError, IndexError) as exc:
                raise IntegrityError(f"bad value at data row {lineno}: {exc}") from None
    if not rows:
        raise SchemaError("CSV has a header but no data rows")
    data = np.asarray(rows, dtype=np.float64)
    return TimeSeriesFrame(
        np.asarray(stamps, dtype="datetime64[s]"),
        {name: data[:, i] for i, name in enumerate(COLUMNS)},
    )


def write_csv(frame, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("timestamp",) + COLUMNS)
        cols = [frame.columns[c] for c in COLUMNS]
        for i in range(len(frame)):
            stamp = np.datetime_as_string(frame.timestamps[i], unit="s")
            writer.writerow([stamp] + [repr(float(col[i])) for col in cols])


def remove_outliers(frame, k=2.0):
    """Replace samples beyond k sample-std-devs of the column mean.

    Replacement is linear interpolation between the nearest kept neighbours
    (edges hold the nearest kept value). Zero-variance columns and k=inf are
    no-ops. Returns a new frame.
    """
    if k <= 0:
        raise ConfigurationError("k must be positive")
    out = frame.copy()
    n = len(out)
    if n < 2:
        return out
    idx = np.arange(n, dtype=np.float64)
    for name in COLUMNS:
        col = out.columns[name]
        std = float(np.std(col, ddof=1))
        if std == 0.0 or not np.isfinite(std) or not np.isfinite(k):
            continue
        mean = float(np.mean(col))
        bad = np.abs(col - mean) > k * std
        if not bad.any() or bad.all():
            continue
        keep = ~bad
        col[bad] = np.interp(idx[bad], idx[keep], col[keep])
        if name in ENERGY_COLUMNS:
            np.clip(col, 0.0, None, out=col)
    return out


def aggregate_30min(frame):
    """Fold a 5-minute frame into 30-minute blocks aligned to half hours.

    Temperatures (and the set points / irradiance) average; energies sum.
    Leading samples before the first half-hour boundary and any partial
    trailing block are dropped with a logged warning.
    """
    if frame.period != FIVE_MIN:
        raise ConfigurationError("aggregate_30min expects a 5-minute frame")
    minutes = (
        frame.timestamps.astype("datetime64[m]")
        - frame.timestamps.astype("datetime64[h]").astype("datetime64[m]")
    ).astype(int)
    aligned = np.nonzero(minutes % 30 == 0)[0]
    if aligned.size == 0:
        raise InputError("no half-hour boundary in the frame")
    start = int(aligned[0])
    if start:
        log.warning("dropping %d leading samples before a half-hour boundary", start)
    usable = len(frame) - start
    blocks = usable // 6
    tail = usable - blocks * 6
    if tail:
        log.warning("dropping %d trailing samples of a partial 30-min block", tail)
    if blocks == 0:
        raise InputError("frame too short to form one 30-minute block")
    sel = slice(start, start + blocks * 6)
    stamps = frame.timestamps[sel][::6]
    out = {}
    for name in COLUMNS:
        grid = frame.columns[name][sel].reshape(blocks, 6)
        out[name] = grid.sum(axis=1) if name in SUM_COLUMNS else grid.mean(axis=1)
    return TimeSeriesFrame(stamps, out)


@dataclass
class ScalerParams:
    """Per-column min/max fitted on a training window."""

    bounds: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(
            {name: [repr(lo), repr(hi)] for name, (lo, hi) in self.bounds.items()},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        raw = json.loads(text)
        return cls({name: (float(lo), float(hi)) for name, (lo, hi) in raw.items()})


def fit_scaler(frame, train_range=None):
    """Min-max bounds per column over the training rows only."""
    if train_range is None:
        start, stop = 0, len(frame)
    else:
        start, stop = train_range
    if stop <= start:
        raise InputError("empty training range")
    bounds = {}
    for name in COLUMNS:
        col = frame.columns[name][start:stop]
        bounds[name] = (float(np.min(col)), float(np.max(col)))
    return ScalerParams(bounds)


def scale_values(values, column, scaler):
    """Scale raw values of one column into [0,1], clamped to [-0.1, 1.1]."""
    lo, hi = scaler.bounds[column]
    values = np.asarray(values, dtype=np.float64)
    if hi == lo:
        scaled = np.zeros_like(values)
    else:
        scaled = (values - lo) / (hi - lo)
    return np.clip(scaled, SCALE_CLAMP_LO, SCALE_CLAMP_HI)


def unscale_values(values, column, scaler):
    lo, hi = scaler.bounds[column]
    values = np.asarray(values, dtype=np.float64)
    return lo + values * (hi - lo)


def apply_scaler(frame, scaler):
    """Return the frame's column matrix scaled column-wise (rows x 8)."""
    return np.column_stack(
        [scale_values(frame.columns[name], name, scaler) for name in COLUMNS]
    )


def derive_valve_labels(frame):
    """Heating valve state: 1 wherever any heating energy was consumed."""
    return (frame.columns["hwe"] > 0.0).astype(np.int64)


@dataclass
class WindowSpec:
    train_weeks: int = 13
    eval_weeks: int = 1
    stride_weeks: int = 1

    def __post_init__(self):
        if self.train_weeks < 1 or self.eval_weeks < 1 or self.stride_weeks < 1:
            raise ConfigurationError("window lengths must be positive")


@dataclass
class Window:
    index: int
    train: slice
    eval: slice


def make_windows(frame, spec):
    """Sliding train/eval windows over a 30-minute frame, in samples.

    Window k trains on [k*stride, k*stride + train) and evaluates on the
    following eval span. Raises when not even one window fits.
    """
    per_week = frame.samples_per_week()
    train_n = spec.train_weeks * per_week
    eval_n = spec.eval_weeks * per_week
    stride_n = spec.stride_weeks * per_week
    total = len(frame)
    windows = []
    k = 0
    while k * stride_n + train_n + eval_n <= total:
        start = k * stride_n
        windows.append(
            Window(
                index=k,
                train=slice(start, start + train_n),
                eval=slice(start + train_n, start + train_n + eval_n),
            )
        )
        k += 1
    if not windows:
        raise ConfigurationError(
            f"dataset has {total} samples but one window needs "
            f"{train_n + eval_n} (train {spec.train_weeks}w + eval {spec.eval_weeks}w)"
        )
    return windows


@dataclass
class SequenceDataset:
    """Fixed-length input sequences and their next-interval targets.

    inputs: (n, lookback, 8) scaled feature rows; targets: (n,); rows: the
    frame row index of each target (target timestamp = last input + 30 min).
    """

    inputs: np.ndarray
    targets: np.ndarray
    rows: np.ndarray

    def __len__(self):
        return int(self.targets.size)


def make_sequences(frame, scaler, target, lookback=LOOKBACK, valve_gated=None):
    """Build (sequence, target) pairs from a 30-minute frame slice.

    target is one of "hwe", "cwe", "valve". Inputs are the scaled 8-column
    rows strictly before the target row. Energy targets are scaled; valve
    targets are 0/1 labels. valve_gated (default: True for "hwe") drops
    pairs whose target-interval valve label is 0, matching the heating
    model's train-on-contiguous-heating rule.
    """
    if target not in ("hwe", "cwe", "valve"):
        raise InputError(f"unknown sequence target {target!r}")
    if valve_gated is None:
        valve_gated = target == "hwe"
    n = len(frame)
    if n < lookback + 1:
        log.warning("slice of %d rows is too short for lookback %d", n, lookback)
        return SequenceDataset(
            np.zeros((0, lookback, len(COLUMNS))),
            np.zeros(0),
            np.zeros(0, dtype=np.int64),
        )
    scaled = apply_scaler(frame, scaler)
    labels = derive_valve_labels(frame)
    rows = np.arange(lookback, n)
    if valve_gated:
        rows = rows[labels[rows] == 1]
    inputs = np.stack([scaled[r - lookback:r] for r in rows]) if rows.size else (
        np.zeros((0, lookback, len(COLUMNS)))
    )
    if target == "valve":
        targets = labels[rows].astype(np.float64)
    else:
        targets = scale_values(frame.columns[target][rows], target, scaler)
    return SequenceDataset(inputs, targets, rows)
