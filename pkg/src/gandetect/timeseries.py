"""Positioned scalar series, CSV I/O and stride-1 zero-mean windowing."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPACING_RTOL = 1e-9


class SeriesFormatError(ValueError):
    """Raised for malformed series or label files."""


@dataclass(frozen=True)
class TimeSeries:
    positions: np.ndarray
    values: np.ndarray
    segment_id: str = ""
    inspection_id: str = ""

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        val = np.asarray(self.values, dtype=np.float64)
        if pos.ndim != 1 or val.shape != pos.shape:
            raise ValueError("positions and values must be 1-D arrays of equal length")
        if len(pos) < 2:
            raise ValueError("series needs at least 2 samples")
        steps = np.diff(pos)
        step = steps[0]
        if step <= 0 or np.any(steps <= 0):
            raise ValueError("positions must be strictly increasing")
        if np.any(np.abs(steps - step) > SPACING_RTOL * max(abs(step), np.max(np.abs(pos)))):
            raise ValueError("non-uniform spacing in positions")
        pos.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def spacing(self) -> float:
        return float(self.positions[1] - self.positions[0])

    def shifted(self, delta: float) -> "TimeSeries":
        return TimeSeries(self.positions + delta, self.values, self.segment_id, self.inspection_id)


@dataclass(frozen=True)
class WindowMatrix:
    """Stride-1 windows, each with its own mean removed.

    ``rows[i]`` is ``values[i:i + wl] - mean(values[i:i + wl])`` of the source series.
    """

    rows: np.ndarray
    wl: int
    start_indices: np.ndarray = field(default=None)
    source: str = ""

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.wl:
            raise ValueError(f"rows must have shape (N, {self.wl})")
        starts = self.start_indices
        if starts is None:
            starts = np.arange(len(rows))
        starts = np.asarray(starts, dtype=np.int64)
        if starts.shape != (len(rows),):
            raise ValueError("start_indices must match the number of rows")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "start_indices", starts)

    def __len__(self) -> int:
        return len(self.rows)

    def subset(self, idx) -> "WindowMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return WindowMatrix(self.rows[idx], self.wl, self.start_indices[idx], self.source)


@dataclass(frozen=True)
class LabeledAnomalies:
    positions: tuple[float, ...]
    segment_id: str = ""
    inspection_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(float(p) for p in self.positions))

    def __len__(self) -> int:
        return len(self.positions)

    def check_within(self, series: TimeSeries) -> None:
        lo, hi = series.positions[0], series.positions[-1]
        bad = [p for p in self.positions if not lo <= p <= hi]
        if bad:
            raise ValueError(f"anomaly positions outside series span [{lo}, {hi}]: {bad}")


def zero_mean(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    return rows - rows.mean(axis=-1, keepdims=True)


def extract_windows(series: TimeSeries, wl: int) -> WindowMatrix:
    if wl < 1:
        raise ValueError("window length must be positive")
    if wl > len(series):
        raise ValueError(f"series shorter than window ({len(series)} < {wl})")
    view = np.lib.stride_tricks.sliding_window_view(series.values, wl)
    label = f"{series.segment_id}_{series.inspection_id}".strip("_")
    return WindowMatrix(zero_mean(view), wl, np.arange(len(view)), label)


def window_midpoint(start_index: int, wl: int, series: TimeSeries) -> float:
    n = len(series) - wl + 1
    if not 0 <= start_index < n:
        raise IndexError(f"window start {start_index} out of range [0, {n})")
    return float(series.positions[start_index + wl // 2])


def window_midpoints(start_indices, wl: int, series: TimeSeries) -> np.ndarray:
    starts = np.asarray(start_indices, dtype=np.int64)
    n = len(series) - wl + 1
    if starts.size and (starts.min() < 0 or starts.max() >= n):
        raise IndexError(f"window start out of range [0, {n})")
    return series.positions[starts + wl // 2]


def _fmt(x: float) -> str:
    # %.17g round-trips every float64 exactly
    return format(float(x), ".17g")


def save_series(series: TimeSeries, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("position,value\n")
        for p, v in zip(series.positions, series.values):
            fh.write(f"{_fmt(p)},{_fmt(v)}\n")


def load_series(path, segment_id: str | None = None, inspection_id: str | None = None) -> TimeSeries:
    path = Path(path)
    if segment_id is None or inspection_id is None:
        seg, _, insp = path.stem.rpartition("_")
        segment_id = seg if segment_id is None else segment_id
        inspection_id = insp if inspection_id is None else inspection_id
    positions, values = [], []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["position", "value"]:
            raise SeriesFormatError(f"{path}:1: expected header 'position,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SeriesFormatError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                positions.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError:
                raise SeriesFormatError(f"{path}:{lineno}: cannot parse {row!r}") from None
    try:
        return TimeSeries(np.array(positions), np.array(values), segment_id, inspection_id)
    except ValueError as exc:
        raise SeriesFormatError(f"{path}: {exc}") from None


def save_labels(labels: LabeledAnomalies, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("position\n")
        for p in labels.positions:
            fh.write(f"{_fmt(p)}\n")


def load_labels(path, segment_id: str = "", inspection_id: str = "") -> LabeledAnomalies:
    path = Path(path)
    out = []
    with path.open(encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "position":
        raise SeriesFormatError(f"{path}:1: expected header 'position'")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            out.append(float(line))
        except ValueError:
            raise SeriesFormatError(f"{path}:{lineno}: cannot parse {line!r}") from None
    return LabeledAnomalies(tuple(out), segment_id, inspection_id)
