"""Score windows with a discriminator and localise anomalies with a Gaussian KDE."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .nn import Network, predict
from .timeseries import TimeSeries, WindowMatrix, extract_windows, window_midpoints

SCORE_THRESHOLD = 0.5
HIST_BINS = 21


@dataclass(frozen=True)
class KdeConfig:
    bandwidth: float = 50.0
    kernel: str = "gaussian"
    # fixed peak-height threshold; None derives it from the density histogram
    threshold: float | None = None
    grid: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel != "gaussian":
            raise ValueError(f"unsupported kernel {self.kernel!r}")


@dataclass
class WindowScores:
    scores: np.ndarray
    flagged_starts: np.ndarray
    flagged_midpoints: np.ndarray


@dataclass
class DetectionReport:
    flagged_midpoints: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    peak_threshold: float | None
    predicted_anomalies: np.ndarray
    d_scores: np.ndarray
    wl: int = 0
    bandwidth: float = 50.0
    segment_id: str = ""
    inspection_id: str = ""

    def to_dict(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "inspection_id": self.inspection_id,
            "wl": self.wl,
            "bandwidth": self.bandwidth,
            "peak_threshold": self.peak_threshold,
            "predicted_anomalies": [float(x) for x in self.predicted_anomalies],
            "flagged_midpoints": [float(x) for x in self.flagged_midpoints],
            "grid": [float(x) for x in self.grid],
            "density": [float(x) for x in self.density],
            "d_scores": [float(x) for x in self.d_scores],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionReport":
        return cls(
            flagged_midpoints=np.array(d["flagged_midpoints"], dtype=float),
            grid=np.array(d["grid"], dtype=float),
            density=np.array(d["density"], dtype=float),
            peak_threshold=d["peak_threshold"],
            predicted_anomalies=np.array(d["predicted_anomalies"], dtype=float),
            d_scores=np.array(d["d_scores"], dtype=float),
            wl=d.get("wl", 0),
            bandwidth=d.get("bandwidth", 50.0),
            segment_id=d.get("segment_id", ""),
            inspection_id=d.get("inspection_id", ""),
        )

    @classmethod
    def load(cls, path) -> "DetectionReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fake_scores(d: Network, rows) -> np.ndarray:
    """Unit-1 (fake) sigmoid output for each window."""
    return predict(d, rows)[:, 1]


def as_windows(data, wl: int) -> np.ndarray:
    """Window rows from a TimeSeries, a WindowMatrix or a plain (N, wl) array."""
    if isinstance(data, TimeSeries):
        return extract_windows(data, wl).rows
    if isinstance(data, WindowMatrix):
        if data.wl != wl:
            raise ValueError(f"window length {data.wl} does not match discriminator wl {wl}")
        return data.rows
    rows = np.asarray(data, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != wl:
        raise ValueError(f"expected windows of shape (N, {wl})")
    return rows


def score_windows(d: Network, test: TimeSeries) -> WindowScores:
    if len(test) < d.wl:
        raise ValueError(f"series shorter than window ({len(test)} < {d.wl})")
    scores = fake_scores(d, extract_windows(test, d.wl).rows)
    return scores_to_flags(scores, d.wl, test)


def scores_to_flags(scores: np.ndarray, wl: int, test: TimeSeries) -> WindowScores:
    starts = np.flatnonzero(scores > SCORE_THRESHOLD)
    return WindowScores(scores, starts, window_midpoints(starts, wl, test))


def kde_density(flagged, grid, bandwidth: float = 50.0, chunk: int = 2048) -> np.ndarray:
    """Gaussian KDE of ``flagged`` positions evaluated at ``grid``."""
    x = np.asarray(flagged, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if len(x) == 0:
        return np.zeros(0)
    h = float(bandwidth)
    norm = 1.0 / (len(x) * h * math.sqrt(2.0 * math.pi))
    out = np.empty(len(grid))
    for i in range(0, len(grid), chunk):
        u = (grid[i:i + chunk, None] - x[None, :]) / h
        out[i:i + chunk] = np.exp(-0.5 * u * u).sum(axis=1) * norm
    return out


def peak_threshold(density) -> float:
    """Lower edge of the middle bin of a 21-bin histogram over the density's value range."""
    density = np.asarray(density, dtype=np.float64)
    if density.size == 0:
        raise ValueError("empty density")
    lo, hi = float(density.min()), float(density.max())
    return lo + (HIST_BINS // 2) * (hi - lo) / HIST_BINS


def find_peaks(density, min_height: float) -> np.ndarray:
    """Indices of strict local maxima with value >= ``min_height``.

    A flat-topped maximum is reported once, at its left edge. Endpoints never qualify.
    """
    density = np.asarray(density, dtype=np.float64)
    if density.size < 3:
        return np.zeros(0, dtype=np.int64)
    _, props = signal.find_peaks(density, plateau_size=1)
    left = props["left_edges"]
    return left[density[left] >= min_height].astype(np.int64)


def report_from_scores(scores: np.ndarray, wl: int, test: TimeSeries, kde: KdeConfig) -> DetectionReport:
    flags = scores_to_flags(scores, wl, test)
    grid = test.positions if kde.grid is None else np.asarray(kde.grid, dtype=np.float64)
    common = dict(d_scores=scores, wl=wl, bandwidth=kde.bandwidth,
                  segment_id=test.segment_id, inspection_id=test.inspection_id)
    if len(flags.flagged_midpoints) == 0:
        return DetectionReport(flags.flagged_midpoints, np.zeros(0), np.zeros(0), None,
                               np.zeros(0), **common)
    density = kde_density(flags.flagged_midpoints, grid, kde.bandwidth)
    thr = peak_threshold(density) if kde.threshold is None else float(kde.threshold)
    peaks = find_peaks(density, thr)
    return DetectionReport(flags.flagged_midpoints, grid, density, thr, grid[peaks], **common)


def detect(d: Network, test: TimeSeries, kde: KdeConfig | None = None) -> DetectionReport:
    kde = kde or KdeConfig()
    if len(test) < d.wl:
        raise ValueError(f"series shorter than window ({len(test)} < {d.wl})")
    scores = fake_scores(d, extract_windows(test, d.wl).rows)
    return report_from_scores(scores, d.wl, test, kde)
