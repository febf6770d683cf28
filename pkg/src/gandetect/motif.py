"""Motif variant: cluster windows, then train and select one discriminator per cluster."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .detector import KdeConfig, DetectionReport, as_windows, fake_scores, report_from_scores
from .nn import Network
from .selection import DegenerateSelectionError, SelectionResult, select_discriminator
from .timeseries import TimeSeries, extract_windows

METRICS = ("euclidean", "dtw")


class MotifError(RuntimeError):
    """Failure tied to one cluster; ``cluster`` holds its index."""

    def __init__(self, cluster: int, message: str):
        super().__init__(f"cluster {cluster}: {message}")
        self.cluster = cluster


def dtw_distance(a, b) -> float:
    """DTW with squared local cost and unit steps, no warping window; square root of the total."""
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("dtw needs non-empty vectors")
    return float(np.sqrt(_kernels.dtw_distance_sq(a, b)))


def _sq_dists(rows: np.ndarray, centroids: np.ndarray, metric: str, chunk: int = 2048) -> np.ndarray:
    if metric == "dtw":
        return _kernels.dtw_all(np.ascontiguousarray(rows), np.ascontiguousarray(centroids))
    out = np.empty((len(rows), len(centroids)))
    for i in range(0, len(rows), chunk):
        diff = rows[i:i + chunk, None, :] - centroids[None, :, :]
        out[i:i + chunk] = np.einsum("nkw,nkw->nk", diff, diff)
    return out


@dataclass
class ClusterModel:
    centroids: np.ndarray
    metric: str
    sizes: np.ndarray
    labels: np.ndarray = field(repr=False)
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def iterations(self) -> int:
        return len(self.inertia_history)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "k": self.k, "sizes": [int(s) for s in self.sizes],
                "iterations": self.iterations,
                "inertia_history": [float(v) for v in self.inertia_history],
                "centroids": [[float(v) for v in c] for c in self.centroids]}

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        return cls(np.array(d["centroids"], dtype=np.float64), d["metric"],
                   np.array(d["sizes"], dtype=np.int64), np.zeros(0, dtype=np.int64),
                   list(d.get("inertia_history", [])))

    @classmethod
    def load(cls, path) -> "ClusterModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _kmeans_pp(rows: np.ndarray, k: int, metric: str, rng: np.random.Generator) -> np.ndarray:
    n = len(rows)
    chosen = [int(rng.integers(n))]
    best = _sq_dists(rows, rows[chosen], metric)[:, 0]
    for _ in range(1, k):
        w = best.copy()
        w[chosen] = 0.0
        total = w.sum()
        if total > 0:
            idx = int(rng.choice(n, p=w / total))
        else:
            # every remaining point coincides with a centre
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        best = np.minimum(best, _sq_dists(rows, rows[[idx]], metric)[:, 0])
    return rows[chosen].copy()


def dba(members: np.ndarray, iterations: int = 10, init: np.ndarray | None = None) -> np.ndarray:
    """DTW barycenter averaging, starting from the arithmetic mean unless ``init`` is given."""
    members = np.ascontiguousarray(members, dtype=np.float64)
    center = members.mean(axis=0) if init is None else np.array(init, dtype=np.float64)
    for _ in range(iterations):
        sums = np.zeros_like(center)
        counts = np.zeros(len(center))
        _kernels.dba_accumulate(center, members, sums, counts)
        center = sums / counts
    return center


def kmeans_fit(windows, k: int, metric: str = "euclidean", seed: int = 0, max_iter: int = 100,
               dba_iterations: int = 10) -> ClusterModel:
    """Lloyd iterations from a seeded k-means++ start.

    Stops when assignments repeat or after ``max_iter`` assignment steps. An
    empty cluster is re-seeded with the point farthest from its own centroid.
    """
    rows = np.ascontiguousarray(getattr(windows, "rows", windows), dtype=np.float64)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if not 1 <= k <= len(rows):
        raise ValueError(f"need 1 <= k <= number of windows ({len(rows)}), got {k}")
    rng = np.random.default_rng([seed, 40])
    centroids = _kmeans_pp(rows, k, metric, rng)
    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        dist = _sq_dists(rows, centroids, metric)
        new = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(len(rows)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        own = dist[np.arange(len(rows)), labels]
        taken: set[int] = set()
        for c in range(k):
            members = rows[labels == c]
            if len(members) == 0:
                order = np.argsort(-own, kind="stable")
                idx = next(int(i) for i in order if int(i) not in taken)
                taken.add(idx)
                centroids[c] = rows[idx]
            elif metric == "euclidean":
                centroids[c] = members.mean(axis=0)
            else:
                centroids[c] = dba(members, dba_iterations)
    sizes = np.bincount(labels, minlength=k)
    return ClusterModel(centroids, metric, sizes, labels, history)


def assign_many(model: ClusterModel, rows) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.centroids.shape[1]:
        raise ValueError(f"windows must have length {model.centroids.shape[1]}")
    return np.argmin(_sq_dists(rows, model.centroids, model.metric), axis=1)


def assign_cluster(model: ClusterModel, window) -> int:
    """Nearest centroid; the lowest index wins ties."""
    return int(assign_many(model, np.asarray(window, dtype=np.float64)[None, :])[0])


@dataclass
class MotifDetector:
    clusters: ClusterModel
    detectors: list[Network]
    selections: list[SelectionResult] = field(default_factory=list)
    runs: list = field(default_factory=list, repr=False)

    @property
    def wl(self) -> int:
        return self.detectors[0].wl


def _train_cluster(args):
    from .training import train_gan, stop_when_infinite

    c, members, val_rows, config, stop_early = args
    hook = stop_when_infinite if stop_early else None
    series = train_gan(members, val_rows, config, selection_hook=hook)
    try:
        sel = select_discriminator(series)
    except DegenerateSelectionError as e:
        raise MotifError(c, str(e)) from None
    return series, sel


def motif_train(train_windows, validation_series, k: int = 5, metric: str = "euclidean", config=None,
                stop_early: bool = False, jobs: int = 1) -> MotifDetector:
    """Cluster the training windows and fit one GAN per cluster (seed offset by cluster index).

    Validation windows are routed to clusters by nearest centroid, so each
    cluster's N/A ratio only sees windows it would score at test time.
    """
    from .training import GanConfig

    config = config or GanConfig()
    rows = as_windows(train_windows, config.wl)
    model = kmeans_fit(rows, k, metric, seed=config.seed)
    val_rows = as_windows(validation_series, config.wl)
    val_labels = assign_many(model, val_rows)
    tasks = []
    for c in range(model.k):
        members = rows[model.labels == c]
        if len(members) < 2 * config.batch_size:
            raise MotifError(c, f"cluster too small ({len(members)} windows, need {2 * config.batch_size})")
        val_c = val_rows[val_labels == c]
        if len(val_c) == 0:
            raise MotifError(c, "no validation windows assigned")
        tasks.append((c, members, val_c, replace(config, seed=config.seed + c), stop_early))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_cluster, tasks))
    else:
        results = [_train_cluster(t) for t in tasks]
    return MotifDetector(model, [sel.params for _, sel in results], [sel for _, sel in results],
                         [series for series, _ in results])


def motif_scores(md: MotifDetector, rows: np.ndarray) -> np.ndarray:
    labels = assign_many(md.clusters, rows)
    scores = np.empty(len(rows))
    for c, d in enumerate(md.detectors):
        mask = labels == c
        if mask.any():
            scores[mask] = fake_scores(d, rows[mask])
    return scores


def motif_detect(md: MotifDetector, test: TimeSeries, kde: KdeConfig | None = None) -> DetectionReport:
    kde = kde or KdeConfig()
    if len(test) < md.wl:
        raise ValueError(f"series shorter than window ({len(test)} < {md.wl})")
    rows = extract_windows(test, md.wl).rows
    return report_from_scores(motif_scores(md, rows), md.wl, test, kde)
