"""Discriminator selection from checkpoints and the learning-rate grid search."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .detector import KdeConfig, as_windows, detect, fake_scores, SCORE_THRESHOLD
from .nn import DivergedError, Network

DEFAULT_G_LRS = (1e-4, 5e-4, 1e-3, 2e-3, 6e-3)
DEFAULT_D_LRS = (1e-4, 5e-4)
GRID_EPOCHS = 50


class DegenerateSelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class NaRatio:
    normal_count: int
    anomalous_count: int

    @property
    def value(self) -> float:
        """Normal/anomalous count ratio; ``math.inf`` when nothing is flagged."""
        if self.anomalous_count == 0:
            return math.inf
        return self.normal_count / self.anomalous_count

    @property
    def total(self) -> int:
        return self.normal_count + self.anomalous_count


def na_ratio(d: Network, clean_series) -> NaRatio:
    rows = as_windows(clean_series, d.wl)
    flagged = int((fake_scores(d, rows) > SCORE_THRESHOLD).sum())
    return NaRatio(len(rows) - flagged, flagged)


@dataclass
class SelectionResult:
    epoch: int
    params: Network
    mode: str
    score: float


def select_discriminator(checkpoints, mode: str = "unlabeled_na", *, labeled_series=None,
                         labels=None, r_t: float = 100.0, kde: KdeConfig | None = None) -> SelectionResult:
    """Pick a checkpoint.

    ``unlabeled_na``: highest finite N/A ratio, earliest epoch on ties.
    ``labeled_f1``: highest F1 of the full detection pipeline on a labeled series.
    """
    records = sorted(getattr(checkpoints, "records", checkpoints), key=lambda r: r.epoch)
    if not records:
        raise ValueError("no checkpoints to select from")
    if mode == "unlabeled_na":
        finite = [r for r in records if math.isfinite(r.na.value)]
        if not finite:
            raise DegenerateSelectionError(
                "degenerate: every checkpoint predicts all-normal; retune learning rates")
        best = max(finite, key=lambda r: (r.na.value, -r.epoch))
        return SelectionResult(best.epoch, best.params, mode, best.na.value)
    if mode == "labeled_f1":
        from .evaluation import match_and_score

        if labeled_series is None or labels is None:
            raise ValueError("labeled_f1 selection needs a labeled series and its labels")
        scored = []
        for r in records:
            report = detect(r.params, labeled_series, kde)
            ev = match_and_score(labels, report.predicted_anomalies, r_t)
            scored.append((0.0 if ev.f1 is None else ev.f1, -r.epoch, r))
        f1, _, best = max(scored, key=lambda t: (t[0], t[1]))
        return SelectionResult(best.epoch, best.params, mode, f1)
    raise ValueError(f"unknown selection mode {mode!r}")


@dataclass
class GridRow:
    g_lr: float
    d_lr: float
    na_ratio: float
    selected: bool = False


@dataclass
class GridSearchResult:
    rows: list[GridRow]

    @property
    def best(self) -> tuple[float, float]:
        for r in self.rows:
            if r.selected:
                return r.g_lr, r.d_lr
        raise DegenerateSelectionError("no pair selected")

    def to_csv(self) -> str:
        lines = ["g_lr,d_lr,na_ratio_at_50,selected"]
        for r in self.rows:
            ratio = "inf" if math.isinf(r.na_ratio) else ("nan" if math.isnan(r.na_ratio) else format(r.na_ratio, ".17g"))
            lines.append(f"{r.g_lr:g},{r.d_lr:g},{ratio},{int(r.selected)}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path


def pick_best_pair(rows: list[GridRow]) -> GridSearchResult:
    """Mark the row with the highest finite ratio (first in grid order on ties)."""
    finite = [i for i, r in enumerate(rows) if math.isfinite(r.na_ratio)]
    if not finite:
        table = "\n".join(f"  g_lr={r.g_lr:g} d_lr={r.d_lr:g}: {r.na_ratio}" for r in rows)
        raise DegenerateSelectionError(f"no learning-rate pair has a finite N/A ratio:\n{table}")
    best = max(finite, key=lambda i: (rows[i].na_ratio, -i))
    rows = [replace(r, selected=(i == best)) for i, r in enumerate(rows)]
    return GridSearchResult(rows)


def _grid_job(args) -> float:
    from .training import train_gan

    train_windows, validation, config, epochs = args
    try:
        series = train_gan(train_windows, validation, config)
    except DivergedError:
        return math.nan
    try:
        return series.at_epoch(epochs).na.value
    except KeyError:
        return math.nan


def grid_search_lr(train_windows, validation_series, base_config, g_lr_grid=DEFAULT_G_LRS,
                   d_lr_grid=DEFAULT_D_LRS, epochs: int = GRID_EPOCHS, jobs: int = 1) -> GridSearchResult:
    """Train one GAN per (g_lr, d_lr) pair and keep the best finite N/A ratio at ``epochs``."""
    if not g_lr_grid or not d_lr_grid:
        raise ValueError("learning-rate grids must be non-empty")
    interval = min(base_config.checkpoint_interval, epochs)
    pairs = [(g, d) for g in g_lr_grid for d in d_lr_grid]
    jobs_args = [(train_windows, validation_series,
                  replace(base_config, g_lr=g, d_lr=d, max_epochs=epochs, checkpoint_interval=interval),
                  epochs) for g, d in pairs]
    if jobs > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            ratios = list(pool.map(_grid_job, jobs_args))
    else:
        ratios = [_grid_job(a) for a in jobs_args]
    return pick_best_pair([GridRow(g, d, r) for (g, d), r in zip(pairs, ratios)])
