"""Per-segment train / select / detect / evaluate over a repeated-inspection dataset."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .detector import SCORE_THRESHOLD, DetectionReport, KdeConfig, detect, fake_scores
from .evaluation import DEFAULT_TOLERANCES, AggregateReport, EvalReport, aggregate, match_and_score
from .motif import motif_detect, motif_train
from .selection import (DEFAULT_D_LRS, DEFAULT_G_LRS, GRID_EPOCHS, GridSearchResult, grid_search_lr,
                        select_discriminator)
from .synth import SineSpec, TrackDataset, gen_line_set, gen_sine_set
from .timeseries import LabeledAnomalies, TimeSeries, extract_windows
from .training import GanConfig, stop_when_infinite, train_gan


@dataclass(frozen=True)
class PipelineConfig:
    gan: GanConfig = field(default_factory=GanConfig)
    bandwidth: float = 50.0
    grid_search: bool = True
    g_lr_grid: tuple[float, ...] = DEFAULT_G_LRS
    d_lr_grid: tuple[float, ...] = DEFAULT_D_LRS
    grid_epochs: int = GRID_EPOCHS
    # stop a final training run once the validation series is entirely normal
    stop_early: bool = True
    clusters: int = 1
    metric: str = "euclidean"
    selection: str = "unlabeled_na"
    tolerances: tuple[float, ...] = DEFAULT_TOLERANCES
    jobs: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gan"] = self.gan.to_dict()
        return d


@dataclass
class SegmentRun:
    segment_id: str
    inspection_id: str
    selected_epoch: int | list[int]
    report: DetectionReport
    evals: dict[float, EvalReport]
    seconds: float = 0.0


@dataclass
class TrackResult:
    lrs: tuple[float, float]
    grid: GridSearchResult | None
    runs: list[SegmentRun]
    seconds: float = 0.0

    def aggregate(self, r_t: float) -> AggregateReport:
        return aggregate([r.evals[r_t] for r in self.runs])


def tune_lrs(train: TimeSeries, validation: TimeSeries, config: PipelineConfig) -> GridSearchResult:
    windows = extract_windows(train, config.gan.wl)
    return grid_search_lr(windows, validation, config.gan, config.g_lr_grid, config.d_lr_grid,
                          epochs=config.grid_epochs, jobs=config.jobs)


def run_segment(train: TimeSeries, validation: TimeSeries, tests: list[tuple[TimeSeries, LabeledAnomalies]],
                config: PipelineConfig) -> list[SegmentRun]:
    """Train on one clean inspection, select on another, then score every labeled inspection."""
    t0 = time.perf_counter()
    gan = config.gan
    kde = KdeConfig(bandwidth=config.bandwidth)
    windows = extract_windows(train, gan.wl)
    hook = stop_when_infinite if config.stop_early else None
    if config.clusters > 1:
        md = motif_train(windows, validation, config.clusters, config.metric, gan,
                         stop_early=config.stop_early, jobs=config.jobs)
        epoch = [s.epoch for s in md.selections]
        run_detect = lambda s: motif_detect(md, s, kde)  # noqa: E731
    else:
        series = train_gan(windows, validation, gan, selection_hook=hook)
        if config.selection == "labeled_f1":
            if len(tests) != 1:
                raise ValueError("labeled selection needs exactly one labeled inspection")
            sel = select_discriminator(series, "labeled_f1", labeled_series=tests[0][0],
                                       labels=tests[0][1], r_t=config.tolerances[0], kde=kde)
        else:
            sel = select_discriminator(series, config.selection)
        epoch = sel.epoch
        run_detect = lambda s: detect(sel.params, s, kde)  # noqa: E731
    out = []
    for test, labels in tests:
        report = run_detect(test)
        evals = {r: match_and_score(labels, report.predicted_anomalies, r) for r in config.tolerances}
        out.append(SegmentRun(test.segment_id, test.inspection_id, epoch, report, evals))
    elapsed = time.perf_counter() - t0
    for r in out:
        r.seconds = elapsed / len(out)
    return out


def run_track(ds: TrackDataset, config: PipelineConfig, lrs: tuple[float, float] | None = None,
              progress: Callable[[str], None] | None = None) -> TrackResult:
    """Full pipeline over every segment of a track dataset.

    Learning rates come from ``lrs`` when given, else from a grid search on the
    first segment (reused for the others). The first clean inspection trains,
    the second validates; every labeled inspection is a test series.
    """
    t0 = time.perf_counter()
    clean = ds.clean_inspections()
    labeled = ds.labeled_inspections()
    if len(clean) < 2:
        raise ValueError("need two clean inspections (train and validation)")
    if not labeled:
        raise ValueError("no labeled inspection to test on")
    train_id, val_id = clean[0], clean[1]
    segments = ds.spec.segments
    grid = None
    if lrs is None:
        if not config.grid_search:
            lrs = (config.gan.g_lr, config.gan.d_lr)
        else:
            ref = segments[0]
            grid = tune_lrs(ds.series[(ref, train_id)], ds.series[(ref, val_id)], config)
            lrs = grid.best
            if progress:
                progress(f"grid search on {ref}: g_lr={lrs[0]:g} d_lr={lrs[1]:g}")
    seg_config = replace(config, gan=replace(config.gan, g_lr=lrs[0], d_lr=lrs[1]))
    runs: list[SegmentRun] = []
    for seg in segments:
        tests = [(ds.series[(seg, i)], ds.labels.get((seg, i), LabeledAnomalies((), seg, i))) for i in labeled]
        seg_runs = run_segment(ds.series[(seg, train_id)], ds.series[(seg, val_id)], tests, seg_config)
        runs.extend(seg_runs)
        if progress:
            for r in seg_runs:
                ev = r.evals[max(config.tolerances)]
                progress(f"{seg}_{r.inspection_id}: epoch {r.selected_epoch}, "
                         f"{len(r.report.predicted_anomalies)} predictions, tp={ev.tp} fn={ev.fn} fp={ev.fp}")
    return TrackResult(lrs, grid, runs, time.perf_counter() - t0)


@dataclass
class SineBenchmarkResult:
    mode: str
    seed: int
    selected_epoch: int
    epochs_trained: int
    tp: int
    fp: int
    fn: int
    seconds: float

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0


def run_sine_benchmark(mode: str = "clustered", seed: int = 0, config: GanConfig | None = None,
                       train_count: int = 2000, test_sines: int = 500, test_lines: int = 50,
                       validation_count: int = 5000, stop_early: bool = False) -> SineBenchmarkResult:
    """Train on sine windows, select by N/A on held-out sines, classify sines vs lines.

    Each wave is one window; lines are the anomaly class and counted per window.
    The validation set is large because the best finite N/A ratio is typically
    set by one or two flagged windows, so its size bounds how small a
    false-positive rate selection can tell apart.
    """
    t0 = time.perf_counter()
    gan = config or GanConfig(max_epochs=500)
    gan = replace(gan, seed=seed)
    if mode not in ("clustered", "dispersed"):
        raise ValueError(f"unknown sine mode {mode!r}")
    make = SineSpec.clustered if mode == "clustered" else SineSpec.dispersed
    train = gen_sine_set(make(train_count, gan.wl, seed=seed)).rows
    validation = gen_sine_set(make(validation_count, gan.wl, seed=seed + 1000)).rows
    sines = gen_sine_set(make(test_sines, gan.wl, seed=seed + 2000)).rows
    lines = gen_line_set(test_lines, gan.wl, seed=seed)
    series = train_gan(train, validation, gan, selection_hook=stop_when_infinite if stop_early else None)
    sel = select_discriminator(series)
    flags_s = fake_scores(sel.params, sines) > SCORE_THRESHOLD
    flags_l = fake_scores(sel.params, lines) > SCORE_THRESHOLD
    tp = int(np.count_nonzero(flags_l))
    return SineBenchmarkResult(mode, seed, sel.epoch, len(series.log), tp, int(np.count_nonzero(flags_s)),
                               len(lines) - tp, time.perf_counter() - t0)
