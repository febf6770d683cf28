"""Tolerance-based matching of predicted and labelled anomaly positions."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_TOLERANCES = (100.0, 150.0, 200.0)


@dataclass(frozen=True)
class Match:
    defect: float
    closest_prediction: float | None
    matched: bool


@dataclass
class EvalReport:
    r_t: float
    tp: int
    fn: int
    fp: int
    matches: list[Match] = field(default_factory=list)

    @property
    def recall(self) -> float | None:
        n = self.tp + self.fn
        return self.tp / n if n else None

    @property
    def precision(self) -> float | None:
        # TP counts defects, FP counts predictions; undefined without predictions
        if self.tp + self.fp == 0:
            return None
        return self.tp / (self.tp + self.fp)

    @property
    def f1(self) -> float | None:
        return f1_score(self.recall, self.precision)


def f1_score(recall: float | None, precision: float | None) -> float | None:
    if recall is None or precision is None:
        return None
    if recall + precision == 0:
        return 0.0
    return 2 * recall * precision / (recall + precision)


def _nearest(sorted_ref: np.ndarray, queries: np.ndarray):
    """Distance to and value of the nearest element of ``sorted_ref`` for each query."""
    idx = np.searchsorted(sorted_ref, queries)
    lo = np.clip(idx - 1, 0, len(sorted_ref) - 1)
    hi = np.clip(idx, 0, len(sorted_ref) - 1)
    d_lo = np.abs(queries - sorted_ref[lo])
    d_hi = np.abs(queries - sorted_ref[hi])
    pick = np.where(d_hi < d_lo, hi, lo)
    return np.minimum(d_lo, d_hi), sorted_ref[pick]


def match_and_score(defects, predictions, r_t: float) -> EvalReport:
    """Defect is TP iff some prediction lies within ``r_t``; prediction is FP iff no defect does.

    One prediction may confirm several nearby defects.
    """
    if not r_t > 0:
        raise ValueError("tolerance must be positive")
    d = np.asarray(getattr(defects, "positions", defects), dtype=np.float64)
    p = np.sort(np.asarray(predictions, dtype=np.float64))
    if len(d) == 0:
        return EvalReport(r_t, 0, 0, len(p))
    if len(p) == 0:
        return EvalReport(r_t, 0, len(d), 0, [Match(float(x), None, False) for x in d])
    dist, closest = _nearest(p, d)
    hit = dist <= r_t
    p_dist, _ = _nearest(np.sort(d), p)
    fp = int((p_dist > r_t).sum())
    matches = [Match(float(x), float(c), bool(h)) for x, c, h in zip(d, closest, hit)]
    return EvalReport(r_t, int(hit.sum()), int((~hit).sum()), fp, matches)


@dataclass
class AggregateReport:
    micro: EvalReport
    macro_recall: float | None
    macro_precision: float | None
    macro_f1: float | None
    runs: int


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate(reports: list[EvalReport]) -> AggregateReport:
    """Micro sums of tp/fn/fp plus macro means of per-report scores (absent values skipped)."""
    if not reports:
        raise ValueError("nothing to aggregate")
    tols = {r.r_t for r in reports}
    if len(tols) != 1:
        raise ValueError(f"mixed tolerances: {sorted(tols)}")
    micro = EvalReport(reports[0].r_t, sum(r.tp for r in reports), sum(r.fn for r in reports),
                       sum(r.fp for r in reports), [m for r in reports for m in r.matches])
    return AggregateReport(micro, _mean(r.recall for r in reports), _mean(r.precision for r in reports),
                           _mean(r.f1 for r in reports), len(reports))


def _cell(v: float | None) -> str:
    return "" if v is None else format(v, ".6f")


def score_table(rows: dict[str, dict[float, AggregateReport]], tolerances=DEFAULT_TOLERANCES,
                macro: bool = True) -> str:
    """CSV with one row per configuration and recall/precision/F1 columns per tolerance."""
    head = ["config"]
    for t in tolerances:
        head += [f"recall@{t:g}", f"precision@{t:g}", f"f1@{t:g}"]
    lines = [",".join(head)]
    for name, by_tol in rows.items():
        cells = [name]
        for t in tolerances:
            agg = by_tol[t]
            if macro:
                cells += [_cell(agg.macro_recall), _cell(agg.macro_precision), _cell(agg.macro_f1)]
            else:
                m = agg.micro
                cells += [_cell(m.recall), _cell(m.precision), _cell(m.f1)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def save_table(text: str, path) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path
