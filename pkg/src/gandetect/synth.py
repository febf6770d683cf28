"""Synthetic data: sine/line window sets and a repeated-inspection track dataset."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .timeseries import LabeledAnomalies, TimeSeries, save_labels, save_series, zero_mean

ANOMALY_KINDS = ("spike", "level_shift", "burst")
# samples covered by each kind, centred on the labelled position
ANOMALY_WIDTH = {"spike": 3, "level_shift": 50, "burst": 30}


@dataclass(frozen=True)
class SineSpec:
    count: int
    length: int = 100
    freq_range: tuple[float, float] = (1.9, 2.1)
    phase_range: tuple[float, float] = (-0.1, 0.1)
    amp_range: tuple[float, float] = (0.8, 1.2)
    mode: str = "clustered"
    seed: int = 0

    def __post_init__(self):
        for name in ("freq_range", "phase_range", "amp_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty")
        if self.count < 1 or self.length < 2:
            raise ValueError("count >= 1 and length >= 2 required")

    @classmethod
    def clustered(cls, count: int, length: int = 100, seed: int = 0, center_freq: float = 2.0):
        """Frequencies within 5% of ``center_freq`` cycles per window, phases within 0.1 rad."""
        return cls(count, length, (0.95 * center_freq, 1.05 * center_freq), (-0.1, 0.1),
                   mode="clustered", seed=seed)

    @classmethod
    def dispersed(cls, count: int, length: int = 100, seed: int = 0):
        """Frequencies over a decade, any phase."""
        return cls(count, length, (0.5, 5.0), (0.0, 2 * np.pi), mode="dispersed", seed=seed)


@dataclass
class SineSet:
    rows: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray
    amps: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return np.zeros(len(self.rows), dtype=bool)


def gen_sine_set(spec: SineSpec) -> SineSet:
    rng = np.random.default_rng([spec.seed, 10])
    f = rng.uniform(*spec.freq_range, size=spec.count)
    phi = rng.uniform(*spec.phase_range, size=spec.count)
    a = rng.uniform(*spec.amp_range, size=spec.count)
    t = np.arange(spec.length) / spec.length
    rows = a[:, None] * np.sin(2 * np.pi * f[:, None] * t[None, :] + phi[:, None])
    return SineSet(zero_mean(rows), f, phi, a)


def gen_line_set(count: int, length: int = 100, slope_range: tuple[float, float] = (-3.0, 3.0),
                 seed: int = 0) -> np.ndarray:
    """Zero-mean linear ramps; slope is the total rise across one window."""
    rng = np.random.default_rng([seed, 11])
    slopes = rng.uniform(*slope_range, size=count)
    t = np.arange(length) / length
    return zero_mean(slopes[:, None] * t[None, :])


@dataclass(frozen=True)
class AnomalySpec:
    segment: str
    inspection: str
    position: int  # sample index of the centre
    kind: str = "spike"
    magnitude: float = 10.0  # in standard deviations of the clean series

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}")


@dataclass(frozen=True)
class TrackSpec:
    miles: int = 5
    samples_per_mile: int = 5280
    inspections: int = 3
    noise: float = 0.1
    seed: int = 0
    anomalies: tuple[AnomalySpec, ...] = ()
    spacing: float = 1.0  # feet per sample
    # base: smoothed square pattern (tie-plate like) plus a weaker smooth drift
    pattern_period: tuple[float, float] = (50.0, 70.0)
    pattern_sharpness: float = 4.0
    drift: float = 0.3
    components: int = 8
    min_wavelength: float = 150.0
    max_wavelength: float = 2000.0
    min_separation: int = 100

    def __post_init__(self):
        if self.miles < 1 or self.inspections < 1 or self.samples_per_mile < 2:
            raise ValueError("miles, inspections >= 1 and samples_per_mile >= 2 required")
        object.__setattr__(self, "anomalies", tuple(
            a if isinstance(a, AnomalySpec) else AnomalySpec(**a) for a in self.anomalies))

    @property
    def segments(self) -> list[str]:
        return [f"MP{i + 1}" for i in range(self.miles)]

    @property
    def inspection_ids(self) -> list[str]:
        return [str(i + 1) for i in range(self.inspections)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["anomalies"] = [asdict(a) for a in self.anomalies]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrackSpec":
        d = dict(d)
        d.pop("kind", None)
        random_plan = d.pop("random_anomalies", None)
        spec = cls(**d)
        if random_plan:
            spec = with_random_anomalies(spec, **random_plan)
        return spec


def with_random_anomalies(spec: TrackSpec, inspection: str, count: int, magnitude: float = 10.0,
                          kinds=ANOMALY_KINDS, margin: int = 200, seed: int | None = None) -> TrackSpec:
    """Spread ``count`` anomalies over the segments of one inspection.

    Segments get ``count // miles`` each (remainder to the first ones); within a
    segment positions are drawn at least ``spec.min_separation`` apart and
    ``margin`` samples from either end. Kinds cycle through ``kinds``.
    """
    rng = np.random.default_rng([spec.seed if seed is None else seed, 12])
    per = [count // spec.miles + (1 if i < count % spec.miles else 0) for i in range(spec.miles)]
    plan = list(spec.anomalies)
    k = 0
    for seg, n in zip(spec.segments, per):
        chosen: list[int] = []
        while len(chosen) < n:
            pos = int(rng.integers(margin, spec.samples_per_mile - margin))
            if all(abs(pos - c) >= max(spec.min_separation, 2 * margin) for c in chosen):
                chosen.append(pos)
        for pos in sorted(chosen):
            plan.append(AnomalySpec(seg, str(inspection), pos, kinds[k % len(kinds)], magnitude))
            k += 1
    return TrackSpec(**{**spec.__dict__, "anomalies": tuple(plan)})


def _base_signal(spec: TrackSpec, seg_index: int) -> np.ndarray:
    # same for every inspection of a segment
    rng = np.random.default_rng([spec.seed, 20, seg_index])
    n = spec.samples_per_mile
    idx = np.arange(n) + seg_index * n
    period = rng.uniform(*spec.pattern_period)
    phase = rng.uniform(0, 2 * np.pi)
    k = spec.pattern_sharpness
    pattern = np.tanh(k * np.sin(2 * np.pi * idx / period + phase)) / np.tanh(k)
    wavelengths = np.exp(rng.uniform(np.log(spec.min_wavelength), np.log(spec.max_wavelength), spec.components))
    phases = rng.uniform(0, 2 * np.pi, spec.components)
    amps = rng.uniform(0.5, 1.0, spec.components)
    drift = (amps[:, None] * np.sin(2 * np.pi * idx[None, :] / wavelengths[:, None] + phases[:, None])).sum(axis=0)
    drift /= np.sqrt((amps ** 2).sum() / 2)
    return pattern + spec.drift * drift


def anomaly_profile(kind: str, amplitude: float) -> np.ndarray:
    width = ANOMALY_WIDTH[kind]
    if kind == "spike":
        return np.full(width, amplitude)
    if kind == "level_shift":
        return np.full(width, amplitude)
    return amplitude * np.sin(2 * np.pi * 0.25 * np.arange(width) + np.pi / 4)


def inject(values: np.ndarray, anomalies, sigma: float) -> np.ndarray:
    """Add each anomaly profile scaled by ``magnitude * sigma``; overlapping spans are an error."""
    out = values.copy()
    spans = []
    for a in sorted(anomalies, key=lambda a: a.position):
        prof = anomaly_profile(a.kind, a.magnitude * sigma)
        lo = a.position - len(prof) // 2
        hi = lo + len(prof)
        if lo < 0 or hi > len(values):
            raise ValueError(f"anomaly at {a.position} does not fit in the series")
        for s_lo, s_hi in spans:
            if lo < s_hi and s_lo < hi:
                raise ValueError(f"overlapping anomalies around sample {a.position}")
        spans.append((lo, hi))
        out[lo:hi] += prof
    return out


@dataclass
class TrackDataset:
    spec: TrackSpec
    series: dict[tuple[str, str], TimeSeries] = field(default_factory=dict)
    labels: dict[tuple[str, str], LabeledAnomalies] = field(default_factory=dict)
    baselines: dict[tuple[str, str], np.ndarray] = field(default_factory=dict, repr=False)

    def clean_inspections(self) -> list[str]:
        dirty = {a.inspection for a in self.spec.anomalies}
        return [i for i in self.spec.inspection_ids if i not in dirty]

    def labeled_inspections(self) -> list[str]:
        dirty = {a.inspection for a in self.spec.anomalies}
        return [i for i in self.spec.inspection_ids if i in dirty]


def gen_track(spec: TrackSpec) -> TrackDataset:
    known = {(s, i) for s in spec.segments for i in spec.inspection_ids}
    for a in spec.anomalies:
        if (a.segment, a.inspection) not in known:
            raise ValueError(f"anomaly refers to unknown series {a.segment}_{a.inspection}")
    ds = TrackDataset(spec)
    n = spec.samples_per_mile
    for si, seg in enumerate(spec.segments):
        base = _base_signal(spec, si)
        positions = (np.arange(n) + si * n) * spec.spacing
        for ii, insp in enumerate(spec.inspection_ids):
            rng = np.random.default_rng([spec.seed, 30, si, ii])
            clean = base + spec.noise * rng.standard_normal(n)
            plan = [a for a in spec.anomalies if a.segment == seg and a.inspection == insp]
            values = inject(clean, plan, float(clean.std()))
            key = (seg, insp)
            ds.series[key] = TimeSeries(positions, values, seg, insp)
            ds.baselines[key] = clean
            if plan:
                ds.labels[key] = LabeledAnomalies(
                    tuple(float(positions[a.position]) for a in sorted(plan, key=lambda a: a.position)),
                    seg, insp)
    return ds


def write_track(ds: TrackDataset, out_dir) -> dict:
    """Write ``<segment>_<inspection>.csv`` files, label files and ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for (seg, insp), series in sorted(ds.series.items()):
        name = f"{seg}_{insp}.csv"
        save_series(series, out_dir / name)
        entry = {"segment": seg, "inspection": insp, "series": name, "labels": None}
        if (seg, insp) in ds.labels:
            lname = f"{seg}_{insp}_labels.csv"
            save_labels(ds.labels[(seg, insp)], out_dir / lname)
            entry["labels"] = lname
        files.append(entry)
    manifest = {"kind": "track", "spec": ds.spec.to_dict(), "files": files,
                "clean_inspections": ds.clean_inspections(),
                "labeled_inspections": ds.labeled_inspections()}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                           encoding="utf-8")
    return manifest


def write_sine_benchmark(out_dir, train_count: int = 2000, length: int = 100, mode: str = "clustered",
                         test_sines: int = 500, test_lines: int = 50, validation_count: int = 5000,
                         seed: int = 0) -> dict:
    """Write train/validation/test window sets as ``.npy`` plus a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    make = SineSpec.clustered if mode == "clustered" else SineSpec.dispersed
    train = gen_sine_set(make(train_count, length, seed=seed)).rows
    val = gen_sine_set(make(validation_count, length, seed=seed + 1000)).rows
    test_s = gen_sine_set(make(test_sines, length, seed=seed + 2000)).rows
    test_l = gen_line_set(test_lines, length, seed=seed)
    test = np.concatenate([test_s, test_l])
    labels = np.concatenate([np.zeros(len(test_s), bool), np.ones(len(test_l), bool)])
    for name, arr in (("train", train), ("validation", val), ("test", test), ("test_labels", labels)):
        np.save(out_dir / f"{name}.npy", arr)
    manifest = {"kind": "sine", "mode": mode, "length": length, "seed": seed,
                "files": ["train.npy", "validation.npy", "test.npy", "test_labels.npy"]}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                           encoding="utf-8")
    return manifest
