"""Command-line entry point: synth, gridsearch, train, detect, eval, plot."""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import plot
from .checkpoint import load_checkpoint
from .detector import DetectionReport, KdeConfig, detect
from .evaluation import DEFAULT_TOLERANCES, aggregate, match_and_score, save_table, score_table
from .motif import ClusterModel, MotifDetector, motif_detect, motif_train
from .selection import DEFAULT_D_LRS, DEFAULT_G_LRS, GRID_EPOCHS, grid_search_lr, select_discriminator
from .synth import TrackSpec, gen_track, write_sine_benchmark, write_track
from .timeseries import extract_windows, load_labels, load_series
from .training import GanConfig, train_gan


class CliError(RuntimeError):
    pass


@dataclass
class RunConfig:
    gan: GanConfig = field(default_factory=GanConfig)
    train: str | None = None
    validation: str | None = None
    test: str | None = None
    labels: str | None = None
    bandwidth: float = 50.0
    clusters: int = 1
    metric: str = "euclidean"
    rt: tuple[float, ...] = DEFAULT_TOLERANCES
    g_lr_grid: tuple[float, ...] = DEFAULT_G_LRS
    d_lr_grid: tuple[float, ...] = DEFAULT_D_LRS
    grid_epochs: int = GRID_EPOCHS
    selection: str = "unlabeled_na"
    repeats: int = 1
    jobs: int = 1
    out: str = "out"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rt"] = list(self.rt)
        d["g_lr_grid"] = list(self.g_lr_grid)
        d["d_lr_grid"] = list(self.d_lr_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        gan_keys = {f.name for f in fields(GanConfig)}
        gan = dict(d.pop("gan", {}) or {})
        # GanConfig fields may also sit at the top level
        for k in list(d):
            if k in gan_keys:
                gan[k] = d.pop(k)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        for k in ("rt", "g_lr_grid", "d_lr_grid"):
            if k in d:
                d[k] = tuple(float(v) for v in d[k])
        return cls(gan=GanConfig(**gan), **d)


# flag name -> (RunConfig or GanConfig field, converter)
GAN_FLAGS = {"wl": "wl", "g_lr": "g_lr", "d_lr": "d_lr", "epochs": "max_epochs",
             "checkpoint_interval": "checkpoint_interval", "batch": "batch_size", "seed": "seed",
             "arch": "d_arch", "noise": "noise"}
RUN_FLAGS = ("train", "validation", "test", "labels", "bandwidth", "clusters", "metric", "rt", "jobs", "out",
             "repeats")
ARCHS = {"cnn": "cnn_d", "dense": "dense_d", "cnn_d": "cnn_d", "dense_d": "dense_d"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        cfg = RunConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))
    gan_changes = {}
    for flag, name in GAN_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            gan_changes[name] = ARCHS[v] if flag == "arch" else v
    run_changes = {}
    for flag in RUN_FLAGS:
        v = getattr(args, flag, None)
        if v is not None:
            run_changes[flag] = tuple(v) if flag == "rt" else v
    if gan_changes:
        cfg = replace(cfg, gan=replace(cfg.gan, **gan_changes))
    if run_changes:
        cfg = replace(cfg, **run_changes)
    if cfg.metric not in ("euclidean", "dtw"):
        raise CliError(f"unknown metric {cfg.metric!r}")
    return cfg


def _need(cfg: RunConfig, *names: str) -> list[Path]:
    paths = []
    for name in names:
        v = getattr(cfg, name)
        if v is None:
            raise CliError(f"--{name} is required")
        p = Path(v)
        if not p.exists():
            raise CliError(f"{name} file not found: {p}")
        paths.append(p)
    return paths


def _write_json(obj, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _echo(msg: str) -> None:
    print(msg, flush=True)


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.exists():
        raise CliError(f"spec file not found: {spec_path}")
    spec = json.loads(spec_path.read_text(encoding="utf-8"))
    out = Path(args.out or "data")
    kind = spec.get("kind", "track")
    if kind == "track":
        manifest = write_track(gen_track(TrackSpec.from_dict(spec)), out)
        _echo(f"wrote {len(manifest['files'])} series to {out}")
    elif kind == "sine":
        opts = {k: v for k, v in spec.items() if k != "kind"}
        manifest = write_sine_benchmark(out, **opts)
        _echo(f"wrote sine benchmark ({manifest['mode']}) to {out}")
    else:
        raise CliError(f"unknown dataset kind {kind!r}")
    return 0


def cmd_gridsearch(args) -> int:
    cfg = resolve_config(args)
    train_path, val_path = _need(cfg, "train", "validation")
    train = load_series(train_path)
    val = load_series(val_path)
    result = grid_search_lr(extract_windows(train, cfg.gan.wl), val, cfg.gan, cfg.g_lr_grid, cfg.d_lr_grid,
                            epochs=cfg.grid_epochs, jobs=cfg.jobs)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    result.save(out / "gridsearch.csv")
    g, d = result.best
    _write_json({"g_lr": g, "d_lr": d, "epochs": cfg.grid_epochs}, out / "best_lr.json")
    _echo(f"best g_lr={g:g} d_lr={d:g}")
    return 0


def _train_one(cfg: RunConfig, train, val, run_dir: Path, labeled=None) -> dict:
    kde = KdeConfig(bandwidth=cfg.bandwidth)
    run_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.to_dict(), run_dir / "config.json")
    windows = extract_windows(train, cfg.gan.wl)
    if cfg.clusters > 1:
        md = motif_train(windows, val, cfg.clusters, cfg.metric, cfg.gan, jobs=cfg.jobs)
        md.clusters.save(run_dir / "clusters.json")
        entries = []
        for c, (series, sel) in enumerate(zip(md.runs, md.selections)):
            sub = run_dir / f"cluster_{c}"
            series.save(sub)
            entries.append({"cluster": c, "epoch": sel.epoch, "score": _num(sel.score),
                            "checkpoint": f"cluster_{c}/checkpoints/epoch_{sel.epoch:04d}.ckpt"})
        selection = {"mode": cfg.selection, "clusters": entries}
    else:
        series = train_gan(windows, val, cfg.gan)
        series.save(run_dir)
        if cfg.selection == "labeled_f1":
            if labeled is None:
                raise CliError("labeled_f1 selection needs --test and --labels")
            sel = select_discriminator(series, "labeled_f1", labeled_series=labeled[0], labels=labeled[1],
                                       r_t=cfg.rt[0], kde=kde)
        else:
            sel = select_discriminator(series, cfg.selection)
        selection = {"mode": sel.mode, "epoch": sel.epoch, "score": _num(sel.score),
                     "checkpoint": f"checkpoints/epoch_{sel.epoch:04d}.ckpt"}
    _write_json(selection, run_dir / "selection.json")
    return selection


def _num(v: float):
    return v if np.isfinite(v) else str(v)


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    train_path, val_path = _need(cfg, "train", "validation")
    train = load_series(train_path)
    val = load_series(val_path)
    labeled = None
    if cfg.selection == "labeled_f1":
        test_path, labels_path = _need(cfg, "test", "labels")
        test = load_series(test_path)
        labeled = (test, load_labels(labels_path, test.segment_id, test.inspection_id))
    out = Path(cfg.out)
    for r in range(cfg.repeats):
        run_cfg = replace(cfg, gan=replace(cfg.gan, seed=cfg.gan.seed + r))
        run_dir = out if cfg.repeats == 1 else out / f"run_{r}"
        sel = _train_one(run_cfg, train, val, run_dir, labeled)
        where = sel.get("checkpoint") or ", ".join(e["checkpoint"] for e in sel["clusters"])
        _echo(f"{run_dir}: selected {where}")
    return 0


def load_model(path):
    """A run directory (via selection.json) or a single checkpoint file."""
    path = Path(path)
    if path.is_file():
        return load_checkpoint(path)
    sel_path = path / "selection.json"
    if not sel_path.exists():
        raise CliError(f"no selection.json in {path}")
    sel = json.loads(sel_path.read_text(encoding="utf-8"))
    if "clusters" in sel:
        model = ClusterModel.load(path / "clusters.json")
        nets = [load_checkpoint(path / e["checkpoint"]) for e in sel["clusters"]]
        return MotifDetector(model, nets)
    return load_checkpoint(path / sel["checkpoint"])


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    if not args.model:
        raise CliError("--model is required")
    model = load_model(args.model)
    (test_path,) = _need(cfg, "test")
    test = load_series(test_path)
    kde = KdeConfig(bandwidth=cfg.bandwidth)
    report = motif_detect(model, test, kde) if isinstance(model, MotifDetector) else detect(model, test, kde)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{test.segment_id}_{test.inspection_id}" if test.segment_id else test_path.stem
    report.save(out / f"{stem}_report.json")
    labels = None
    if cfg.labels:
        (labels_path,) = _need(cfg, "labels")
        labels = load_labels(labels_path)
    plot.save_svg(report, out / f"{stem}_report.svg", test, labels)
    _echo(f"{stem}: {len(report.predicted_anomalies)} predicted anomalies")
    return 0


def _report_runs(paths: list[str]) -> list[list[Path]]:
    """Each directory is one run; loose files together form one more run."""
    runs, loose = [], []
    for p in map(Path, paths):
        if p.is_dir():
            files = sorted(p.glob("*_report.json"))
            if not files:
                raise CliError(f"no *_report.json files in {p}")
            runs.append(files)
        elif p.exists():
            loose.append(p)
        else:
            raise CliError(f"report not found: {p}")
    if loose:
        runs.append(loose)
    return runs


def _labels_for(report: DetectionReport, label_files: list[Path]):
    key = f"{report.segment_id}_{report.inspection_id}"
    for f in label_files:
        if f.name.startswith(key + "_") or f.stem == key:
            return load_labels(f, report.segment_id, report.inspection_id)
    raise CliError(f"no label file for {key}")


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    if not args.reports or not args.labels_files:
        raise CliError("--reports and --labels-files are required")
    label_files = []
    for p in map(Path, args.labels_files):
        if p.is_dir():
            label_files.extend(sorted(p.glob("*_labels.csv")))
        elif p.exists():
            label_files.append(p)
        else:
            raise CliError(f"labels not found: {p}")
    runs = _report_runs(args.reports)
    by_tol = {}
    for t in cfg.rt:
        per_run = []
        for files in runs:
            evs = []
            for f in files:
                rep = DetectionReport.load(f)
                evs.append(match_and_score(_labels_for(rep, label_files), rep.predicted_anomalies, t))
            per_run.append(aggregate(evs).micro)
        by_tol[t] = aggregate(per_run)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    text = score_table({args.name: by_tol}, cfg.rt)
    save_table(text, out / "scores.csv")
    sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    cfg = resolve_config(args)
    if not args.report:
        raise CliError("--report is required")
    report = DetectionReport.load(args.report)
    series = load_series(cfg.test) if cfg.test else None
    labels = load_labels(cfg.labels) if cfg.labels else None
    target = Path(args.svg) if args.svg else Path(cfg.out) / (Path(args.report).stem + ".svg")
    target.parent.mkdir(parents=True, exist_ok=True)
    plot.save_svg(report, target, series, labels)
    _echo(f"wrote {target}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file mirroring RunConfig")
    p.add_argument("--wl", type=int)
    p.add_argument("--g-lr", dest="g_lr", type=float)
    p.add_argument("--d-lr", dest="d_lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--checkpoint-interval", dest="checkpoint_interval", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--arch", choices=sorted(ARCHS))
    p.add_argument("--noise", choices=("normal", "uniform01"))
    p.add_argument("--clusters", type=int)
    p.add_argument("--metric", choices=("euclidean", "dtw"))
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--rt", type=float, nargs="+")
    p.add_argument("--jobs", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out")
    p.add_argument("--train", help="training series CSV")
    p.add_argument("--validation", help="clean validation series CSV")
    p.add_argument("--test", help="test series CSV")
    p.add_argument("--labels", help="anomaly label CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gandetect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("synth", help="generate a synthetic dataset from a JSON spec")
    p.add_argument("spec")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    for name, func, text in (("gridsearch", cmd_gridsearch, "learning-rate grid search"),
                             ("train", cmd_train, "train, checkpoint and select a discriminator"),
                             ("detect", cmd_detect, "score a series and localise anomalies"),
                             ("eval", cmd_eval, "score reports against labels"),
                             ("plot", cmd_plot, "render a detection report as SVG")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.set_defaults(func=func)
        if name == "detect":
            p.add_argument("--model", help="run directory or checkpoint file")
        if name == "eval":
            p.add_argument("--reports", nargs="+", help="report files or run directories")
            p.add_argument("--labels-files", dest="labels_files", nargs="+", help="label files or directories")
            p.add_argument("--name", default="run")
        if name == "plot":
            p.add_argument("--report")
            p.add_argument("--svg", help="output file (default: <out>/<report>.svg)")
    return parser


def _origin(exc: BaseException) -> str:
    # module of the deepest frame inside this package
    mod = "gandetect.cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("gandetect"):
            mod = name
    return mod


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (Exception, KeyboardInterrupt) as e:  # noqa: BLE001
        print(f"{_origin(e)}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
