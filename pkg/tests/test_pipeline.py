import numpy as np
import pytest

from gandetect.pipeline import PipelineConfig, run_segment, run_sine_benchmark, run_track
from gandetect.synth import AnomalySpec, TrackSpec, gen_track
from gandetect.training import GanConfig

GAN = GanConfig(wl=16, noise_dim=8, max_epochs=4, checkpoint_interval=2, batch_size=64, d_arch="dense_d", seed=2)


@pytest.fixture(scope="module")
def tiny_track():
    plan = (AnomalySpec("MP1", "3", 300), AnomalySpec("MP2", "3", 200, "level_shift"))
    return gen_track(TrackSpec(miles=2, inspections=3, samples_per_mile=600, anomalies=plan))


def test_run_track_with_fixed_lrs(tiny_track):
    cfg = PipelineConfig(gan=GAN, grid_search=False, tolerances=(100.0, 200.0))
    res = run_track(tiny_track, cfg)
    assert res.lrs == (GAN.g_lr, GAN.d_lr)
    assert res.grid is None
    assert [(r.segment_id, r.inspection_id) for r in res.runs] == [("MP1", "3"), ("MP2", "3")]
    agg = res.aggregate(200.0)
    assert agg.micro.tp + agg.micro.fn == 2
    for r in res.runs:
        assert r.evals[100.0].tp <= r.evals[200.0].tp


def test_run_track_grid_search_on_first_segment(tiny_track):
    cfg = PipelineConfig(gan=GAN, g_lr_grid=(1e-3, 2e-3), d_lr_grid=(1e-4,), grid_epochs=4)
    msgs = []
    res = run_track(tiny_track, cfg, progress=msgs.append)
    assert len(res.grid.rows) == 2
    assert res.lrs == res.grid.best
    assert msgs[0].startswith("grid search on MP1")


def test_run_track_is_deterministic(tiny_track):
    cfg = PipelineConfig(gan=GAN, grid_search=False)
    a = run_track(tiny_track, cfg)
    b = run_track(tiny_track, cfg)
    assert [r.report.to_json() for r in a.runs] == [r.report.to_json() for r in b.runs]


def test_labeled_selection(tiny_track):
    train, val = tiny_track.series[("MP1", "1")], tiny_track.series[("MP1", "2")]
    tests = [(tiny_track.series[("MP1", "3")], tiny_track.labels[("MP1", "3")])]
    runs = run_segment(train, val, tests, PipelineConfig(gan=GAN, selection="labeled_f1", stop_early=False))
    assert runs[0].selected_epoch in (2, 4)


def test_needs_two_clean_inspections():
    ds = gen_track(TrackSpec(miles=1, inspections=2, samples_per_mile=300,
                             anomalies=(AnomalySpec("MP1", "2", 150),)))
    with pytest.raises(ValueError, match="two clean"):
        run_track(ds, PipelineConfig(gan=GAN, grid_search=False))


def test_sine_benchmark_small():
    gan = GanConfig(wl=20, noise_dim=8, max_epochs=4, checkpoint_interval=2, batch_size=32)
    res = run_sine_benchmark("clustered", seed=0, config=gan, train_count=100, test_sines=40, test_lines=10,
                             validation_count=60)
    assert res.tp + res.fn == 10
    assert 0 <= res.fp <= 40
    assert res.selected_epoch in (2, 4)
    assert 0.0 <= res.recall <= 1.0 and 0.0 <= res.precision <= 1.0
    again = run_sine_benchmark("clustered", seed=0, config=gan, train_count=100, test_sines=40, test_lines=10,
                               validation_count=60)
    assert (again.tp, again.fp) == (res.tp, res.fp)
    with pytest.raises(ValueError):
        run_sine_benchmark("spiral", config=gan)
