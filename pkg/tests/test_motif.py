import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gandetect.detector import KdeConfig, detect
from gandetect.motif import (ClusterModel, MotifDetector, MotifError, assign_cluster, assign_many, dba,
                             dtw_distance, kmeans_fit, motif_detect, motif_train)
from gandetect.nn import LayerSpec, Network
from gandetect.selection import select_discriminator
from gandetect.timeseries import TimeSeries, extract_windows
from gandetect.training import GanConfig, train_gan


def dtw_enumerate(a, b):
    """Minimum squared cost over every monotone unit-step path, by explicit enumeration."""
    n, m = len(a), len(b)
    best = math.inf

    def walk(i, j, cost):
        nonlocal best
        cost += (a[i] - b[j]) ** 2
        if i == n - 1 and j == m - 1:
            best = min(best, cost)
            return
        if i + 1 < n:
            walk(i + 1, j, cost)
        if j + 1 < m:
            walk(i, j + 1, cost)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost)

    walk(0, 0, 0.0)
    return math.sqrt(best)


def test_dtw_matches_exhaustive_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.normal(size=int(rng.integers(1, 7)))
        b = rng.normal(size=int(rng.integers(1, 7)))
        assert abs(dtw_distance(a, b) - dtw_enumerate(a, b)) <= 1e-12


def test_dtw_examples():
    assert dtw_distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert dtw_distance([0.0], [1.0]) == 1.0
    assert dtw_distance([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]) == pytest.approx(math.sqrt(3), abs=1e-15)


vec = st.lists(st.floats(-100, 100), min_size=1, max_size=12)


@given(vec, vec)
def test_dtw_symmetric(a, b):
    assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), rel=1e-12, abs=1e-12)


@given(st.integers(1, 12), st.data())
def test_dtw_bounded_by_euclidean(n, data):
    a = np.array(data.draw(st.lists(st.floats(-100, 100), min_size=n, max_size=n)))
    b = np.array(data.draw(st.lists(st.floats(-100, 100), min_size=n, max_size=n)))
    assert dtw_distance(a, a) == 0.0
    assert dtw_distance(a, b) <= np.linalg.norm(a - b) * (1 + 1e-12) + 1e-12


def test_dtw_rejects_empty():
    with pytest.raises(ValueError):
        dtw_distance([], [1.0])


def two_clouds(seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(40, 6))
    b = rng.normal(size=(60, 6)) + 50.0
    return np.vstack([a, b]), a, b


def test_kmeans_separated_clouds():
    rows, a, b = two_clouds()
    model = kmeans_fit(rows, 2, seed=1)
    centres = sorted(model.centroids, key=lambda c: c[0])
    assert np.allclose(centres[0], a.mean(axis=0), atol=1e-9)
    assert np.allclose(centres[1], b.mean(axis=0), atol=1e-9)
    assert sorted(model.sizes) == [40, 60]


def test_kmeans_k1_is_global_mean():
    rows, _, _ = two_clouds()
    model = kmeans_fit(rows, 1)
    assert np.allclose(model.centroids[0], rows.mean(axis=0), atol=1e-12)


def test_kmeans_k_equals_n_has_zero_inertia():
    rows = np.random.default_rng(2).normal(size=(12, 4))
    model = kmeans_fit(rows, 12, seed=0)
    assert model.inertia_history[-1] == 0.0
    assert sorted(model.sizes) == [1] * 12


def test_kmeans_inertia_non_increasing():
    rng = np.random.default_rng(3)
    for seed in range(10):
        rows = rng.normal(size=(200, 5)) + rng.integers(0, 4, size=(200, 1)) * 3.0
        h = kmeans_fit(rows, 4, seed=seed).inertia_history
        assert all(b <= a * (1 + 1e-12) for a, b in zip(h, h[1:]))


def test_kmeans_is_seeded():
    rows, _, _ = two_clouds()
    a = kmeans_fit(rows, 3, seed=5)
    b = kmeans_fit(rows, 3, seed=5)
    assert np.array_equal(a.centroids, b.centroids)


def test_kmeans_rejects_bad_k():
    with pytest.raises(ValueError):
        kmeans_fit(np.zeros((3, 2)), 4)


def test_kmeans_duplicate_points_still_fills_every_cluster():
    rows = np.vstack([np.zeros((10, 3)), np.ones((2, 3))])
    model = kmeans_fit(rows, 3, seed=0)
    assert model.sizes.sum() == 12
    assert model.k == 3


def test_dtw_kmeans_runs_and_uses_dba():
    t = np.linspace(0, 1, 20)
    rows = np.vstack([np.sin(2 * np.pi * (t + s)) for s in np.linspace(0, 0.05, 10)] +
                     [np.sign(np.sin(2 * np.pi * 3 * (t + s))) for s in np.linspace(0, 0.05, 10)])
    model = kmeans_fit(rows, 2, metric="dtw", seed=0, max_iter=5)
    assert sorted(model.sizes) == [10, 10]
    assert model.metric == "dtw"


def test_dba_of_identical_members_is_that_member():
    x = np.sin(np.linspace(0, 3, 15))
    assert np.allclose(dba(np.vstack([x, x, x])), x)


def test_assign_cluster_examples():
    model = ClusterModel(np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]), "euclidean",
                         np.array([1, 1, 1]), np.zeros(0, dtype=int))
    assert assign_cluster(model, [5.0, 5.0]) == 2
    # equidistant from 0 and 1
    assert assign_cluster(model, [1.0, 0.0]) == 0


@pytest.mark.parametrize("metric", ["euclidean", "dtw"])
def test_assign_matches_brute_force_scan(metric):
    rng = np.random.default_rng(4)
    centres = rng.normal(size=(4, 8))
    model = ClusterModel(centres, metric, np.ones(4, dtype=int), np.zeros(0, dtype=int))
    windows = rng.normal(size=(1000 if metric == "euclidean" else 200, 8))
    got = assign_many(model, windows)
    for w, g in zip(windows, got):
        if metric == "euclidean":
            dists = [np.sum((w - c) ** 2) for c in centres]
        else:
            dists = [dtw_distance(w, c) for c in centres]
        assert g == int(np.argmin(dists))


def test_cluster_model_json_roundtrip(tmp_path):
    rows, _, _ = two_clouds()
    model = kmeans_fit(rows, 2)
    back = ClusterModel.load(model.save(tmp_path / "clusters.json"))
    assert np.array_equal(back.centroids, model.centroids)
    assert back.metric == "euclidean"
    assert list(back.sizes) == list(model.sizes)


def constant_stub(wl, fake: bool):
    logit = 20.0 if fake else -20.0
    layers = [LayerSpec("dense", (wl, 2)), LayerSpec("sigmoid")]
    return Network("dense_d", wl, (wl,), layers, [{"W": np.zeros((wl, 2)), "b": np.array([-logit, logit])}, {}])


def test_motif_detect_routes_windows_to_their_cluster():
    wl = 4
    # two centroids: rising and falling ramps
    up = np.array([-1.5, -0.5, 0.5, 1.5])
    model = ClusterModel(np.vstack([up, -up]), "euclidean", np.array([1, 1]), np.zeros(0, dtype=int))
    md = MotifDetector(model, [constant_stub(wl, False), constant_stub(wl, True)])
    # zig-zag series: windows alternate between cluster 0 and cluster 1
    values = np.array([0, 1, 2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0], dtype=float)
    s = TimeSeries(np.arange(len(values), dtype=float), values, "a", "1")
    rows = extract_windows(s, wl).rows
    labels = assign_many(model, rows)
    rep = motif_detect(md, s, KdeConfig(bandwidth=2))
    flagged_starts = np.flatnonzero(rep.d_scores > 0.5)
    assert list(flagged_starts) == list(np.flatnonzero(labels == 1))
    assert 0 < len(flagged_starts) < len(rows)


def test_all_windows_in_cluster_zero_equals_plain_detect():
    wl = 6
    from gandetect.nn import build_discriminator

    d0 = build_discriminator("dense_d", wl, seed=1)
    far = np.full((1, wl), 1e6)
    model = ClusterModel(np.vstack([np.zeros(wl), far[0]]), "euclidean", np.array([1, 1]), np.zeros(0, dtype=int))
    md = MotifDetector(model, [d0, constant_stub(wl, True)])
    s = TimeSeries(np.arange(200.0), np.random.default_rng(0).normal(size=200), "a", "1")
    a = motif_detect(md, s)
    b = detect(d0, s)
    assert a.to_json() == b.to_json()


def small_problem():
    t = np.arange(800)
    rng = np.random.default_rng(0)
    train = TimeSeries(t.astype(float), np.sin(t / 3.0) + 0.05 * rng.normal(size=800), "MP1", "1")
    val = TimeSeries(t.astype(float), np.sin(t / 3.0) + 0.05 * rng.normal(size=800), "MP1", "2")
    cfg = GanConfig(wl=16, noise_dim=8, max_epochs=4, checkpoint_interval=2, batch_size=32, seed=3)
    return train, val, cfg


def test_k1_motif_equals_plain_pipeline():
    train, val, cfg = small_problem()
    windows = extract_windows(train, cfg.wl)
    series = train_gan(windows, val, cfg)
    plain = select_discriminator(series)
    md = motif_train(windows, val, k=1, config=cfg)
    assert md.selections[0].epoch == plain.epoch
    assert md.detectors[0].same_weights(plain.params)
    test = TimeSeries(train.positions, train.values + np.where(np.arange(800) == 400, 3.0, 0.0), "MP1", "3")
    assert motif_detect(md, test).to_json() == detect(plain.params, test).to_json()


def test_cluster_too_small():
    train, val, cfg = small_problem()
    windows = extract_windows(train, cfg.wl).rows
    rows = np.vstack([windows, np.full((10, cfg.wl), 40.0) + np.arange(cfg.wl)])
    with pytest.raises(MotifError, match="too small") as info:
        motif_train(rows, val, k=2, config=cfg)
    assert "cluster" in str(info.value)


def test_motif_k2_trains_two_detectors():
    train, val, cfg = small_problem()
    cfg = replace(cfg, seed=1)
    md = motif_train(extract_windows(train, cfg.wl), val, k=2, config=cfg)
    assert len(md.detectors) == 2
    assert len(md.runs) == 2
    assert [r.config.seed for r in md.runs] == [1, 2]
    assert md.clusters.sizes.sum() == len(train) - cfg.wl + 1


def test_degenerate_cluster_is_named():
    # with this seed the second cluster's discriminator never flags a validation window
    train, val, cfg = small_problem()
    with pytest.raises(MotifError, match="cluster 1: degenerate") as info:
        motif_train(extract_windows(train, cfg.wl), val, k=2, config=cfg)
    assert info.value.cluster == 1
