import math

import numpy as np
import pytest

from gandetect import nn
from gandetect.checkpoint import dumps
from gandetect.training import (CheckpointSeries, GanConfig, sample_noise, stop_when_infinite, train_gan,
                                write_log)
from gandetect.timeseries import TimeSeries


def data(n=300, seed=0):
    t = np.arange(n + 11, dtype=float)
    rng = np.random.default_rng(seed)
    v = np.sin(t / 2.0) + 0.05 * rng.normal(size=len(t))
    rows = np.lib.stride_tricks.sliding_window_view(v, 12).copy()
    rows -= rows.mean(axis=1, keepdims=True)
    val = TimeSeries(t, np.sin(t / 2.0) + 0.05 * rng.normal(size=len(t)), "a", "2")
    return rows, val


def cfg(**kw):
    base = dict(wl=12, noise_dim=4, max_epochs=6, checkpoint_interval=2, batch_size=32, seed=1)
    base.update(kw)
    return GanConfig(**base)


def test_checkpoints_every_interval():
    rows, val = data()
    s = train_gan(rows, val, cfg())
    assert s.epochs() == [2, 4, 6]
    assert [e.epoch for e in s.log] == list(range(1, 7))
    assert all(r.na.total == len(val) - 11 for r in s.records)
    assert [e.na_ratio is not None for e in s.log] == [False, True] * 3


def test_default_protocol_has_at_most_twenty_checkpoints():
    c = GanConfig()
    assert c.max_epochs // c.checkpoint_interval <= 20
    assert (c.wl, c.noise_dim, c.g_lr, c.d_lr, c.batch_size) == (100, 128, 1e-3, 1e-4, 64)


def test_training_is_deterministic():
    rows, val = data()
    a = train_gan(rows, val, cfg())
    b = train_gan(rows, val, cfg())
    assert [dumps(r.params) for r in a.records] == [dumps(r.params) for r in b.records]
    assert [e.d_loss for e in a.log] == [e.d_loss for e in b.log]


def test_seed_changes_result():
    rows, val = data()
    a = train_gan(rows, val, cfg(seed=1))
    b = train_gan(rows, val, cfg(seed=2))
    assert not a.records[0].params.same_weights(b.records[0].params)


def test_hook_stops_training():
    rows, val = data()
    s = train_gan(rows, val, cfg(), selection_hook=lambda rec, recs: rec.epoch == 4)
    assert s.epochs() == [2, 4]
    assert len(s.log) == 4


def test_stop_when_infinite():
    from gandetect.selection import NaRatio
    from gandetect.training import CheckpointRecord

    net = nn.build_discriminator("dense_d", 4)
    finite = CheckpointRecord(5, net, NaRatio(10, 1))
    collapsed = CheckpointRecord(10, net, NaRatio(10, 0))
    assert stop_when_infinite(collapsed, [finite, collapsed])
    assert not stop_when_infinite(finite, [finite])
    # all-normal before any finite checkpoint: keep training
    assert not stop_when_infinite(collapsed, [collapsed])


def test_losses_start_near_chance():
    rows, val = data()
    s = train_gan(rows, val, cfg(max_epochs=2))
    # two independent units at p~0.5: ln 2 each
    assert abs(s.log[0].d_loss - 2 * math.log(2)) < 0.5


@pytest.mark.parametrize("arch", ["cnn_d", "dense_d"])
@pytest.mark.parametrize("noise", ["normal", "uniform01"])
def test_variants_train(arch, noise):
    rows, val = data()
    s = train_gan(rows, val, cfg(d_arch=arch, noise=noise, max_epochs=2))
    assert len(s.records) == 1
    assert s.records[0].params.arch == arch


def test_minimax_loss_variant_runs():
    rows, val = data()
    s = train_gan(rows, val, cfg(g_loss="minimax", max_epochs=2))
    assert s.log[0].g_loss < 0


def test_noise_modes():
    rng = np.random.default_rng(0)
    z = sample_noise(20000, 3, rng, "uniform01")
    assert z.min() >= 0 and z.max() < 1
    assert abs(z.mean() - 0.5) < 0.01
    z = sample_noise(20000, 3, rng, "normal")
    assert abs(z.std() - 1) < 0.02
    with pytest.raises(ValueError):
        sample_noise(2, 3, rng, "cauchy")


def test_config_validation():
    with pytest.raises(ValueError):
        GanConfig(g_lr=0)
    with pytest.raises(ValueError):
        GanConfig(max_epochs=3, checkpoint_interval=5)
    with pytest.raises(ValueError):
        GanConfig(d_arch="rnn")


def test_bad_window_shape():
    rows, val = data()
    with pytest.raises(ValueError, match="shape"):
        train_gan(rows[:, :10], val, cfg())


def test_divergence_is_reported_with_advice(monkeypatch):
    rows, val = data()

    def blow_up(state, grads, lr):
        raise nn.DivergedError("diverged: non-finite gradient")

    monkeypatch.setattr(nn, "optimizer_step", blow_up)
    with pytest.raises(nn.DivergedError, match="reduce learning rates"):
        train_gan(rows, val, cfg(max_epochs=2))


def test_non_finite_windows_rejected():
    rows, val = data()
    rows[3, 4] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        train_gan(rows, val, cfg())


def test_series_save_and_load(tmp_path):
    rows, val = data()
    s = train_gan(rows, val, cfg())
    s.save(tmp_path)
    back = CheckpointSeries.load(tmp_path)
    assert back.epochs() == s.epochs()
    assert all(a.params.same_weights(b.params) for a, b in zip(s.records, back.records))
    assert [r.na for r in back.records] == [r.na for r in s.records]
    header = (tmp_path / "train_log.csv").read_text().splitlines()[0]
    assert header == "epoch,d_loss,g_loss,na_ratio,anomaly_count"


def test_write_log_formats_infinite_ratio(tmp_path):
    from gandetect.training import EpochLog

    write_log([EpochLog(5, 1.0, 2.0, math.inf, 0)], tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text().splitlines()[1] == "5,1,2,inf,0"
