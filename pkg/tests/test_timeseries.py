import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gandetect.timeseries import (LabeledAnomalies, SeriesFormatError, TimeSeries, extract_windows,
                                  load_labels, load_series, save_labels, save_series, window_midpoint,
                                  window_midpoints, zero_mean)


def naive_windows(values, wl):
    rows = []
    for i in range(len(values) - wl + 1):
        w = np.array(values[i:i + wl], dtype=np.float64)
        rows.append(w - w.mean())
    return np.array(rows)


def make_series(values, start=0.0, step=1.0, seg="MP1", insp="1"):
    values = np.asarray(values, dtype=np.float64)
    return TimeSeries(start + step * np.arange(len(values)), values, seg, insp)


def test_extract_windows_matches_naive_loop_on_random_series():
    rng = np.random.default_rng(0)
    for _ in range(100):
        length = int(rng.integers(2, 300))
        wl = int(rng.integers(1, length + 1))
        values = rng.normal(scale=rng.uniform(0.1, 100), size=length)
        wm = extract_windows(make_series(values), wl)
        assert wm.rows.shape == (length - wl + 1, wl)
        assert np.array_equal(wm.rows, naive_windows(values, wl))


@given(st.integers(2, 200), st.data())
def test_window_count_is_length_minus_wl_plus_one(length, data):
    wl = data.draw(st.integers(1, length))
    wm = extract_windows(make_series(np.zeros(length)), wl)
    assert len(wm) == length - wl + 1


def test_windows_are_zero_mean():
    values = np.arange(10.0) ** 2
    rows = extract_windows(make_series(values), 4).rows
    assert np.allclose(rows.mean(axis=1), 0, atol=1e-12)


def test_window_of_full_length_is_single_row():
    values = [1.0, 2.0, 6.0]
    rows = extract_windows(make_series(values), 3).rows
    assert np.array_equal(rows, [[-2.0, -1.0, 3.0]])


def test_series_shorter_than_window_is_rejected():
    with pytest.raises(ValueError, match="shorter than window"):
        extract_windows(make_series([1.0, 2.0]), 3)


def test_zero_mean_single_row():
    assert np.array_equal(zero_mean(np.array([[1.0, 3.0]])), [[-1.0, 1.0]])


def test_midpoint_uses_centre_sample_position():
    s = make_series(np.zeros(20), start=100.0, step=2.0)
    # window 3..12 of length 10, centre sample index 3 + 5
    assert window_midpoint(3, 10, s) == 116.0
    assert np.array_equal(window_midpoints([0, 1], 10, s), [110.0, 112.0])


def test_midpoint_out_of_range():
    s = make_series(np.zeros(10))
    with pytest.raises(IndexError):
        window_midpoint(8, 5, s)


@pytest.mark.parametrize("positions", [[0.0, 1.0, 3.0], [0.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
def test_non_uniform_or_unordered_positions_rejected(positions):
    with pytest.raises(ValueError):
        TimeSeries(np.array(positions), np.zeros(3), "s", "1")


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        TimeSeries(np.arange(3.0), np.zeros(4), "s", "1")


def test_series_arrays_are_read_only():
    s = make_series([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    s = make_series(rng.normal(size=50), start=5280.0, step=1.0, seg="MP2", insp="3")
    path = tmp_path / "MP2_3.csv"
    save_series(s, path)
    back = load_series(path)
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.positions, s.positions)
    assert (back.segment_id, back.inspection_id) == ("MP2", "3")
    assert path.read_text().splitlines()[0] == "position,value"


def test_bad_csv_reports_line(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("position,value\n0,1\n1,abc\n")
    with pytest.raises(SeriesFormatError, match=":3"):
        load_series(path)


def test_bad_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("pos,val\n0,1\n1,2\n")
    with pytest.raises(SeriesFormatError):
        load_series(path)


def test_labels_roundtrip(tmp_path):
    labels = LabeledAnomalies((10.5, 200.0), "MP1", "3")
    path = tmp_path / "MP1_3_labels.csv"
    save_labels(labels, path)
    back = load_labels(path, "MP1", "3")
    assert back.positions == labels.positions
    assert path.read_text().splitlines()[0] == "position"


def test_labels_outside_series_are_rejected():
    s = make_series(np.zeros(10))
    with pytest.raises(ValueError):
        LabeledAnomalies((20.0,), "MP1", "1").check_within(s)
