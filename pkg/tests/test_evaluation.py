import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gandetect.evaluation import aggregate, f1_score, match_and_score, score_table


def brute_counts(defects, preds, r_t):
    tp = sum(1 for d in defects if any(abs(d - p) <= r_t for p in preds))
    fp = sum(1 for p in preds if not any(abs(d - p) <= r_t for d in defects))
    return tp, len(defects) - tp, fp


def test_worked_example():
    ev = match_and_score([15, 350, 351, 2710, 2711], [398, 2759], 100)
    assert ev.recall == 0.8
    assert ev.precision == 1.0
    assert (ev.tp, ev.fn, ev.fp) == (4, 1, 0)
    assert [m.matched for m in ev.matches] == [False, True, True, True, True]


def test_matches_all_pairs_oracle():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = rng.uniform(0, 1000, size=int(rng.integers(0, 12)))
        p = rng.uniform(0, 1000, size=int(rng.integers(0, 12)))
        if rng.random() < 0.2:
            # exact-boundary distances
            p = np.concatenate([p, d[:2] + 100.0])
        r = float(rng.choice([50.0, 100.0, 150.0, 200.0]))
        ev = match_and_score(d, p, r)
        assert (ev.tp, ev.fn, ev.fp) == brute_counts(d, p, r)


@given(st.lists(st.floats(0, 1e4), max_size=15), st.lists(st.floats(0, 1e4), max_size=15),
       st.floats(1, 500), st.floats(0, 500))
def test_scores_monotone_in_tolerance(defects, preds, r, extra):
    a = match_and_score(defects, preds, r)
    b = match_and_score(defects, preds, r + extra)
    if a.recall is not None:
        assert b.recall >= a.recall
    if a.precision is not None:
        assert b.precision >= a.precision


def test_recall_precision_on_random_cases_are_monotone():
    rng = np.random.default_rng(1)
    for _ in range(300):
        d = rng.uniform(0, 1000, size=int(rng.integers(1, 10)))
        p = rng.uniform(0, 1000, size=int(rng.integers(1, 10)))
        prev_r = prev_p = -1.0
        for r in (25.0, 50.0, 100.0, 150.0, 200.0, 400.0):
            ev = match_and_score(d, p, r)
            assert ev.recall >= prev_r and ev.precision >= prev_p
            prev_r, prev_p = ev.recall, ev.precision


def test_empty_predictions_give_zero_recall():
    ev = match_and_score([100.0, 200.0], [], 100)
    assert ev.recall == 0.0
    assert ev.precision is None
    assert ev.f1 is None


def test_no_defects():
    ev = match_and_score([], [5.0, 6.0], 100)
    assert ev.recall is None
    assert ev.precision == 0.0


def test_one_prediction_covers_several_defects():
    ev = match_and_score([100.0, 150.0, 190.0], [140.0], 60)
    assert (ev.tp, ev.fn, ev.fp) == (3, 0, 0)


def test_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        match_and_score([1.0], [1.0], 0)


def test_f1():
    assert f1_score(0.8, 1.0) == pytest.approx(2 * 0.8 / 1.8)
    assert f1_score(0.0, 0.0) == 0.0
    assert f1_score(None, 1.0) is None


def test_aggregate_micro_and_macro():
    a = match_and_score([10.0, 500.0], [12.0], 100)  # R 0.5, P 1
    b = match_and_score([10.0], [10.0, 900.0], 100)  # R 1, P 0.5
    agg = aggregate([a, b])
    assert (agg.micro.tp, agg.micro.fn, agg.micro.fp) == (2, 1, 1)
    assert agg.micro.recall == pytest.approx(2 / 3)
    assert agg.micro.precision == pytest.approx(2 / 3)
    assert agg.macro_recall == pytest.approx(0.75)
    assert agg.macro_precision == pytest.approx(0.75)


def test_three_run_aggregation_is_hand_mean():
    runs = [match_and_score([0.0, 1000.0], preds, 100) for preds in ([0.0], [0.0, 1000.0], [500.0])]
    agg = aggregate(runs)
    assert agg.macro_recall == pytest.approx((0.5 + 1.0 + 0.0) / 3)
    assert agg.macro_precision == pytest.approx((1.0 + 1.0 + 0.0) / 3)


def test_mixed_tolerances_rejected():
    with pytest.raises(ValueError):
        aggregate([match_and_score([1.0], [1.0], 100), match_and_score([1.0], [1.0], 200)])


def test_score_table_layout():
    by_tol = {t: aggregate([match_and_score([15, 350, 351, 2710, 2711], [398, 2759], t)]) for t in (100, 150)}
    text = score_table({"wl100": by_tol}, (100, 150))
    lines = text.splitlines()
    assert lines[0] == "config,recall@100,precision@100,f1@100,recall@150,precision@150,f1@150"
    assert lines[1].startswith("wl100,0.800000,1.000000,0.888889,")
