import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codemix.metrics import EvalReport, confusion, macro_f1, per_class_scores


def brute_macro_f1(gold, pred, k):
    scores = []
    for c in range(k):
        tp = sum(g == c and p == c for g, p in zip(gold, pred))
        fp = sum(g != c and p == c for g, p in zip(gold, pred))
        fn = sum(g == c and p != c for g, p in zip(gold, pred))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(scores) / k


def test_worked_example():
    cm = confusion([0, 0, 1, 2], [0, 1, 1, 1], 3)
    np.testing.assert_array_equal(cm.counts, [[1, 1, 0], [0, 1, 0], [0, 1, 0]])
    p, r, f = per_class_scores(cm)
    np.testing.assert_allclose(p, [1, 1 / 3, 0])
    np.testing.assert_allclose(r, [0.5, 1, 0])
    np.testing.assert_allclose(f, [2 / 3, 0.5, 0])
    assert abs(macro_f1(cm) - 0.38889) <= 1e-5


def test_perfect_and_all_wrong():
    gold = [0, 1, 2, 2, 1]
    assert macro_f1(confusion(gold, gold, 3)) == 1.0
    assert macro_f1(confusion(gold, [(g + 1) % 3 for g in gold], 3)) == 0.0


def test_zero_support_class_counts_as_zero():
    assert macro_f1(confusion([0, 1], [0, 1], 3)) == pytest.approx(2 / 3)


def test_validation():
    with pytest.raises(ValueError):
        confusion([0, 1], [0], 3)
    with pytest.raises(ValueError):
        confusion([0, 3], [0, 1], 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=40), st.randoms())
def test_matches_brute_force_and_is_order_free(pairs, rnd):
    gold, pred = map(list, zip(*pairs))
    f = macro_f1(confusion(gold, pred, 3))
    assert f == pytest.approx(brute_macro_f1(gold, pred, 3), abs=1e-12)
    rnd.shuffle(pairs)
    g2, p2 = map(list, zip(*pairs))
    assert macro_f1(confusion(g2, p2, 3)) == pytest.approx(f, abs=1e-12)


def test_random_predictor_near_one_third():
    rng = np.random.default_rng(99)
    gold = rng.integers(0, 3, 10_000)
    pred = rng.integers(0, 3, 10_000)
    assert abs(macro_f1(confusion(gold, pred, 3)) - 1 / 3) <= 0.02


def test_report_consistency():
    cm = confusion([0, 0, 1, 2, 2, 2], [0, 2, 1, 2, 2, 0], 3, ["positive", "negative", "neutral"])
    rep = EvalReport.from_confusion(cm, langid_accuracy=0.75)
    assert rep.macro_f1 == pytest.approx(np.mean(rep.f1))
    assert rep.support == [2, 1, 3]
    assert rep.accuracy == pytest.approx(4 / 6)
    text = rep.to_text()
    assert text.splitlines()[0] == f"macro_f1 {rep.macro_f1:.6f}"
    assert "langid_accuracy 0.750000" in text
    assert "support_neutral 3" in text
    d = json.loads(rep.to_json())
    assert d["classes"]["negative"]["f1"] == 1.0
    assert d["confusion"]["counts"] == cm.counts.tolist()
    assert rep.to_json() == EvalReport.from_confusion(cm, 0.75).to_json()
