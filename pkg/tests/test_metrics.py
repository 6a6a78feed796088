import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import classification_report as sk_report

from numtabench.metrics import (
    ClassificationReport,
    ClassMetrics,
    EmptyList,
    EmptyMatrix,
    LabelOutOfRange,
    LengthMismatch,
    ZeroSupport,
    build_report,
    confusion,
    macro_average,
    micro_accuracy,
    micro_prf,
    per_class_metrics,
    render_report_text,
    round_half_up,
    weighted_average,
)


def tally(y_true, y_pred, k=10):
    counts = [[0] * k for _ in range(k)]
    for t, p in zip(y_true, y_pred):
        counts[t][p] += 1
    return counts


def oracle_report(y_true, y_pred, k=10):
    """Straight-line recomputation with Python scalars only."""
    out = []
    for c in range(k):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out.append((prec, rec, f1, tp + fn))
    n = len(y_true)
    acc = sum(t == p for t, p in zip(y_true, y_pred)) / n
    macro = tuple(sum(row[i] for row in out) / k for i in range(3))
    weighted = tuple(sum(row[i] * row[3] for row in out) / n for i in range(3))
    return out, acc, macro, weighted


def assert_matches_oracle(report, y_true, y_pred, tol=1e-9):
    per, acc, macro, weighted = oracle_report(y_true, y_pred)
    for m, (p, r, f, s) in zip(report.per_class, per):
        assert abs(m.precision - p) <= tol and abs(m.recall - r) <= tol and abs(m.f1 - f) <= tol
        assert m.support == s
    assert abs(report.accuracy - acc) <= tol
    assert all(abs(a - b) <= tol for a, b in zip(report.macro_avg, macro))
    assert all(abs(a - b) <= tol for a, b in zip(report.weighted_avg, weighted))
    assert report.total_support == len(y_true)


# confusion

def test_confusion_identity_pattern():
    cm = confusion([0, 1, 2], [0, 1, 2])
    assert np.diag(cm.counts).tolist() == [1, 1, 1] + [0] * 7
    assert cm.counts.sum() == cm.total == 3


def test_confusion_off_diagonal():
    cm = confusion([0, 0], [1, 1])
    expected = np.zeros((10, 10), int)
    expected[0, 1] = 2
    assert np.array_equal(cm.counts, expected)


def test_confusion_matches_tally_on_10000_pairs():
    r = random.Random(7)
    yt = [r.randrange(10) for _ in range(10_000)]
    yp = [r.randrange(10) for _ in range(10_000)]
    assert confusion(yt, yp).counts.tolist() == tally(yt, yp)


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([0, 1], [0])
    with pytest.raises(LabelOutOfRange):
        confusion([0, 10], [0, 1])
    with pytest.raises(LabelOutOfRange):
        confusion([0, 1], [-1, 1])


def test_tp_fp_fn_from_matrix():
    cm = confusion([0, 0, 1, 1, 2], [0, 1, 1, 1, 0])
    assert cm.tp[:3].tolist() == [1, 2, 0]
    assert cm.fp[:3].tolist() == [1, 1, 0]
    assert cm.fn[:3].tolist() == [1, 0, 1]


# per-class metrics

def test_precision_recall_f1_formula():
    # class 0: TP=3, FP=1, FN=0
    m = per_class_metrics(confusion([0, 0, 0, 1], [0, 0, 0, 0]))[0]
    assert m.precision == 0.75 and m.recall == 1.0
    assert m.f1 == pytest.approx(0.857143, abs=1e-6)


def test_f1_of_half_and_one():
    # class 0: TP=1, FP=1, FN=0
    m = per_class_metrics(confusion([0, 1], [0, 0]))[0]
    assert (m.precision, m.recall) == (0.5, 1.0)
    assert m.f1 == pytest.approx(0.666667, abs=1e-6)


def test_absent_class_is_all_zero():
    ms = per_class_metrics(confusion([0, 1], [0, 1]))
    assert (ms[7].precision, ms[7].recall, ms[7].f1, ms[7].support) == (0.0, 0.0, 0.0, 0)


# aggregates

FIG3_F1 = [0.97, 0.84, 0.90, 0.85, 0.93, 0.88, 0.84, 0.90, 0.93, 0.77]
FIG3_SUPPORT = [485, 477, 481, 221, 402, 457, 279, 201, 200, 202]
FIG5_F1 = [0.98, 0.96, 0.98, 0.94, 0.98, 0.94, 0.94, 0.98, 0.97, 0.92]


def column(f1s, supports=None):
    supports = supports or [1] * len(f1s)
    return [ClassMetrics(i, f, f, f, s) for i, (f, s) in enumerate(zip(f1s, supports))]


def test_macro_fig3():
    macro = macro_average(column(FIG3_F1, FIG3_SUPPORT))[2]
    assert macro == pytest.approx(0.881, abs=1e-12)
    assert round_half_up(macro) == "0.88"


def test_macro_fig5():
    macro = macro_average(column(FIG5_F1))[2]
    assert macro == pytest.approx(0.959, abs=1e-12)
    assert round_half_up(macro) == "0.96"


def test_weighted_fig3():
    w = weighted_average(column(FIG3_F1, FIG3_SUPPORT))[2]
    assert sum(FIG3_SUPPORT) == 3405
    assert w == pytest.approx(3024.70 / 3405, abs=1e-12)
    assert round_half_up(w) == "0.89"


def test_identical_classes_macro_is_identity():
    ms = [ClassMetrics(i, 0.3, 0.6, 0.4, i + 1) for i in range(10)]
    assert macro_average(ms) == pytest.approx((0.3, 0.6, 0.4), abs=1e-15)


def test_weighted_equals_macro_for_equal_support():
    ms = column(FIG3_F1, [5] * 10)
    assert weighted_average(ms) == pytest.approx(macro_average(ms), abs=1e-15)


def test_weighted_single_supported_class():
    ms = [ClassMetrics(i, 0.1 * i, 0.05 * i, 0.07 * i, 40 if i == 6 else 0) for i in range(10)]
    assert weighted_average(ms) == pytest.approx((0.6, 0.3, 0.42), abs=1e-15)


def test_aggregate_errors():
    with pytest.raises(EmptyList):
        macro_average([])
    with pytest.raises(ZeroSupport):
        weighted_average(column(FIG3_F1, [0] * 10))
    with pytest.raises(EmptyMatrix):
        micro_accuracy(confusion([], []))


def test_micro_accuracy_diagonal():
    assert micro_accuracy(confusion(list(range(10)), list(range(10)))) == 1.0


def test_micro_accuracy_random_predictions():
    r = np.random.default_rng(11)
    yt = np.repeat(np.arange(10), 10_000)
    yp = r.integers(0, 10, size=yt.size)
    assert abs(micro_accuracy(confusion(yt, yp)) - 0.1) <= 0.01


# report

def test_perfect_report():
    y = list(range(10)) * 5
    rep = build_report(y, y)
    assert rep.accuracy == 1.0 and not rep.zero_division
    assert all((m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0) for m in rep.per_class)
    assert rep.macro_avg == rep.weighted_avg == (1.0, 1.0, 1.0)
    text = render_report_text(rep)
    numbers = [tok for tok in text.split() if "." in tok]
    assert numbers and set(numbers) == {"1.00"}


def test_single_sample_report():
    rep = build_report([4], [4])
    assert rep.accuracy == 1.0
    assert rep.per_class[4].f1 == 1.0
    assert [m.support for m in rep.per_class] == [0] * 4 + [1] + [0] * 5
    assert rep.zero_division


def test_random_500_matches_oracle():
    r = random.Random(500)
    yt = [r.randrange(10) for _ in range(500)]
    yp = [t if r.random() < 0.6 else r.randrange(10) for t in yt]
    assert_matches_oracle(build_report(yt, yp), yt, yp)


def test_agrees_with_sklearn():
    r = random.Random(9)
    yt = [r.randrange(10) for _ in range(300)]
    yp = [t if r.random() < 0.5 else r.randrange(10) for t in yt]
    sk = sk_report(yt, yp, labels=list(range(10)), output_dict=True, zero_division=0)
    rep = build_report(yt, yp)
    for m in rep.per_class:
        row = sk[str(m.label)]
        assert (m.precision, m.recall, m.f1, m.support) == pytest.approx(
            (row["precision"], row["recall"], row["f1-score"], row["support"]), abs=1e-12)
    assert rep.macro_avg[2] == pytest.approx(sk["macro avg"]["f1-score"], abs=1e-12)
    assert rep.weighted_avg[2] == pytest.approx(sk["weighted avg"]["f1-score"], abs=1e-12)
    assert rep.accuracy == pytest.approx(sk["accuracy"], abs=1e-12)


labels = st.integers(0, 9)
pairs = st.lists(st.tuples(labels, labels), min_size=1, max_size=200)


@settings(max_examples=200, deadline=None)
@given(pairs)
def test_property_oracle_and_micro_identity(data):
    yt, yp = [t for t, _ in data], [p for _, p in data]
    rep = build_report(yt, yp)
    assert_matches_oracle(rep, yt, yp)
    cm = confusion(yt, yp)
    p, r, f = micro_prf(cm)
    assert p == r == f == micro_accuracy(cm) == rep.accuracy


@settings(max_examples=200, deadline=None)
@given(pairs)
def test_property_bounds_and_f1_identity(data):
    rep = build_report([t for t, _ in data], [p for _, p in data])
    for m in rep.per_class:
        assert 0.0 <= min(m.precision, m.recall, m.f1) and max(m.precision, m.recall, m.f1) <= 1.0
        assert abs(m.f1 * (m.precision + m.recall) - 2 * m.precision * m.recall) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(pairs, st.randoms(use_true_random=False))
def test_property_permutation_invariance(data, r):
    shuffled = list(data)
    r.shuffle(shuffled)
    a = build_report([t for t, _ in data], [p for _, p in data])
    b = build_report([t for t, _ in shuffled], [p for _, p in shuffled])
    assert a.to_dict() == b.to_dict()


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20), st.randoms(use_true_random=False))
def test_property_equal_supports_macro_equals_weighted(per_class, r):
    yt = [c for c in range(10) for _ in range(per_class)]
    yp = [r.randrange(10) for _ in yt]
    rep = build_report(yt, yp)
    assert rep.macro_avg == pytest.approx(rep.weighted_avg, abs=1e-12)


# rendering and serialization

def test_round_half_up():
    assert round_half_up(0.8850) == "0.89"
    assert round_half_up(0.125) == "0.13"
    assert round_half_up(0.884999) == "0.88"
    assert round_half_up(1.0) == "1.00"


FIG5 = {
    "precision": [0.97, 0.99, 0.99, 0.92, 0.97, 0.92, 0.93, 0.98, 0.99, 0.92],
    "recall": [0.99, 0.93, 0.97, 0.96, 0.99, 0.96, 0.95, 0.99, 0.96, 0.92],
}


def test_fig5_macro_row_text():
    per = [ClassMetrics(c, FIG5["precision"][c], FIG5["recall"][c], FIG5_F1[c], FIG3_SUPPORT[c])
           for c in range(10)]
    rep = ClassificationReport(per, 0.96, macro_average(per), weighted_average(per), 3405)
    macro_line = next(line for line in render_report_text(rep).splitlines() if "macro avg" in line)
    assert macro_line.split()[2:] == ["0.96", "0.96", "0.96", "3405"]


def test_text_layout():
    rep = build_report([0, 1, 2, 2], [0, 1, 2, 1])
    lines = render_report_text(rep).splitlines()
    assert lines[0].split() == ["precision", "recall", "f1-score", "support"]
    assert [line.split()[0] for line in lines[2:12]] == [str(c) for c in range(10)]
    acc = lines[13].split()
    assert acc == ["accuracy", "0.75", "4"]
    assert lines[14].lstrip().startswith("macro avg")
    assert lines[15].lstrip().startswith("weighted avg")


def test_json_and_csv_round_trip(tmp_path):
    r = random.Random(3)
    yt = [r.randrange(10) for _ in range(97)]
    yp = [r.randrange(10) for _ in range(97)]
    rep = build_report(yt, yp)
    rep.to_json(tmp_path / "r.json")
    assert ClassificationReport.from_json(tmp_path / "r.json").to_dict() == rep.to_dict()
    rep.to_csv(tmp_path / "r.csv")
    back = ClassificationReport.from_csv(tmp_path / "r.csv")
    assert back.per_class == rep.per_class
    assert (back.accuracy, back.macro_avg, back.weighted_avg, back.total_support) == (
        rep.accuracy, rep.macro_avg, rep.weighted_avg, rep.total_support)
    assert set(rep.to_dict()) >= {"per_class", "accuracy", "macro_avg", "weighted_avg", "total_support"}
    assert math.isclose(sum(m.support for m in rep.per_class), rep.total_support)
