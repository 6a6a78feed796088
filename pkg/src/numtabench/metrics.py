"""Confusion matrices and classification reports for single-label multiclass output.

Rows of a confusion matrix are true classes, columns predicted classes.
Zero denominators give 0.0 and set ``ClassificationReport.zero_division``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

NUM_CLASSES = 10


class LengthMismatch(ValueError):
    pass


class LabelOutOfRange(ValueError):
    pass


class EmptyList(ValueError):
    pass


class ZeroSupport(ValueError):
    pass


class EmptyMatrix(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.counts)

    @property
    def fp(self) -> np.ndarray:
        return self.counts.sum(axis=0) - self.tp

    @property
    def fn(self) -> np.ndarray:
        return self.counts.sum(axis=1) - self.tp


@dataclass(frozen=True)
class ClassMetrics:
    label: int
    precision: float
    recall: float
    f1: float
    support: int


Triple = tuple[float, float, float]


@dataclass
class ClassificationReport:
    per_class: list[ClassMetrics]
    accuracy: float
    macro_avg: Triple
    weighted_avg: Triple
    total_support: int
    zero_division: bool = False
    labels: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_class": [
                {"label": m.label, "precision": m.precision, "recall": m.recall, "f1": m.f1,
                 "support": m.support}
                for m in self.per_class
            ],
            "accuracy": self.accuracy,
            "macro_avg": dict(zip(("precision", "recall", "f1"), self.macro_avg)),
            "weighted_avg": dict(zip(("precision", "recall", "f1"), self.weighted_avg)),
            "total_support": self.total_support,
            "zero_division": self.zero_division,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ClassificationReport:
        def triple(t):
            return (t["precision"], t["recall"], t["f1"])

        per_class = [ClassMetrics(m["label"], m["precision"], m["recall"], m["f1"], m["support"])
                     for m in d["per_class"]]
        return cls(per_class, d["accuracy"], triple(d["macro_avg"]), triple(d["weighted_avg"]),
                   d["total_support"], d.get("zero_division", False))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_json(cls, path: str | Path) -> ClassificationReport:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "precision", "recall", "f1", "support"])
        for m in self.per_class:
            w.writerow([m.label, repr(m.precision), repr(m.recall), repr(m.f1), m.support])
        w.writerow(["accuracy", "", "", repr(self.accuracy), self.total_support])
        w.writerow(["macro avg", *map(repr, self.macro_avg), self.total_support])
        w.writerow(["weighted avg", *map(repr, self.weighted_avg), self.total_support])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> ClassificationReport:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        per_class, agg = [], {}
        for r in rows:
            if r["row"] in ("accuracy", "macro avg", "weighted avg"):
                agg[r["row"]] = r
            else:
                per_class.append(ClassMetrics(int(r["row"]), float(r["precision"]), float(r["recall"]),
                                              float(r["f1"]), int(r["support"])))

        def triple(r):
            return (float(r["precision"]), float(r["recall"]), float(r["f1"]))

        return cls(per_class, float(agg["accuracy"]["f1"]), triple(agg["macro avg"]),
                   triple(agg["weighted avg"]), int(agg["accuracy"]["support"]))


def confusion(y_true: Sequence[int], y_pred: Sequence[int], k: int = NUM_CLASSES) -> ConfusionMatrix:
    yt = np.asarray(y_true, dtype=np.int64).ravel()
    yp = np.asarray(y_pred, dtype=np.int64).ravel()
    if yt.shape != yp.shape:
        raise LengthMismatch(f"y_true has {yt.size} labels, y_pred {yp.size}")
    for name, y in (("y_true", yt), ("y_pred", yp)):
        if y.size and (y.min() < 0 or y.max() >= k):
            raise LabelOutOfRange(f"{name} has labels outside [0, {k})")
    counts = np.bincount(yt * k + yp, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = num.astype(np.float64)
    den = den.astype(np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def per_class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    tp, fp, fn = cm.tp, cm.fp, cm.fn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    support = cm.counts.sum(axis=1)
    return [
        ClassMetrics(c, float(precision[c]), float(recall[c]), float(f1[c]), int(support[c]))
        for c in range(cm.k)
    ]


def macro_average(metrics: Sequence[ClassMetrics]) -> Triple:
    """Unweighted mean over all classes, zero-support classes included."""
    if not metrics:
        raise EmptyList("no class metrics to average")
    arr = np.array([(m.precision, m.recall, m.f1) for m in metrics])
    return tuple(float(v) for v in arr.mean(axis=0))


def weighted_average(metrics: Sequence[ClassMetrics]) -> Triple:
    """Mean weighted by each class's support."""
    support = np.array([m.support for m in metrics], dtype=np.float64)
    if support.sum() <= 0:
        raise ZeroSupport("weighted average needs a positive total support")
    arr = np.array([(m.precision, m.recall, m.f1) for m in metrics])
    return tuple(float(v) for v in (support @ arr) / support.sum())


def micro_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    return float(np.trace(cm.counts) / cm.total)


def micro_prf(cm: ConfusionMatrix) -> Triple:
    """Micro precision, recall and F1 from pooled TP/FP/FN.

    For single-label data each of these equals :func:`micro_accuracy`.
    """
    tp, fp, fn = cm.tp.sum(), cm.fp.sum(), cm.fn.sum()
    if tp + fp == 0 or tp + fn == 0:
        raise EmptyMatrix("confusion matrix is empty")
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    # integer form of 2PR/(P+R), so each value is one correctly rounded division
    f1 = 2 * tp / (2 * tp + fp + fn)
    return float(p), float(r), float(f1)


def build_report(y_true: Sequence[int], y_pred: Sequence[int], k: int = NUM_CLASSES) -> ClassificationReport:
    cm = confusion(y_true, y_pred, k)
    per_class = per_class_metrics(cm)
    undefined = bool(np.any(cm.tp + cm.fp == 0) or np.any(cm.tp + cm.fn == 0))
    return ClassificationReport(
        per_class=per_class,
        accuracy=micro_accuracy(cm),
        macro_avg=macro_average(per_class),
        weighted_avg=weighted_average(per_class),
        total_support=cm.total,
        zero_division=undefined,
    )


def round_half_up(x: float, decimals: int = 2) -> str:
    q = Decimal(1).scaleb(-decimals)
    return str(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def render_report_text(report: ClassificationReport, decimals: int = 2) -> str:
    """Fixed-width text in the familiar precision/recall/f1-score/support layout."""
    names = [str(m.label) for m in report.per_class]
    width = max(len("weighted avg"), *(len(n) for n in names))
    col = max(9, decimals + 7)
    header = " " * width + "".join(h.rjust(col) for h in ("precision", "recall", "f1-score", "support"))

    def row(name, cells, support):
        return name.rjust(width) + "".join(c.rjust(col) for c in cells) + str(support).rjust(col)

    fmt = lambda v: round_half_up(v, decimals)  # noqa: E731
    lines = [header, ""]
    for m in report.per_class:
        lines.append(row(str(m.label), [fmt(m.precision), fmt(m.recall), fmt(m.f1)], m.support))
    lines.append("")
    lines.append(row("accuracy", ["", "", fmt(report.accuracy)], report.total_support))
    lines.append(row("macro avg", [fmt(v) for v in report.macro_avg], report.total_support))
    lines.append(row("weighted avg", [fmt(v) for v in report.weighted_avg], report.total_support))
    return "\n".join(lines) + "\n"
