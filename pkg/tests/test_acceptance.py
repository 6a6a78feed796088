"""Acceptance criteria 1-8, one test each, each reporting a PASS/FAIL line.

Criterion 9 (full-scale fine-tuning of the real EfficientNet-B0 with
ImageNet weights on a 17,022-image NumtaDB subset, expected test accuracy
0.96 +- 0.03) needs the real dataset and a GPU for hours; it is documented in
the README and skipped here.
"""

import math
import random
import time
from pathlib import Path

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from conftest import ACCEPTANCE_LINES
from numtabench.datasetio import (
    DatasetManifest,
    SampleRecord,
    SplitSpec,
    scan_sources,
    stratified_split,
    subsample,
    validate_and_clean,
)
from numtabench.metrics import ClassMetrics, build_report, macro_average, round_half_up, weighted_average
from numtabench.models import DESK_KINDS, FULL_KINDS, build_model, forward
from numtabench.preprocess import IMAGENET_BGR_MEANS, PreprocessMode, preprocess_batch, undo_caffe
from numtabench.reporting import epoch_delta
from numtabench.synthetic import write_numta_like
from numtabench.training import EpochHistory, TrainConfig, train


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def brute_force(y_true, y_pred, k=10):
    per = []
    for c in range(k):
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        pr = tp / (tp + fp) if tp + fp else 0.0
        rc = tp / (tp + fn) if tp + fn else 0.0
        per.append((pr, rc, 2 * pr * rc / (pr + rc) if pr + rc else 0.0, tp + fn))
    n = len(y_true)
    fields = [v for row in per for v in row]
    fields.append(sum(t == p for t, p in zip(y_true, y_pred)) / n)
    fields += [sum(row[i] for row in per) / k for i in range(3)]
    fields += [sum(row[i] * row[3] for row in per) / n for i in range(3)]
    fields.append(n)
    return fields


def report_fields(rep):
    fields = [v for m in rep.per_class for v in (m.precision, m.recall, m.f1, m.support)]
    return fields + [rep.accuracy, *rep.macro_avg, *rep.weighted_avg, rep.total_support]


def test_criterion_1_metric_oracle_equivalence():
    r = random.Random(2024)
    worst = 0.0
    for _ in range(1000):
        n = r.randint(1, 500)
        yt = [r.randrange(10) for _ in range(n)]
        skill = r.random()
        yp = [t if r.random() < skill else r.randrange(10) for t in yt]
        got, want = report_fields(build_report(yt, yp)), brute_force(yt, yp)
        worst = max(worst, max(abs(a - b) for a, b in zip(got, want)))
    verdict(1, "metric oracle equivalence", worst <= 1e-9, f"1000 instances, max abs diff {worst:.1e}")


PUBLISHED_F1 = {
    "inceptionv3": ([0.97, 0.84, 0.90, 0.85, 0.93, 0.88, 0.84, 0.90, 0.93, 0.77], "0.88", "0.89"),
    "efficientnetb0": ([0.98, 0.96, 0.98, 0.94, 0.98, 0.94, 0.94, 0.98, 0.97, 0.92], "0.96", "0.96"),
    "resnet50": ([0.97, 0.92, 0.96, 0.90, 0.96, 0.93, 0.92, 0.95, 0.98, 0.88], "0.94", "0.94"),
}
SUPPORTS = [485, 477, 481, 221, 402, 457, 279, 201, 200, 202]


def test_criterion_2_published_aggregate_replay():
    results, ok = [], True
    for name, (f1s, macro_want, weighted_want) in PUBLISHED_F1.items():
        ms = [ClassMetrics(c, f, f, f, s) for c, (f, s) in enumerate(zip(f1s, SUPPORTS))]
        macro, weighted = macro_average(ms)[2], weighted_average(ms)[2]
        got = (round_half_up(macro), round_half_up(weighted))
        ok &= got == (macro_want, weighted_want)
        results.append(f"{name} {macro:.4f}/{weighted:.4f}->{got[0]}/{got[1]}")
    ms = [ClassMetrics(c, f, f, f, s) for c, (f, s) in enumerate(zip(PUBLISHED_F1["inceptionv3"][0], SUPPORTS))]
    ok &= abs(macro_average(ms)[2] - 0.881) < 1e-12 and abs(weighted_average(ms)[2] - 3024.70 / 3405) < 1e-12
    verdict(2, "published aggregate replay", ok, "; ".join(results))


def test_criterion_3_epoch_delta_replay():
    rows = [("inceptionv3", 0.75, 0.90, "0.15"), ("efficientnetb0", 0.91, 0.96, "0.05"), ("resnet50", 0.88, 0.94, "0.06")]
    ok, shown = True, []
    for name, first, last, want in rows:
        h = EpochHistory()
        for i in range(20):
            h.append(1.0, 0.5, 1.0, first if i == 0 else last if i == 19 else 0.5 * (first + last))
        d = epoch_delta(h, name)
        value = float(want)
        ok &= round_half_up(d.difference) == want and abs(d.difference - value) < 1e-12
        ok &= d.difference == d.accuracy_at_last - d.accuracy_at_1
        shown.append(f"{name} {round_half_up(d.difference)}")
    verdict(3, "epoch-delta replay", ok, ", ".join(shown))


def test_criterion_4_preprocessing_invariants():
    rng = np.random.default_rng(4)
    ok = True
    lo, hi = 1.0, -1.0
    for _ in range(10):
        batch = rng.integers(0, 256, (1000, 96, 96, 3), dtype=np.uint8)
        ok &= np.array_equal(undo_caffe(preprocess_batch(batch, "caffe")), batch)
        x = preprocess_batch(batch, "tf")
        lo, hi = min(lo, float(x.min())), max(hi, float(x.max()))
    ok &= lo >= -1.0 and hi <= 1.0
    const = np.empty((1, 96, 96, 3), np.uint8)
    const[...] = (10, 20, 30)
    x = preprocess_batch(const, PreprocessMode("caffe"))
    m_b, _, m_r = IMAGENET_BGR_MEANS
    swap = np.allclose(x[..., 0], 30 - m_b) and np.allclose(x[..., 2], 10 - m_r)
    ok &= swap
    verdict(4, "preprocessing invariants", ok,
            f"caffe round trip exact on 10000 images, tf range [{lo:.3f}, {hi:.3f}], BGR swap {swap}")


def test_criterion_5_model_shape_and_normalization():
    x = np.random.default_rng(5).uniform(-1, 1, (4, 96, 96, 3)).astype(np.float32)
    worst, ok = 0.0, True
    for kind in DESK_KINDS + FULL_KINDS:
        p = forward(build_model(kind), x)
        ok &= p.shape == (4, 10) and bool(np.all(p >= 0))
        worst = max(worst, float(np.abs(p.sum(1) - 1).max()))
    ok &= worst <= 1e-5
    verdict(5, "model shape/normalization", ok, f"6 kinds -> 4x10, max |row sum - 1| {worst:.1e}")


def gradient_errors(kind: str, step: float, n_params: int = 20) -> list[float]:
    m = build_model(kind).double().train()
    gen = torch.Generator().manual_seed(0)
    x = torch.rand(2, 3, 96, 96, generator=gen, dtype=torch.float64) * 2 - 1
    y = torch.tensor([3, 7])

    def loss():
        return F.cross_entropy(m(x), y)

    m.zero_grad()
    loss().backward()
    params = list(m.parameters())
    rng = np.random.default_rng(0)
    errs = []
    with torch.no_grad():
        for _ in range(n_params):
            p = params[rng.integers(len(params))]
            i = int(rng.integers(p.numel()))
            analytic = p.grad.view(-1)[i].item()
            old = p.view(-1)[i].item()
            p.view(-1)[i] = old + step
            up = loss().item()
            p.view(-1)[i] = old - step
            down = loss().item()
            p.view(-1)[i] = old
            numeric = (up - down) / (2 * step)
            errs.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return errs


def test_criterion_6_gradient_check():
    # smooth (SiLU) variant at the stated step; ReLU/max-pool variants need a step
    # small enough not to cross their kinks
    steps = {"desk_efficientnet": 1e-3, "desk_resnet": 1e-6, "desk_inception": 1e-6}
    worst = {kind: max(gradient_errors(kind, step)) for kind, step in steps.items()}
    ok = all(v <= 1e-3 for v in worst.values())
    verdict(6, "gradient check", ok, ", ".join(f"{k}@{steps[k]:g} {v:.1e}" for k, v in worst.items()))


@pytest.mark.slow
def test_criterion_7_overfit_sanity(tmp_path):
    root = write_numta_like(tmp_path, per_class=32, tags=("a",), seed=1)
    manifest, _ = validate_and_clean(scan_sources(root, {"a"}))
    split = stratified_split(manifest, SplitSpec(seed=0, train_fraction=0.8, newdata_fraction=0.0))
    subset = subsample(split.train, 256, seed=0)
    start = time.perf_counter()
    result = train(build_model("desk_efficientnet"), subset, split.test,
                   TrainConfig(learning_rate=1e-4, batch_size=32, epochs=20, seed=0), "caffe")
    h = result.history
    ok = len(subset) == 256 and h.train_accuracy[-1] >= 0.95 and h.train_loss[-1] < h.train_loss[0]
    verdict(7, "overfit sanity", ok,
            f"256 samples, epoch-20 train acc {h.train_accuracy[-1]:.3f}, train loss "
            f"{h.train_loss[0]:.3f} -> {h.train_loss[-1]:.3f}, {time.perf_counter() - start:.0f}s")


def test_criterion_8_split_arithmetic():
    records = tuple(SampleRecord(Path(f"/s/{i}.png"), i % 10, "a", str(i)) for i in range(17022))
    r = stratified_split(DatasetManifest(records), SplitSpec(seed=0, train_fraction=0.8, newdata_fraction=0.0))
    sizes = (len(r.train), len(r.test))
    verdict(8, "split arithmetic", sizes == (13617, 3405) and math.isclose(sum(sizes), 17022),
            f"17022 -> {sizes[0]} / {sizes[1]}")


@pytest.mark.skip(reason="criterion 9: full-scale GPU run on real NumtaDB, documented in README")
def test_criterion_9_full_scale_reproduction():
    pass
