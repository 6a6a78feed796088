"""Confusion matrices, per-class metrics, averages and the text report."""

# %%
import numpy as np

from numtabench.metrics import (
    ClassMetrics,
    build_report,
    confusion,
    macro_average,
    micro_prf,
    render_report_text,
    weighted_average,
)

rng = np.random.default_rng(0)
y_true = rng.integers(0, 10, 500)
y_pred = np.where(rng.random(500) < 0.85, y_true, rng.integers(0, 10, 500))

cm = confusion(y_true, y_pred)
print(cm.counts)
print("micro precision/recall/f1:", micro_prf(cm))

# %% the familiar report layout, rounded half-up to two decimals
report = build_report(y_true, y_pred)
print(render_report_text(report))

# %% replaying the Inception-v3 report: macro ignores support, weighted uses it
f1 = [0.97, 0.84, 0.90, 0.85, 0.93, 0.88, 0.84, 0.90, 0.93, 0.77]
support = [485, 477, 481, 221, 402, 457, 279, 201, 200, 202]
rows = [ClassMetrics(c, f, f, f, s) for c, (f, s) in enumerate(zip(f1, support))]
print("macro f1 %.4f, weighted f1 %.4f" % (macro_average(rows)[2], weighted_average(rows)[2]))
