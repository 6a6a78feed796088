"""Fine-tune a desk-scale model on the synthetic digits and plot its curves.

Takes about a minute on one CPU core.
"""

# %%
import tempfile
from pathlib import Path

from numtabench.datasetio import SplitSpec, scan_sources, stratified_split, validate_and_clean
from numtabench.models import build_model
from numtabench.reporting import render_plots
from numtabench.synthetic import write_numta_like
from numtabench.training import TrainConfig, evaluate_loss_acc, train

work = Path(tempfile.mkdtemp())
root = write_numta_like(work / "numta", per_class=32, seed=1)
manifest, _ = validate_and_clean(scan_sources(root, {"a"}))
split = stratified_split(manifest, SplitSpec(seed=0, newdata_fraction=0.0))
print("train/test:", len(split.train), len(split.test))

# %% Adam at 1e-4, categorical cross-entropy, every layer trainable
config = TrainConfig(learning_rate=1e-4, batch_size=32, epochs=10, seed=0)
result = train(build_model("desk_efficientnet"), split.train, split.test, config, mode="caffe")
for epoch, tl, ta, vl, va in result.history.rows():
    print(f"epoch {epoch:2d}  train {tl:.3f}/{ta:.3f}  test {vl:.3f}/{va:.3f}")
print(f"wall time {result.wall_time:.0f}s")

# %% loss.png, accuracy.png and history.csv
print(render_plots(result.history, work / "plots"))
print("final test loss/accuracy:", evaluate_loss_acc(result.model, split.test, "caffe"))
