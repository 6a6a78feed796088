"""Drive the whole workflow through the command line and compare two runs.

Equivalent shell session::

    numtabench ingest   --config run.yaml
    numtabench split    --config run.yaml
    numtabench train    --config run.yaml --model desk_resnet
    numtabench evaluate --config run.yaml --model desk_resnet
    numtabench compare  runs/desk_resnet runs/desk_efficientnet --out runs/comparison
"""

# %%
import tempfile
from pathlib import Path

import yaml

from numtabench.cli import main
from numtabench.synthetic import write_numta_like

work = Path(tempfile.mkdtemp())
root = write_numta_like(work / "numta", per_class=16, seed=2)
config = work / "run.yaml"
config.write_text(yaml.safe_dump({
    "dataset_root": str(root),
    "source_tags": ["a"],
    "split": {"seed": 0, "newdata_fraction": 0.5},
    "preprocess": "tf",
    "train": {"epochs": 3},
    "output_dir": str(work / "runs"),
}))

# %% one run directory per model kind
for kind in ("desk_resnet", "desk_efficientnet"):
    for command in ("ingest", "split", "train", "evaluate"):
        assert main([command, "--config", str(config), "--model", kind]) == 0

# %% ranking, bar chart, test curves and the first-to-last epoch deltas
runs = [str(work / "runs" / k) for k in ("desk_resnet", "desk_efficientnet")]
main(["compare", *runs, "--out", str(work / "runs" / "comparison")])
print(sorted(p.name for p in (work / "runs" / "comparison").iterdir()))
print((work / "runs" / "comparison" / "epoch_delta.csv").read_text())
