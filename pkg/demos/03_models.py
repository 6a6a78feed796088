"""The three backbones, their desk-scale stand-ins, checkpoints and weight import."""

# %%
import tempfile
from pathlib import Path

import numpy as np

from numtabench.models import (
    DESK_KINDS,
    FULL_KINDS,
    build_model,
    forward,
    load_checkpoint,
    load_pretrained,
    parameter_count,
    save_checkpoint,
)

for kind in FULL_KINDS + DESK_KINDS:
    print(f"{kind:18s} {parameter_count(build_model(kind)).total:>12,d} parameters")

# %% a forward pass takes NHWC batches and returns class probabilities
model = build_model("desk_efficientnet")
batch = np.random.default_rng(0).uniform(-1, 1, (4, 96, 96, 3)).astype(np.float32)
probs = forward(model, batch)
print("probabilities:", probs.shape, "row sums", probs.sum(1).round(6))

# %% checkpoints are safetensors files with a JSON sidecar
out = Path(tempfile.mkdtemp())
path = save_checkpoint(model, out / "desk")
print("sidecar:", (out / "desk.json").read_text())
again = load_checkpoint("desk_efficientnet", path)
print("round trip exact:", np.array_equal(forward(again, batch), probs))

# %% backbone weights load by name; the head always stays fresh
fresh, report = load_pretrained(build_model("desk_efficientnet"), path)
print("matched", len(report.matched), "skipped head", report.skipped_head)

# ImageNet weights come from torchvision through the converter, e.g.
#   python -m numtabench.models.convert efficientnetb0 weights/efficientnetb0.safetensors
