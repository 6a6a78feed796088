"""Build a manifest from a NumtaDB-style folder, clean it, subsample and split.

Run with ``python demos/01_dataset_and_split.py``. Point NUMTA_ROOT at a real
NumtaDB download to use it instead of the generated stand-in.
"""

# %%
import os
import tempfile
from pathlib import Path

from numtabench.datasetio import SplitSpec, scan_sources, stratified_split, subsample, validate_and_clean
from numtabench.synthetic import write_numta_like

root = os.environ.get("NUMTA_ROOT")
tags = set("abcde")
if root is None:
    root = write_numta_like(Path(tempfile.mkdtemp()) / "numta", per_class=20, tags=("a", "b"), seed=0)
    tags = {"a", "b"}
print("dataset root:", root)

# %% every CSV row becomes a record; rows without a filename are kept aside
raw = scan_sources(root, tags)
print(len(raw), "rows scanned, provenance", raw.provenance, "malformed rows", len(raw.row_errors))

# %% cleaning drops records with no label, no file, or an undecodable image
manifest, log = validate_and_clean(raw)
print("clean log:", log.to_dict())
print("class counts:", manifest.class_counts)

# %% a stratified subsample keeps the class mix (published runs used 17,022 images)
small = subsample(manifest, n=min(len(manifest), 300), seed=0)
print("subsample class counts:", small.class_counts)

# %% 80/20 split; newdata_fraction=0 keeps one 20% test set
single_test = stratified_split(small, SplitSpec(seed=0, train_fraction=0.8, newdata_fraction=0.0))
print("train/test:", len(single_test.train), len(single_test.test))

# the default carves half of the held-out part into a "new data" holdout
split = stratified_split(small, SplitSpec(seed=0))
print("train/test/new_data:", len(split.train), len(split.test), len(split.new_data))

# %% the held-out share rounds up, so 17,022 images give a 3,405-image test set
print("17022 images at 0.8 ->", 17022 - 3405, "train and", 3405, "test")
