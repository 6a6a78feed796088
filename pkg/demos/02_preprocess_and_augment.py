"""Resizing, the three normalization modes, and the augmentation families."""

# %%
import numpy as np

from numtabench.preprocess import (
    AugmentSpec,
    OcclusionSpec,
    PhotometricSpec,
    PreprocessMode,
    SpatialSpec,
    SuperimposeSpec,
    augment,
    prepare_image,
    preprocess_batch,
    undo_caffe,
)
from numtabench.synthetic import render_digit

rng = np.random.default_rng(0)
gray = np.asarray(render_digit(7, rng, size=32))[:, :, None]
img = prepare_image(gray)  # 32x32x1 -> 96x96x3
print("prepared:", img.shape, img.dtype)

# %% caffe (the default): RGB -> BGR, subtract ImageNet means, no scaling
batch = img[None]
x = preprocess_batch(batch, "caffe")
print("caffe range:", float(x.min()), float(x.max()))
print("caffe inverts exactly:", np.array_equal(undo_caffe(x), batch))

# %% tf: scale to [-1, 1]; torch: scale to [0, 1] then standardize per channel
for mode in ("tf", "torch"):
    x = preprocess_batch(batch, mode)
    print(mode, "range:", round(float(x.min()), 3), round(float(x.max()), 3))
print("custom means:", PreprocessMode("caffe", channel_means=(100, 110, 120)).to_dict())

# %% augmentation families; parameters are ranges sampled per call
spec = AugmentSpec(
    spatial=SpatialSpec(rotation=15, shear=8, zoom=0.1, width_shift=0.05, height_shift=0.05),
    photometric=PhotometricSpec(noise=6, brightness=20, contrast=0.2),
    occlusion=OcclusionSpec(count=2, max_fraction=0.2),
)
variants = [augment(img, spec, rng_seed=s) for s in range(4)]
print("same seed, same result:", np.array_equal(augment(img, spec, 1), variants[1]))
print("mean abs change per variant:", [round(float(np.abs(v.astype(int) - img).mean()), 1) for v in variants])

# %% superimposition blends a donor image in
donor = prepare_image(np.asarray(render_digit(3, rng, size=32))[:, :, None])
blend = augment(img, AugmentSpec(superimpose=SuperimposeSpec(alpha=0.4, donor=donor)), 0)
print("blend equals 0.4*donor + 0.6*img within rounding:",
      bool(np.abs(blend - (0.4 * donor + 0.6 * img)).max() <= 0.5))
