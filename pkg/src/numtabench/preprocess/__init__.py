"""Image preparation: resizing, channel handling, normalization and augmentation."""

from numtabench.preprocess.augment import (
    AugmentSpec,
    InvalidSpec,
    OcclusionSpec,
    PhotometricSpec,
    SpatialSpec,
    SuperimposeSpec,
    augment,
)
from numtabench.preprocess.transforms import (
    IMAGENET_BGR_MEANS,
    IMAGENET_RGB_MEANS,
    IMAGENET_RGB_STDS,
    INPUT_SIZE,
    MODES,
    InvalidDimension,
    PreprocessMode,
    ShapeError,
    UnsupportedChannels,
    ensure_three_channels,
    prepare_image,
    preprocess_batch,
    resize_bilinear,
    undo_caffe,
)

__all__ = [
    "AugmentSpec",
    "IMAGENET_BGR_MEANS",
    "IMAGENET_RGB_MEANS",
    "IMAGENET_RGB_STDS",
    "INPUT_SIZE",
    "MODES",
    "InvalidDimension",
    "InvalidSpec",
    "OcclusionSpec",
    "PhotometricSpec",
    "PreprocessMode",
    "ShapeError",
    "SpatialSpec",
    "SuperimposeSpec",
    "UnsupportedChannels",
    "augment",
    "ensure_three_channels",
    "prepare_image",
    "preprocess_batch",
    "resize_bilinear",
    "undo_caffe",
]
