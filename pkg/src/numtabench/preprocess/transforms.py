"""Pixel-level conversions: resizing, channel handling and input normalization.

Images are plain ``(H, W, C)`` uint8 numpy arrays in RGB (or single gray)
channel order. Normalized batches are float32 ``(N, H, W, 3)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

INPUT_SIZE = 96

# ImageNet statistics used by the three Keras ``preprocess_input`` conventions.
IMAGENET_BGR_MEANS = (103.939, 116.779, 123.68)
IMAGENET_RGB_MEANS = (0.485, 0.456, 0.406)
IMAGENET_RGB_STDS = (0.229, 0.224, 0.225)

MODES = ("caffe", "tf", "torch")


class InvalidDimension(ValueError):
    pass


class UnsupportedChannels(ValueError):
    pass


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessMode:
    """Normalization convention.

    ``caffe``: RGB->BGR then subtract per-channel means (BGR order, 8-bit
    units), no scaling. ``tf``: rescale to [-1, 1]. ``torch``: rescale to
    [0, 1] then standardize per RGB channel.
    """

    mode: str = "caffe"
    channel_means: tuple[float, float, float] | None = None
    channel_stds: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.channel_means is None:
            default = {"caffe": IMAGENET_BGR_MEANS, "torch": IMAGENET_RGB_MEANS}.get(self.mode)
            object.__setattr__(self, "channel_means", default)
        if self.mode == "torch" and self.channel_stds is None:
            object.__setattr__(self, "channel_stds", IMAGENET_RGB_STDS)
        if self.channel_means is not None:
            object.__setattr__(self, "channel_means", tuple(float(m) for m in self.channel_means))
            if len(self.channel_means) != 3:
                raise ValueError("channel_means needs 3 values")
        if self.channel_stds is not None:
            object.__setattr__(self, "channel_stds", tuple(float(s) for s in self.channel_stds))
            if len(self.channel_stds) != 3 or min(self.channel_stds) <= 0:
                raise ValueError("channel_stds needs 3 positive values")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "channel_means": list(self.channel_means) if self.channel_means else None,
            "channel_stds": list(self.channel_stds) if self.channel_stds else None,
        }

    @classmethod
    def from_dict(cls, d: dict | str) -> PreprocessMode:
        if isinstance(d, str):
            return cls(d)
        means, stds = d.get("channel_means"), d.get("channel_stds")
        return cls(d.get("mode", "caffe"), tuple(means) if means else None, tuple(stds) if stds else None)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers (``align_corners=False``).

    Source coordinates are ``(i + 0.5) * in / out - 0.5`` clamped to the image,
    which matches OpenCV ``INTER_LINEAR`` and torch ``interpolate``. Results
    are rounded half-up back to uint8.
    """
    if out_h <= 0 or out_w <= 0:
        raise InvalidDimension(f"target size must be positive, got {out_h}x{out_w}")
    if img.size == 0:
        raise InvalidDimension("cannot resize an empty image")
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    in_h, in_w = img.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        out = img.copy()
        return out[:, :, 0] if squeeze else out

    def axis(n_in: int, n_out: int):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, wy = axis(in_h, out_h)
    x0, x1, wx = axis(in_w, out_w)
    f = img.astype(np.float64)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = f[y0][:, x0] * (1 - wx) + f[y0][:, x1] * wx
    bottom = f[y1][:, x0] * (1 - wx) + f[y1][:, x1] * wx
    out = top * (1 - wy) + bottom * wy
    out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out[:, :, 0] if squeeze else out


def ensure_three_channels(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise UnsupportedChannels(f"expected 1 or 3 channels, got shape {img.shape}")
    if img.shape[2] == 1:
        return np.repeat(img, 3, axis=2)
    return img


def prepare_image(img: np.ndarray, size: int = INPUT_SIZE) -> np.ndarray:
    """Decoded image -> ``size x size x 3`` uint8."""
    return resize_bilinear(ensure_three_channels(img), size, size)


def preprocess_batch(
    batch: Sequence[np.ndarray] | np.ndarray,
    mode: PreprocessMode | str = "caffe",
    size: int = INPUT_SIZE,
) -> np.ndarray:
    """Normalize a batch of ``size x size x 3`` uint8 images to float32."""
    if isinstance(mode, str):
        mode = PreprocessMode(mode)
    if isinstance(batch, np.ndarray) and batch.ndim == 4:
        x = batch
    else:
        batch = list(batch)
        for i, img in enumerate(batch):
            if np.shape(img) != (size, size, 3):
                raise ShapeError(f"image {i} has shape {np.shape(img)}, expected ({size}, {size}, 3)")
        x = np.stack(batch) if batch else np.zeros((0, size, size, 3), np.uint8)
    if x.shape[1:] != (size, size, 3):
        raise ShapeError(f"batch has shape {x.shape}, expected (n, {size}, {size}, 3)")

    x = x.astype(np.float32)
    if mode.mode == "caffe":
        x = x[..., ::-1] - np.asarray(mode.channel_means, np.float32)
    elif mode.mode == "tf":
        x = x / 127.5 - 1.0
    else:
        x = (x / 255.0 - np.asarray(mode.channel_means, np.float32)) / np.asarray(
            mode.channel_stds, np.float32
        )
    return np.ascontiguousarray(x, dtype=np.float32)


def undo_caffe(x: np.ndarray, mode: PreprocessMode | None = None) -> np.ndarray:
    """Inverse of caffe-mode normalization back to RGB uint8."""
    mode = mode or PreprocessMode("caffe")
    rgb = (x + np.asarray(mode.channel_means, np.float32))[..., ::-1]
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
