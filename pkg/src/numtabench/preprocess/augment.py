"""Augmentations in four families: spatial, photometric, occlusion, superimposition.

A scalar range ``r`` means a value drawn uniformly from ``[-r, r]`` (for
multiplicative factors, from ``[1 - r, 1 + r]``); a ``(lo, hi)`` pair gives
the interval explicitly, so ``(90, 90)`` is an exact quarter turn.
Every family is skipped when its parameters are zero, which makes an
all-zero spec an exact identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from scipy import ndimage

from numtabench.preprocess.transforms import resize_bilinear

Range = float | tuple[float, float]


class InvalidSpec(ValueError):
    pass


def _interval(r: Range, centre: float = 0.0) -> tuple[float, float]:
    if isinstance(r, (tuple, list)):
        lo, hi = (float(v) for v in r)
    else:
        if r < 0:
            raise InvalidSpec(f"range must be non-negative, got {r}")
        lo, hi = centre - r, centre + r
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise InvalidSpec(f"bad interval {r!r}")
    return lo, hi


def _active(r: Range, centre: float = 0.0) -> bool:
    return _interval(r, centre) != (centre, centre)


def _draw(rng: np.random.Generator, r: Range, centre: float = 0.0) -> float:
    lo, hi = _interval(r, centre)
    return lo if lo == hi else float(rng.uniform(lo, hi))


@dataclass(frozen=True)
class SpatialSpec:
    rotation: Range = 0.0  # degrees, counter-clockwise positive
    translation: Range = 0.0  # pixels, both axes
    shear: Range = 0.0  # degrees
    height_shift: Range = 0.0  # fraction of height
    width_shift: Range = 0.0  # fraction of width
    zoom: Range = 0.0  # scale factor around 1
    channel_shift: Range = 0.0  # 8-bit intensity, per channel

    def active(self) -> bool:
        return any(
            _active(v)
            for v in (self.rotation, self.translation, self.shear, self.height_shift, self.width_shift)
        ) or _active(self.zoom, 1.0)


@dataclass(frozen=True)
class PhotometricSpec:
    noise: float = 0.0  # gaussian sigma, 8-bit units
    brightness: Range = 0.0  # additive, 8-bit units
    contrast: Range = 0.0  # factor around 1
    saturation: Range = 0.0  # factor around 1
    hue: Range = 0.0  # fraction of the hue circle


@dataclass(frozen=True)
class OcclusionSpec:
    count: int = 0
    max_fraction: float = 0.25  # max box side as a fraction of the image side


@dataclass(frozen=True)
class SuperimposeSpec:
    alpha: float = 0.0
    donor: np.ndarray | None = field(default=None, compare=False)


@dataclass(frozen=True)
class AugmentSpec:
    spatial: SpatialSpec = SpatialSpec()
    photometric: PhotometricSpec = PhotometricSpec()
    occlusion: OcclusionSpec = OcclusionSpec()
    superimpose: SuperimposeSpec = SuperimposeSpec()

    def validate(self) -> None:
        s, p = self.spatial, self.photometric
        for r in (s.rotation, s.translation, s.shear, s.height_shift, s.width_shift, s.channel_shift,
                  p.brightness, p.hue):
            _interval(r)
        for r in (s.zoom, p.contrast, p.saturation):
            lo, _ = _interval(r, 1.0)
            if lo <= 0:
                raise InvalidSpec(f"multiplicative factor range {r!r} reaches zero")
        if not (math.isfinite(p.noise) and p.noise >= 0):
            raise InvalidSpec("noise sigma must be finite and >= 0")
        if self.occlusion.count < 0 or not 0 < self.occlusion.max_fraction <= 1:
            raise InvalidSpec("occlusion needs count >= 0 and max_fraction in (0, 1]")
        a = self.superimpose.alpha
        if not 0.0 <= a <= 1.0:
            raise InvalidSpec(f"superimpose alpha must lie in [0, 1], got {a}")
        if a > 0 and self.superimpose.donor is None:
            raise InvalidSpec("superimpose alpha > 0 needs a donor image")

    def to_dict(self) -> dict:
        return {
            "spatial": vars(self.spatial).copy(),
            "photometric": vars(self.photometric).copy(),
            "occlusion": vars(self.occlusion).copy(),
            "superimpose": {"alpha": self.superimpose.alpha},
        }

    @classmethod
    def from_dict(cls, d: dict | None) -> AugmentSpec:
        d = d or {}

        def norm(v):
            return tuple(v) if isinstance(v, list) else v

        def sub(klass, key):
            return klass(**{k: norm(v) for k, v in (d.get(key) or {}).items()})

        return cls(
            sub(SpatialSpec, "spatial"),
            sub(PhotometricSpec, "photometric"),
            sub(OcclusionSpec, "occlusion"),
            SuperimposeSpec(float((d.get("superimpose") or {}).get("alpha", 0.0))),
        )


def _affine(img: np.ndarray, spec: SpatialSpec, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape[:2]
    theta = math.radians(_draw(rng, spec.rotation))
    shear = math.radians(_draw(rng, spec.shear))
    tx = _draw(rng, spec.translation) + _draw(rng, spec.width_shift) * w
    ty = _draw(rng, spec.translation) + _draw(rng, spec.height_shift) * h
    zoom = _draw(rng, spec.zoom, 1.0)

    # forward map in (x, y) pixel coordinates with y pointing down
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, s], [-s, c]])
    shr = np.array([[1.0, -math.tan(shear)], [0.0, 1.0]])
    fwd = rot @ shr * zoom
    centre = np.array([(w - 1) / 2, (h - 1) / 2])
    inv = np.linalg.inv(fwd)
    # output p -> input inv @ (p - centre - t) + centre; scipy wants (row, col)
    offset_xy = centre - inv @ (centre + np.array([tx, ty]))
    perm = np.array([[0, 1], [1, 0]])
    matrix = perm @ inv @ perm
    offset = perm @ offset_xy

    out = np.empty(img.shape, dtype=np.float64)
    for ch in range(img.shape[2]):
        out[:, :, ch] = ndimage.affine_transform(
            img[:, :, ch].astype(np.float64), matrix, offset=offset, order=1, mode="nearest"
        )
    return out


def augment(img: np.ndarray, spec: AugmentSpec, rng_seed: int) -> np.ndarray:
    """Apply a randomly parameterized augmentation, reproducible in ``rng_seed``."""
    spec.validate()
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidSpec(f"augment expects an (H, W, 3) image, got {img.shape}")
    rng = np.random.default_rng(rng_seed)
    h, w = img.shape[:2]
    x = img.astype(np.float64)

    sp = spec.spatial
    if sp.active():
        x = _affine(x, sp, rng)
    if _active(sp.channel_shift):
        x = x + np.array([_draw(rng, sp.channel_shift) for _ in range(3)])

    ph = spec.photometric
    if _active(ph.brightness):
        x = x + _draw(rng, ph.brightness)
    if _active(ph.contrast, 1.0):
        mean = x.mean(axis=(0, 1), keepdims=True)
        x = (x - mean) * _draw(rng, ph.contrast, 1.0) + mean
    if _active(ph.saturation, 1.0):
        gray = x @ np.array([0.299, 0.587, 0.114])
        x = gray[..., None] + (x - gray[..., None]) * _draw(rng, ph.saturation, 1.0)
    if _active(ph.hue):
        hsv = rgb_to_hsv(np.clip(x, 0, 255) / 255.0)
        hsv[..., 0] = (hsv[..., 0] + _draw(rng, ph.hue)) % 1.0
        x = hsv_to_rgb(hsv) * 255.0
    if ph.noise > 0:
        x = x + rng.normal(0.0, ph.noise, size=x.shape)

    occ = spec.occlusion
    for _ in range(occ.count):
        bh = int(rng.integers(1, max(1, round(occ.max_fraction * h)) + 1))
        bw = int(rng.integers(1, max(1, round(occ.max_fraction * w)) + 1))
        y0 = int(rng.integers(0, h - bh + 1))
        x0 = int(rng.integers(0, w - bw + 1))
        x[y0:y0 + bh, x0:x0 + bw] = rng.integers(0, 256, size=3)

    sup = spec.superimpose
    if sup.alpha > 0:
        donor = sup.donor
        if donor.ndim == 2 or donor.shape[2] == 1:
            donor = np.repeat(donor.reshape(donor.shape[0], donor.shape[1], 1), 3, axis=2)
        if donor.shape[:2] != (h, w):
            donor = resize_bilinear(donor, h, w)
        x = sup.alpha * donor.astype(np.float64) + (1.0 - sup.alpha) * x

    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)
