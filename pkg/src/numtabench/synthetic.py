"""Small synthetic stand-in for NumtaDB, written in the same on-disk layout.

Digit glyphs are rendered with Pillow's built-in font and jittered in
position, scale, stroke weight and ink intensity, so a CNN has something
real to learn while tests stay fast and offline.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image, ImageDraw, ImageFont

COLUMNS = ("filename", "original filename", "scanid", "digit", "database name original",
           "contributing team", "database name")


def render_digit(digit: int, rng: np.random.Generator, size: int = 32, rgb: bool = False) -> Image.Image:
    font = ImageFont.load_default(size=int(rng.integers(size * 6 // 10, size * 9 // 10)))
    img = Image.new("L", (size, size), color=int(rng.integers(215, 256)))
    draw = ImageDraw.Draw(img)
    left, top, right, bottom = draw.textbbox((0, 0), str(digit), font=font)
    w, h = right - left, bottom - top
    jitter = max(1, size // 10)
    x = (size - w) / 2 - left + rng.integers(-jitter, jitter + 1)
    y = (size - h) / 2 - top + rng.integers(-jitter, jitter + 1)
    ink = int(rng.integers(0, 70))
    draw.text((x, y), str(digit), fill=ink, font=font, stroke_width=int(rng.integers(0, 2)), stroke_fill=ink)
    arr = np.asarray(img, dtype=np.float64) + rng.normal(0, 6, (size, size))
    arr = np.clip(arr, 0, 255).astype(np.uint8)
    if rgb:
        tint = rng.integers(-12, 13, size=3)
        arr = np.clip(arr[:, :, None].astype(int) + tint, 0, 255).astype(np.uint8)
        return Image.fromarray(arr, "RGB")
    return Image.fromarray(arr, "L")


def write_numta_like(
    root: str | Path,
    per_class: int,
    tags: Iterable[str] = ("a",),
    seed: int = 0,
    size: int = 32,
) -> Path:
    """Write ``training-<tag>.csv`` and ``training-<tag>/*.png`` for each tag.

    Every source gets ``per_class`` images of each digit. Source ``a`` images
    are RGB, the rest grayscale, as in the real dataset's mix.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for tag in sorted(set(tags)):
        img_dir = root / f"training-{tag}"
        img_dir.mkdir(exist_ok=True)
        rows = []
        labels = np.repeat(np.arange(10), per_class)
        rng.shuffle(labels)
        for i, digit in enumerate(labels):
            name = f"{tag}{i:05d}.png"
            render_digit(int(digit), rng, size, rgb=(tag == "a")).save(img_dir / name)
            rows.append((name, name, i, int(digit), "synthetic", "numtabench", f"training-{tag}"))
        with open(root / f"training-{tag}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            w.writerows(rows)
    return root
