"""Dataset discovery, cleaning, subsampling and splitting.

The on-disk layout follows the NumtaDB convention: for every source tag
``t`` there is a label file ``<root>/training-<t>.csv`` and an image
directory ``<root>/training-<t>/``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

log = logging.getLogger(__name__)

NUM_CLASSES = 10
SOURCE_TAGS = frozenset("abcdef")
DEFAULT_FILENAME_COLUMN = "filename"
DEFAULT_LABEL_COLUMN = "digit"


class DatasetError(Exception):
    """Base class for dataset problems (CLI exit code 2)."""


class MissingSourceError(DatasetError):
    pass


class MalformedRowError(DatasetError):
    """A CSV row that could not be turned into a record.

    These are collected on the manifest rather than raised.
    """

    def __init__(self, csv_path: Path, line: int, reason: str):
        super().__init__(f"{csv_path}:{line}: {reason}")
        self.csv_path = csv_path
        self.line = line
        self.reason = reason


class SubsampleTooLarge(DatasetError):
    pass


class DegenerateSplitError(DatasetError):
    pass


class DecodeError(DatasetError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    image_path: Path
    label: int | None
    source_tag: str
    id: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "path": str(self.image_path),
            "label": self.label,
            "source_tag": self.source_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SampleRecord:
        return cls(Path(d["path"]), d["label"], d["source_tag"], d["id"])


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable, ordered inventory of samples.

    ``row_errors`` carries CSV rows rejected during scanning; it does not
    take part in equality.
    """

    records: tuple[SampleRecord, ...]
    row_errors: tuple[MalformedRowError, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dup = next(i for i, c in Counter(ids).items() if c > 1)
            raise ValueError(f"duplicate record id {dup!r}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def class_counts(self) -> dict[int, int]:
        return dict(sorted(Counter(r.label for r in self.records if r.label is not None).items()))

    @property
    def provenance(self) -> dict[str, int]:
        return dict(sorted(Counter(r.source_tag for r in self.records).items()))

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "class_counts": {str(k): v for k, v in self.class_counts.items()},
            "provenance": self.provenance,
            "row_errors": [str(e) for e in self.row_errors],
        }

    @classmethod
    def from_dict(cls, d: dict) -> DatasetManifest:
        return cls(tuple(SampleRecord.from_dict(r) for r in d["records"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> DatasetManifest:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    train_fraction: float = 0.8
    newdata_fraction: float = 0.5
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not 0.0 <= self.newdata_fraction < 1.0:
            raise ValueError("newdata_fraction must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class SplitResult:
    train: DatasetManifest
    test: DatasetManifest
    new_data: DatasetManifest

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "test": self.test.to_dict(),
            "new_data": self.new_data.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SplitResult:
        return cls(*(DatasetManifest.from_dict(d[k]) for k in ("train", "test", "new_data")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> SplitResult:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CleanLog:
    dropped_missing_label: int = 0
    dropped_missing_file: int = 0
    dropped_unreadable: int = 0
    kept: int = 0

    @property
    def total(self) -> int:
        return self.kept + self.dropped_missing_label + self.dropped_missing_file + self.dropped_unreadable

    def to_dict(self) -> dict:
        return {
            "dropped_missing_label": self.dropped_missing_label,
            "dropped_missing_file": self.dropped_missing_file,
            "dropped_unreadable": self.dropped_unreadable,
            "kept": self.kept,
        }


def _parse_label(raw: str | None) -> int | None:
    if raw is None:
        return None
    raw = raw.strip()
    if not raw:
        return None
    try:
        value = float(raw)
    except ValueError:
        return None
    if not value.is_integer() or not 0 <= value < NUM_CLASSES:
        return None
    return int(value)


def scan_sources(
    root: str | Path,
    tags: Iterable[str],
    filename_column: str = DEFAULT_FILENAME_COLUMN,
    label_column: str = DEFAULT_LABEL_COLUMN,
) -> DatasetManifest:
    """Index every CSV row of the requested sources.

    Tags are visited alphabetically and rows keep their CSV order. Labels that
    are empty or not a digit in 0-9 are stored as ``None`` so that cleaning can
    account for them; rows without a usable filename end up in ``row_errors``.
    """
    root = Path(root)
    tags = sorted(set(tags))
    unknown = set(tags) - SOURCE_TAGS
    if unknown:
        raise ValueError(f"unknown source tags: {sorted(unknown)}")

    records: list[SampleRecord] = []
    errors: list[MalformedRowError] = []
    seen: set[str] = set()
    for tag in tags:
        csv_path = root / f"training-{tag}.csv"
        if not csv_path.is_file():
            raise MissingSourceError(f"no label file for source {tag!r}: {csv_path}")
        image_dir = root / f"training-{tag}"
        with csv_path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            if filename_column not in fields or label_column not in fields:
                raise MissingSourceError(
                    f"{csv_path} lacks required columns {filename_column!r}/{label_column!r}"
                )
            # line 1 is the header
            for line, row in enumerate(reader, start=2):
                name = (row.get(filename_column) or "").strip()
                if not name:
                    errors.append(MalformedRowError(csv_path, line, "empty filename"))
                    continue
                rid = Path(name).stem
                if rid in seen:
                    errors.append(MalformedRowError(csv_path, line, f"duplicate id {rid!r}"))
                    continue
                seen.add(rid)
                records.append(
                    SampleRecord(image_dir / name, _parse_label(row.get(label_column)), tag, rid)
                )
    if errors:
        log.warning("%d malformed rows skipped while scanning %s", len(errors), root)
    return DatasetManifest(tuple(records), tuple(errors))


def _decodes(path: Path) -> bool:
    try:
        with Image.open(path) as im:
            im.load()
    except (OSError, UnidentifiedImageError, ValueError):
        return False
    return True


def validate_and_clean(manifest: DatasetManifest) -> tuple[DatasetManifest, CleanLog]:
    """Drop records with no usable label or image. Nothing is imputed."""
    kept: list[SampleRecord] = []
    missing_label = missing_file = unreadable = 0
    for rec in manifest.records:
        if rec.label is None or not 0 <= rec.label < NUM_CLASSES:
            missing_label += 1
        elif not rec.image_path.is_file():
            missing_file += 1
        elif not _decodes(rec.image_path):
            unreadable += 1
        else:
            kept.append(rec)
    clean_log = CleanLog(missing_label, missing_file, unreadable, len(kept))
    log.info("cleaning: %s", clean_log.to_dict())
    return DatasetManifest(tuple(kept)), clean_log


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation summing to ``total``; ties go to the lower index."""
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        frac = quotas - base
        # stable sort on -frac keeps lower indices first among equal remainders
        order = np.argsort(-frac, kind="stable")
        base[order[:short]] += 1
    return base


def _ceil(x: float) -> int:
    # guard against 0.30000000000000004 * 10 style noise
    return math.ceil(round(x, 9))


def _by_class(records: Sequence[SampleRecord]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        groups.setdefault(rec.label, []).append(i)
    return dict(sorted(groups.items()))


def subsample(manifest: DatasetManifest, n: int, seed: int) -> DatasetManifest:
    """Draw ``n`` records, stratified by class, keeping manifest order."""
    size = len(manifest)
    if n > size:
        raise SubsampleTooLarge(f"requested {n} records from a manifest of {size}")
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == size:
        return manifest

    groups = _by_class(manifest.records)
    counts = np.array([len(v) for v in groups.values()], dtype=float)
    quota = _largest_remainder(counts * n / size, n)
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    for idx, q in zip(groups.values(), quota):
        chosen.extend(rng.permutation(idx)[:q].tolist())
    chosen.sort()
    return DatasetManifest(tuple(manifest.records[i] for i in chosen))


def stratified_split(manifest: DatasetManifest, spec: SplitSpec) -> SplitResult:
    """Split into train / test / new-data partitions.

    The held-out share is ``ceil((1 - train_fraction) * N)`` records, the same
    count scikit-learn's ``train_test_split`` produces. Under stratification
    it is spread over classes by largest remainder; the new-data holdout is
    then carved out of the held-out records the same way.
    """
    records = manifest.records
    n = len(records)
    if n == 0:
        raise DegenerateSplitError("cannot split an empty manifest")
    n_held = _ceil((1.0 - spec.train_fraction) * n)
    n_new = _ceil(spec.newdata_fraction * n_held) if spec.newdata_fraction > 0 else 0
    rng = np.random.default_rng(spec.seed)

    if spec.stratified:
        groups = _by_class(records)
        small = [c for c, idx in groups.items() if len(idx) < 2]
        if small:
            raise DegenerateSplitError(f"classes {small} have fewer than 2 records")
        counts = np.array([len(v) for v in groups.values()], dtype=float)
        held_q = _largest_remainder(counts * n_held / n, n_held)
        new_q = _largest_remainder(held_q * n_new / n_held, n_new) if n_new else np.zeros_like(held_q)
        train_idx, test_idx, new_idx = [], [], []
        for (label, idx), h, k in zip(groups.items(), held_q, new_q):
            perm = rng.permutation(idx).tolist()
            parts = {"train": perm[h:], "test": perm[k:h], "new_data": perm[:k]}
            for name, part in parts.items():
                if not part and (name != "new_data" or spec.newdata_fraction > 0):
                    raise DegenerateSplitError(
                        f"class {label} would have no records in the {name} partition"
                    )
            train_idx += parts["train"]
            test_idx += parts["test"]
            new_idx += parts["new_data"]
    else:
        perm = rng.permutation(n).tolist()
        new_idx, test_idx, train_idx = perm[:n_new], perm[n_new:n_held], perm[n_held:]

    def take(idx: list[int]) -> DatasetManifest:
        return DatasetManifest(tuple(records[i] for i in sorted(idx)))

    return SplitResult(take(train_idx), take(test_idx), take(new_idx))


def load_image(record: SampleRecord) -> np.ndarray:
    """Decode a record's image as an ``(H, W, C)`` uint8 array, C in {1, 3}."""
    try:
        with Image.open(record.image_path) as im:
            if im.mode in ("L", "1", "I;16", "I", "F"):
                im = im.convert("L")
            elif im.mode == "LA":
                im = im.convert("L")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"cannot decode {record.image_path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr
