"""Fine-tuning loop, evaluation and prediction over dataset manifests."""

from __future__ import annotations

import csv
import logging
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from numtabench.datasetio import DatasetManifest, load_image
from numtabench.models.core import Classifier, _as_nchw
from numtabench.preprocess import AugmentSpec, PreprocessMode, augment, prepare_image, preprocess_batch

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc")


class EmptyDatasetError(ValueError):
    pass


class NonFiniteLossError(RuntimeError):
    """Raised when a batch loss is NaN/inf; ``partial`` holds the run so far."""

    def __init__(self, message: str, partial: TrainedModel):
        super().__init__(message)
        self.partial = partial


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    shuffle: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    eval_batch_size: int = 64
    augment: AugmentSpec | None = None

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 1 or self.eval_batch_size < 1:
            raise ValueError("batch_size and epochs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "optimizer": "adam",
            "loss": "categorical_crossentropy",
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "shuffle": self.shuffle,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "eval_batch_size": self.eval_batch_size,
            "augment": None if self.augment is None else self.augment.to_dict(),
        }


@dataclass
class EpochHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def append(self, train_loss, train_acc, test_loss, test_acc) -> None:
        self.train_loss.append(float(train_loss))
        self.train_accuracy.append(float(train_acc))
        self.test_loss.append(float(test_loss))
        self.test_accuracy.append(float(test_acc))

    def rows(self):
        for i in range(len(self)):
            yield (i + 1, self.train_loss[i], self.train_accuracy[i], self.test_loss[i], self.test_accuracy[i])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_COLUMNS)
            for row in self.rows():
                # repr keeps every float bit so the file parses back exactly
                w.writerow([row[0], *(repr(v) for v in row[1:])])

    @classmethod
    def from_csv(cls, path: str | Path) -> EpochHistory:
        hist = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != HISTORY_COLUMNS:
                raise ValueError(f"{path}: expected header {','.join(HISTORY_COLUMNS)}")
            for expected, row in enumerate(reader, start=1):
                if int(row["epoch"]) != expected:
                    raise ValueError(f"{path}: epochs must run 1..n in order")
                hist.append(row["train_loss"], row["train_acc"], row["test_loss"], row["test_acc"])
        return hist


@dataclass
class TrainedModel:
    model: Classifier
    history: EpochHistory
    config: TrainConfig
    wall_time: float
    error: str | None = None


class _ArrayCache:
    """Decoded, resized uint8 stacks keyed by manifest; a few entries at most."""

    def __init__(self, maxsize: int = 4):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()

    def get(self, manifest: DatasetManifest, size: int) -> np.ndarray:
        key = (manifest, size)
        if key in self._data:
            self._data.move_to_end(key)
            return self._data[key]
        arr = np.empty((len(manifest), size, size, 3), dtype=np.uint8)
        for i, rec in enumerate(manifest.records):
            arr[i] = prepare_image(load_image(rec), size)
        self._data[key] = arr
        while len(self._data) > self.maxsize:
            self._data.popitem(last=False)
        return arr


_cache = _ArrayCache()


def load_arrays(manifest: DatasetManifest, size: int = 96) -> tuple[np.ndarray, np.ndarray]:
    """Images of a manifest as an ``(N, size, size, 3)`` uint8 stack plus labels."""
    if len(manifest) == 0:
        raise EmptyDatasetError("dataset is empty")
    return _cache.get(manifest, size), manifest.labels


def _input_size(model: Classifier) -> int:
    cfg = model.config
    if cfg.input_height != cfg.input_width:
        raise ValueError("square inputs only")
    return cfg.input_height


def _as_mode(mode: PreprocessMode | str) -> PreprocessMode:
    return PreprocessMode(mode) if isinstance(mode, str) else mode


def infer_logits(
    model: Classifier, images: np.ndarray, mode: PreprocessMode | str, batch_size: int = 64
) -> np.ndarray:
    """Inference-mode logits (float64) for a uint8 image stack."""
    mode = _as_mode(mode)
    was_training = model.training
    model.eval()
    out = []
    try:
        with torch.no_grad():
            for start in range(0, len(images), batch_size):
                x = preprocess_batch(images[start:start + batch_size], mode, _input_size(model))
                out.append(model(_as_nchw(model, x)).double().numpy())
    finally:
        model.train(was_training)
    return np.concatenate(out) if out else np.zeros((0, model.config.num_classes))


def evaluate_loss_acc(
    model: Classifier, dataset: DatasetManifest, mode: PreprocessMode | str, batch_size: int = 64
) -> tuple[float, float]:
    """Mean categorical cross-entropy and accuracy over the whole dataset."""
    images, labels = load_arrays(dataset, _input_size(model))
    z = infer_logits(model, images, mode, batch_size)
    logp = torch.log_softmax(torch.from_numpy(z), dim=1).numpy()
    loss = -float(np.mean(logp[np.arange(len(labels)), labels]))
    acc = float(np.mean(np.argmax(z, axis=1) == labels))
    return loss, acc


def predict_labels(
    model: Classifier, dataset: DatasetManifest, mode: PreprocessMode | str, batch_size: int = 64
) -> tuple[list[int], list[int]]:
    """``(y_true, y_pred)`` in dataset order; argmax ties go to the lowest class."""
    images, labels = load_arrays(dataset, _input_size(model))
    z = infer_logits(model, images, mode, batch_size)
    return labels.tolist(), np.argmax(z, axis=1).tolist()


def make_optimizer(params, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        params, lr=config.learning_rate, betas=(config.beta1, config.beta2), eps=config.epsilon
    )


def train(
    model: Classifier,
    train_set: DatasetManifest,
    eval_set: DatasetManifest,
    config: TrainConfig,
    mode: PreprocessMode | str = "caffe",
) -> TrainedModel:
    """Fine-tune every layer of ``model`` with Adam and categorical cross-entropy.

    Each epoch appends the sample-weighted mean loss/accuracy of its training
    batches (train-mode forward passes, as they happen) and a full
    inference-mode pass over ``eval_set``.
    """
    if len(train_set) == 0 or len(eval_set) == 0:
        raise EmptyDatasetError("train and eval sets must be non-empty")
    overlap = set(train_set.ids) & set(eval_set.ids)
    if overlap:
        raise ValueError(f"train and eval sets share {len(overlap)} ids")
    if model.config.num_classes != 10:
        raise ValueError("model must have a 10-class head")

    mode = _as_mode(mode)
    size = _input_size(model)
    images, labels = load_arrays(train_set, size)
    labels_t = torch.from_numpy(labels)
    rng = np.random.default_rng(config.seed)
    torch.manual_seed(config.seed)
    opt = make_optimizer(model.parameters(), config)
    history = EpochHistory()
    start = time.perf_counter()
    n = len(images)

    for epoch in range(1, config.epochs + 1):
        model.train()
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        correct = 0
        for b0 in range(0, n, config.batch_size):
            idx = order[b0:b0 + config.batch_size]
            batch = images[idx]
            if config.augment is not None:
                batch = np.stack([
                    augment(img, config.augment, config.seed * 1_000_003 + epoch * n + int(i))
                    for img, i in zip(batch, idx)
                ])
            x = _as_nchw(model, preprocess_batch(batch, mode, size))
            y = labels_t[idx]
            out = model(x)
            loss = F.cross_entropy(out, y)
            if not torch.isfinite(loss):
                partial = TrainedModel(model, history, config, time.perf_counter() - start,
                                       error=f"non-finite loss in epoch {epoch}")
                raise NonFiniteLossError(partial.error, partial)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            loss_sum += float(loss.detach()) * len(idx)
            correct += int((out.detach().argmax(1) == y).sum())
        test_loss, test_acc = evaluate_loss_acc(model, eval_set, mode, config.eval_batch_size)
        if not math.isfinite(test_loss):
            partial = TrainedModel(model, history, config, time.perf_counter() - start,
                                   error=f"non-finite eval loss in epoch {epoch}")
            raise NonFiniteLossError(partial.error, partial)
        history.append(loss_sum / n, correct / n, test_loss, test_acc)
        log.info(
            "epoch %d/%d train_loss=%.4f train_acc=%.4f test_loss=%.4f test_acc=%.4f",
            epoch, config.epochs, loss_sum / n, correct / n, test_loss, test_acc,
        )
    return TrainedModel(model, history, config, time.perf_counter() - start)
