"""Run configuration, cross-model comparison and plots."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import yaml  # noqa: E402

from numtabench.datasetio import (  # noqa: E402
    DEFAULT_FILENAME_COLUMN,
    DEFAULT_LABEL_COLUMN,
    SplitSpec,
)
from numtabench.metrics import ClassificationReport  # noqa: E402
from numtabench.models.core import BACKBONES  # noqa: E402
from numtabench.preprocess import AugmentSpec, PreprocessMode  # noqa: E402
from numtabench.training import EpochHistory, TrainConfig  # noqa: E402

DEFAULT_BATCH = {
    "resnet50": 32,
    "inceptionv3": 32,
    "efficientnetb0": 64,
    "desk_resnet": 32,
    "desk_inception": 32,
    "desk_efficientnet": 64,
}


class ConfigError(ValueError):
    pass


class EmptyHistory(ValueError):
    pass


class EmptyRuns(ValueError):
    pass


@dataclass
class RunConfig:
    dataset_root: str | None = None
    source_tags: list[str] = field(default_factory=lambda: list("abcde"))
    subsample_n: int | None = None
    subsample_seed: int = 0
    split: SplitSpec = field(default_factory=SplitSpec)
    model_kind: str = "efficientnetb0"
    preprocess: PreprocessMode = field(default_factory=PreprocessMode)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "runs"
    run_name: str | None = None
    pretrained: str | None = None
    filename_column: str = DEFAULT_FILENAME_COLUMN
    label_column: str = DEFAULT_LABEL_COLUMN

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / (self.run_name or self.model_kind)

    def to_dict(self) -> dict:
        return {
            "dataset_root": self.dataset_root,
            "source_tags": list(self.source_tags),
            "subsample_n": self.subsample_n,
            "subsample_seed": self.subsample_seed,
            "split": {
                "seed": self.split.seed,
                "train_fraction": self.split.train_fraction,
                "newdata_fraction": self.split.newdata_fraction,
                "stratified": self.split.stratified,
            },
            "model_kind": self.model_kind,
            "preprocess": self.preprocess.to_dict(),
            "train": self.train.to_dict(),
            "output_dir": self.output_dir,
            "run_name": self.run_name,
            "pretrained": self.pretrained,
            "filename_column": self.filename_column,
            "label_column": self.label_column,
        }

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = dict(d or {})
        try:
            model_kind = d.get("model_kind", "efficientnetb0")
            if model_kind not in BACKBONES:
                raise ConfigError(f"unknown model_kind {model_kind!r}")
            train_d = dict(d.get("train") or {})
            train_d.pop("optimizer", None)
            train_d.pop("loss", None)
            aug = train_d.pop("augment", None)
            train_d.setdefault("batch_size", DEFAULT_BATCH[model_kind])
            train = TrainConfig(**train_d, augment=AugmentSpec.from_dict(aug) if isinstance(aug, dict) else None)
            tags = d.get("source_tags", list("abcde"))
            return cls(
                dataset_root=d.get("dataset_root") or os.environ.get("NUMTA_ROOT"),
                source_tags=list(tags),
                subsample_n=d.get("subsample_n"),
                subsample_seed=int(d.get("subsample_seed", 0)),
                split=SplitSpec(**(d.get("split") or {})),
                model_kind=model_kind,
                preprocess=PreprocessMode.from_dict(d.get("preprocess") or {}),
                train=train,
                output_dir=str(d.get("output_dir", "runs")),
                run_name=d.get("run_name"),
                pretrained=d.get("pretrained"),
                filename_column=d.get("filename_column", DEFAULT_FILENAME_COLUMN),
                label_column=d.get("label_column", DEFAULT_LABEL_COLUMN),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        """Read a YAML (or JSON) run config."""
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data or {})

    def with_overrides(self, *, model=None, out=None, seed=None, epochs=None, lr=None, batch=None,
                       mode=None, pretrained=None) -> RunConfig:
        cfg = self
        if model is not None:
            if model not in BACKBONES:
                raise ConfigError(f"unknown model {model!r}")
            train = cfg.train
            if batch is None and train.batch_size == DEFAULT_BATCH[cfg.model_kind]:
                train = replace(train, batch_size=DEFAULT_BATCH[model])
            cfg = replace(cfg, model_kind=model, train=train)
        if out is not None:
            cfg = replace(cfg, output_dir=str(out))
        if seed is not None:
            cfg = replace(cfg, split=replace(cfg.split, seed=seed), subsample_seed=seed,
                          train=replace(cfg.train, seed=seed))
        try:
            if epochs is not None:
                cfg = replace(cfg, train=replace(cfg.train, epochs=epochs))
            if lr is not None:
                cfg = replace(cfg, train=replace(cfg.train, learning_rate=lr))
            if batch is not None:
                cfg = replace(cfg, train=replace(cfg.train, batch_size=batch))
            if mode is not None:
                cfg = replace(cfg, preprocess=PreprocessMode(mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if pretrained is not None:
            cfg = replace(cfg, pretrained=str(pretrained))
        return cfg


@dataclass(frozen=True)
class EpochDelta:
    name: str
    accuracy_at_1: float
    accuracy_at_last: float
    difference: float


def epoch_delta(history: EpochHistory, name: str) -> EpochDelta:
    """Change in test accuracy between the first and the last epoch."""
    acc = history.test_accuracy
    if not acc:
        raise EmptyHistory(f"history of {name!r} is empty")
    return EpochDelta(name, acc[0], acc[-1], acc[-1] - acc[0])


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    accuracy: float
    macro_f1: float
    weighted_f1: float
    final_test_loss: float
    final_test_accuracy: float
    best: bool = False


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]

    @property
    def best(self) -> ComparisonRow:
        return self.rows[0]

    def to_dict(self) -> dict:
        return {"rows": [vars(r).copy() for r in self.rows], "best": self.best.name}

    @classmethod
    def from_dict(cls, d: dict) -> ComparisonTable:
        return cls([ComparisonRow(**r) for r in d["rows"]])

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_json(cls, path: str | Path) -> ComparisonTable:
        return cls.from_dict(json.loads(Path(path).read_text()))


def compare(runs: Sequence[tuple[ClassificationReport, EpochHistory, str]]) -> ComparisonTable:
    """Rank runs by report accuracy (descending, then name); the first row is marked best."""
    if not runs:
        raise EmptyRuns("nothing to compare")
    rows = []
    for report, history, name in runs:
        if len(history) == 0:
            raise EmptyHistory(f"history of {name!r} is empty")
        rows.append(ComparisonRow(
            name=name,
            accuracy=report.accuracy,
            macro_f1=report.macro_avg[2],
            weighted_f1=report.weighted_avg[2],
            final_test_loss=history.test_loss[-1],
            final_test_accuracy=history.test_accuracy[-1],
        ))
    rows.sort(key=lambda r: (-r.accuracy, r.name))
    rows[0] = replace(rows[0], best=True)
    return ComparisonTable(rows)


def history_figure(history: EpochHistory, metric: str):
    """Train/test curves of ``loss`` or ``accuracy`` against epochs 1..n."""
    if len(history) == 0:
        raise EmptyHistory("cannot plot an empty history")
    series = {
        "loss": (history.train_loss, history.test_loss),
        "accuracy": (history.train_accuracy, history.test_accuracy),
    }[metric]
    epochs = list(range(1, len(history) + 1))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, series[0], marker="o" if len(epochs) == 1 else None, label="train")
    ax.plot(epochs, series[1], marker="o" if len(epochs) == 1 else None, label="test")
    ax.set_xlabel("epoch")
    ax.set_ylabel(metric)
    ax.set_title(f"model {metric}")
    ax.set_xlim(0.5, len(epochs) + 0.5)
    if metric == "accuracy":
        ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    return fig


def render_plots(history: EpochHistory, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``loss.png``, ``accuracy.png`` and the underlying ``history.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric in ("loss", "accuracy"):
        fig = history_figure(history, metric)
        path = out_dir / f"{metric}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        paths.append(path)
    history.to_csv(out_dir / "history.csv")
    return paths[0], paths[1]


def plot_comparison_bars(table: ComparisonTable, path: str | Path) -> Path:
    """Grouped bars of macro avg, accuracy and weighted avg per model."""
    names = [r.name for r in table.rows]
    groups = (("macro avg", "macro_f1"), ("accuracy", "accuracy"), ("weighted avg", "weighted_f1"))
    width = 0.8 / len(groups)
    fig, ax = plt.subplots(figsize=(max(5, 1.8 * len(names)), 4))
    for i, (label, attr) in enumerate(groups):
        xs = [j + (i - 1) * width for j in range(len(names))]
        vals = [getattr(r, attr) for r in table.rows]
        bars = ax.bar(xs, vals, width, label=label)
        ax.bar_label(bars, fmt="%.2f", fontsize=7)
    ax.set_xticks(range(len(names)), names)
    ax.set_ylim(0, 1.2)
    ax.set_ylabel("score")
    ax.legend(loc="upper center", ncol=len(groups), frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_test_curves(histories: Sequence[tuple[EpochHistory, str]], path: str | Path) -> Path:
    """Test loss and accuracy per epoch, one line per model, side by side."""
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    for history, name in histories:
        epochs = range(1, len(history) + 1)
        ax_loss.plot(epochs, history.test_loss, label=name)
        ax_acc.plot(epochs, history.test_accuracy, label=name)
    ax_loss.set(xlabel="epoch", ylabel="test loss")
    ax_acc.set(xlabel="epoch", ylabel="test accuracy")
    ax_loss.legend()
    ax_acc.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def write_epoch_deltas(deltas: Sequence[EpochDelta], path: str | Path) -> Path:
    lines = ["model,accuracy_at_1,accuracy_at_last,difference"]
    lines += [f"{d.name},{d.accuracy_at_1!r},{d.accuracy_at_last!r},{d.difference!r}" for d in deltas]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
