"""Adapted classifiers: backbone + global-average-pool + 10-way dense head.

Checkpoints and pretrained archives are safetensors files holding the
model's ``state_dict`` with a JSON sidecar ``<stem>.json`` that records
``{kind, config, format_version}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch
from safetensors import SafetensorError
from safetensors.torch import load_file, save_file
from torch import nn

from numtabench.models import efficientnet, inception, resnet
from numtabench.preprocess.transforms import ShapeError

FORMAT_VERSION = 1

BACKBONES: dict[str, Callable[[], nn.Module]] = {
    "resnet50": resnet.resnet50,
    "inceptionv3": inception.inceptionv3,
    "efficientnetb0": efficientnet.efficientnetb0,
    "desk_resnet": resnet.desk_resnet,
    "desk_inception": inception.desk_inception,
    "desk_efficientnet": efficientnet.desk_efficientnet,
}
FULL_KINDS = ("resnet50", "inceptionv3", "efficientnetb0")
DESK_KINDS = ("desk_resnet", "desk_inception", "desk_efficientnet")


class UnsupportedKind(ValueError):
    pass


class ArchiveError(Exception):
    pass


class IncompatibleArchive(ArchiveError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    input_height: int = 96
    input_width: int = 96
    input_channels: int = 3
    num_classes: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.input_channels != 3:
            raise ValueError("backbones take 3-channel input")
        if self.num_classes < 2 or min(self.input_height, self.input_width) < 32:
            raise ValueError(f"invalid model config {self}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


class Head(nn.Module):
    def __init__(self, in_features: int, num_classes: int):
        super().__init__()
        self.fc = nn.Linear(in_features, num_classes)

    def forward(self, x):
        return self.fc(torch.flatten(nn.functional.adaptive_avg_pool2d(x, 1), 1))


class Classifier(nn.Module):
    """Backbone plus head. ``forward`` on the module returns logits (NCHW input)."""

    def __init__(self, kind: str, config: ModelConfig):
        super().__init__()
        if kind not in BACKBONES:
            raise UnsupportedKind(f"unknown backbone {kind!r}; choose from {sorted(BACKBONES)}")
        self.kind = kind
        self.config = config
        self.backbone = BACKBONES[kind]()
        self.head = Head(self.backbone.out_features, config.num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


def init_weights(model: nn.Module, seed: int) -> None:
    """Fan-in scaled normal kernels, zero biases, unit/zero norm scale/shift."""
    gen = torch.Generator().manual_seed(seed)
    for m in model.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.weight[0].numel()
            with torch.no_grad():
                m.weight.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.Linear):
            with torch.no_grad():
                m.weight.normal_(0.0, math.sqrt(1.0 / m.in_features), generator=gen)
                m.bias.zero_()
        elif isinstance(m, nn.BatchNorm2d):
            m.reset_parameters()


def build_model(kind: str, config: ModelConfig | None = None) -> Classifier:
    config = config or ModelConfig()
    model = Classifier(kind, config)
    init_weights(model, config.seed)
    return model


def _as_nchw(model: Classifier, batch) -> torch.Tensor:
    dtype = next(model.parameters()).dtype
    x = torch.as_tensor(np.asarray(batch) if not torch.is_tensor(batch) else batch, dtype=dtype)
    cfg = model.config
    expect = (cfg.input_height, cfg.input_width, cfg.input_channels)
    if x.ndim != 4 or tuple(x.shape[1:]) != expect:
        raise ShapeError(f"batch has shape {tuple(x.shape)}, expected (n, {', '.join(map(str, expect))})")
    return x.permute(0, 3, 1, 2).contiguous()


def logits(model: Classifier, batch) -> torch.Tensor:
    """Inference-mode logits for an NHWC batch (no grad)."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            return model(_as_nchw(model, batch))
    finally:
        model.train(was_training)


def forward(model: Classifier, batch) -> np.ndarray:
    """Class probabilities (n x num_classes) for an NHWC batch, in inference mode."""
    z = logits(model, batch).double()
    return torch.softmax(z, dim=1).numpy()


@dataclass
class ParameterSummary:
    total: int
    trainable: int
    per_layer: dict[str, int] = field(default_factory=dict)


def parameter_count(model: nn.Module) -> ParameterSummary:
    """Learnable parameters per owning module (normalization statistics excluded)."""
    per_layer: dict[str, int] = {}
    trainable = 0
    for name, module in model.named_modules():
        params = list(module.parameters(recurse=False))
        if params:
            per_layer[name] = sum(p.numel() for p in params)
            trainable += sum(p.numel() for p in params if p.requires_grad)
    return ParameterSummary(sum(per_layer.values()), trainable, per_layer)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _tensor_path(path: str | Path) -> Path:
    path = Path(path)
    return path if path.suffix == ".safetensors" else path.with_suffix(".safetensors")


def save_checkpoint(model: Classifier, path: str | Path) -> Path:
    """Write ``<path>.safetensors`` + ``<path>.json``; returns the tensor file path."""
    tpath = _tensor_path(path)
    tpath.parent.mkdir(parents=True, exist_ok=True)
    state = {k: v.detach().cpu().contiguous().clone() for k, v in model.state_dict().items()}
    meta = {"kind": model.kind, "config": model.config.to_dict(), "format_version": FORMAT_VERSION}
    save_file(state, str(tpath), metadata={"kind": model.kind})
    _sidecar(tpath).write_text(json.dumps(meta, indent=1))
    return tpath


def read_archive(path: str | Path) -> dict[str, torch.Tensor]:
    tpath = _tensor_path(path)
    try:
        return load_file(str(tpath))
    except (OSError, SafetensorError, ValueError) as exc:
        raise ArchiveError(f"cannot read archive {tpath}: {exc}") from exc


def read_metadata(path: str | Path) -> dict:
    side = _sidecar(_tensor_path(path))
    try:
        return json.loads(side.read_text())
    except (OSError, ValueError) as exc:
        raise ArchiveError(f"cannot read archive metadata {side}: {exc}") from exc


def load_checkpoint(kind: str, path: str | Path) -> Classifier:
    meta = read_metadata(path)
    if meta.get("kind") != kind:
        raise IncompatibleArchive(f"archive holds a {meta.get('kind')!r} model, not {kind!r}")
    if meta.get("format_version") != FORMAT_VERSION:
        raise IncompatibleArchive(f"unsupported format_version {meta.get('format_version')}")
    model = Classifier(kind, ModelConfig.from_dict(meta["config"]))
    state = read_archive(path)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise IncompatibleArchive(str(exc)) from exc
    return model


@dataclass
class LoadReport:
    matched: list[str] = field(default_factory=list)
    shape_mismatched: list[str] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    unexpected: list[str] = field(default_factory=list)
    skipped_head: list[str] = field(default_factory=list)


def load_pretrained(model: Classifier, archive: str | Path) -> tuple[Classifier, LoadReport]:
    """Copy matching backbone tensors from an archive into ``model`` in place.

    Archive names may carry a ``backbone.`` prefix (checkpoints) or not
    (converted ImageNet weights). Head tensors are never loaded.
    """
    tensors = read_archive(archive)
    report = LoadReport()
    source: dict[str, torch.Tensor] = {}
    for name, t in tensors.items():
        if name.startswith("head."):
            report.skipped_head.append(name)
            continue
        source[name.removeprefix("backbone.")] = t

    own = model.backbone.state_dict()
    update = {}
    for name, t in own.items():
        if name not in source:
            report.missing.append(name)
        elif source[name].shape != t.shape:
            report.shape_mismatched.append(name)
        else:
            update[name] = source[name].to(t.dtype)
            report.matched.append(name)
    report.unexpected = sorted(set(source) - set(own))
    if not update:
        raise IncompatibleArchive(f"no tensor in {archive} matches the {model.kind} backbone")
    model.backbone.load_state_dict(update, strict=False)
    return model, report
