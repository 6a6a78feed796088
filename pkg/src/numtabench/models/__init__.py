from numtabench.models.core import (
    BACKBONES,
    DESK_KINDS,
    FULL_KINDS,
    ArchiveError,
    Classifier,
    IncompatibleArchive,
    LoadReport,
    ModelConfig,
    ParameterSummary,
    UnsupportedKind,
    build_model,
    forward,
    load_checkpoint,
    load_pretrained,
    logits,
    parameter_count,
    read_archive,
    save_checkpoint,
)

__all__ = [
    "BACKBONES",
    "DESK_KINDS",
    "FULL_KINDS",
    "ArchiveError",
    "Classifier",
    "IncompatibleArchive",
    "LoadReport",
    "ModelConfig",
    "ParameterSummary",
    "UnsupportedKind",
    "build_model",
    "forward",
    "load_checkpoint",
    "load_pretrained",
    "logits",
    "parameter_count",
    "read_archive",
    "save_checkpoint",
]
