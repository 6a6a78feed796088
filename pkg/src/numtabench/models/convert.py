"""Convert torchvision ImageNet weights into backbone archives.

ResNet-50 and Inception-v3 share torchvision's module names, so only the
classifier (and Inception's auxiliary head) is dropped. EfficientNet-B0 is
renamed from torchvision's positional ``features.*`` layout.

Usage::

    python -m numtabench.models.convert efficientnetb0 weights/efficientnetb0
    python -m numtabench.models.convert resnet50 out --state-dict resnet50.pth

Without ``--state-dict`` the torchvision ImageNet weights are downloaded
(network access required).
"""

from __future__ import annotations

import argparse
import json
import re
from pathlib import Path

import torch
from safetensors.torch import save_file

from numtabench.models.core import FORMAT_VERSION, ModelConfig

_TV_BUILDERS = {
    "resnet50": ("resnet50", "ResNet50_Weights"),
    "inceptionv3": ("inception_v3", "Inception_V3_Weights"),
    "efficientnetb0": ("efficientnet_b0", "EfficientNet_B0_Weights"),
}

_DROP = re.compile(r"^(fc\.|classifier\.|AuxLogits\.)")


def _efficientnet_name(name: str, n_parts: dict[str, int]) -> str | None:
    if name.startswith("classifier."):
        return None
    m = re.match(r"features\.(\d+)\.(\d+)\.(.*)$", name)
    if m is None:
        raise KeyError(name)
    stage, sub, rest = int(m[1]), m[2], m[3]
    last = max(int(k.split(".")[1]) for k in n_parts if k.startswith("features."))
    if stage == 0 or stage == last:
        layer = "stem" if stage == 0 else "top"
        return f"{layer}.{ {'0': 'conv', '1': 'bn'}[sub] }.{rest}"
    blk = re.match(r"block\.(\d+)\.(.*)$", rest)
    j, tail = int(blk[1]), blk[2]
    roles = ["expand", "depthwise", "se", "project"]
    if n_parts[f"features.{stage}.{sub}"] == 3:
        roles = roles[1:]
    role = roles[j]
    if role == "se":
        tail = tail.replace("fc1.", "reduce.").replace("fc2.", "expand.")
    else:
        tail = tail.replace("0.", "conv.", 1) if tail.startswith("0.") else tail.replace("1.", "bn.", 1)
    return f"blocks.{stage - 1}.{sub}.{role}.{tail}"


def convert_state_dict(kind: str, state: dict[str, torch.Tensor]) -> dict[str, torch.Tensor]:
    """Map a torchvision ``state_dict`` onto this package's backbone names."""
    if kind not in _TV_BUILDERS:
        raise ValueError(f"no torchvision counterpart for {kind!r}")
    out: dict[str, torch.Tensor] = {}
    if kind != "efficientnetb0":
        for name, t in state.items():
            if not _DROP.match(name):
                out[name] = t
        return out

    # count sub-blocks of every MBConv so blocks without an expansion conv map correctly
    n_parts: dict[str, int] = {}
    for name in state:
        m = re.match(r"(features\.\d+\.\d+)\.block\.(\d+)\.", name)
        if m:
            n_parts[m[1]] = max(n_parts.get(m[1], 0), int(m[2]) + 1)
        elif name.startswith("features."):
            n_parts.setdefault(".".join(name.split(".")[:2]), 0)
    for name, t in state.items():
        new = _efficientnet_name(name, n_parts)
        if new is not None:
            out[new] = t
    return out


def write_archive(kind: str, tensors: dict[str, torch.Tensor], path: str | Path) -> Path:
    path = Path(path)
    tpath = path if path.suffix == ".safetensors" else path.with_suffix(".safetensors")
    tpath.parent.mkdir(parents=True, exist_ok=True)
    save_file({k: v.contiguous() for k, v in tensors.items()}, str(tpath), metadata={"kind": kind})
    meta = {"kind": kind, "config": ModelConfig().to_dict(), "format_version": FORMAT_VERSION,
            "source": "torchvision"}
    tpath.with_suffix(".json").write_text(json.dumps(meta, indent=1))
    return tpath


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("kind", choices=sorted(_TV_BUILDERS))
    p.add_argument("out", help="archive path (.safetensors added if missing)")
    p.add_argument("--state-dict", help="local torchvision .pth file instead of downloading")
    args = p.parse_args(argv)
    if args.state_dict:
        state = torch.load(args.state_dict, map_location="cpu", weights_only=True)
    else:
        import torchvision.models as tvm

        fn, weights = _TV_BUILDERS[args.kind]
        state = getattr(tvm, fn)(weights=getattr(tvm, weights).IMAGENET1K_V1).state_dict()
    print(write_archive(args.kind, convert_state_dict(args.kind, state), args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
