"""EfficientNet backbone built from MBConv blocks with squeeze-excitation."""

from __future__ import annotations

from typing import NamedTuple

import torch
from torch import nn


class Stage(NamedTuple):
    expand: int
    kernel: int
    stride: int
    in_ch: int
    out_ch: int
    repeats: int


B0_STAGES = (
    Stage(1, 3, 1, 32, 16, 1),
    Stage(6, 3, 2, 16, 24, 2),
    Stage(6, 5, 2, 24, 40, 2),
    Stage(6, 3, 2, 40, 80, 3),
    Stage(6, 5, 1, 80, 112, 3),
    Stage(6, 5, 2, 112, 192, 4),
    Stage(6, 3, 1, 192, 320, 1),
)


class ConvBN(nn.Module):
    def __init__(self, cin, cout, kernel, stride=1, groups=1, act=True):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, kernel, stride, (kernel - 1) // 2, groups=groups, bias=False)
        self.bn = nn.BatchNorm2d(cout)
        self.act = nn.SiLU(inplace=True) if act else nn.Identity()

    def forward(self, x):
        return self.act(self.bn(self.conv(x)))


class SqueezeExcite(nn.Module):
    def __init__(self, channels: int, squeeze: int):
        super().__init__()
        self.reduce = nn.Conv2d(channels, squeeze, 1)
        self.expand = nn.Conv2d(squeeze, channels, 1)
        self.act = nn.SiLU(inplace=True)

    def forward(self, x):
        s = x.mean((2, 3), keepdim=True)
        s = torch.sigmoid(self.expand(self.act(self.reduce(s))))
        return x * s


class MBConv(nn.Module):
    def __init__(self, cin: int, cout: int, expand: int, kernel: int, stride: int, se_ratio: float = 0.25):
        super().__init__()
        hidden = cin * expand
        self.expand = ConvBN(cin, hidden, 1) if expand != 1 else None
        self.depthwise = ConvBN(hidden, hidden, kernel, stride, groups=hidden)
        self.se = SqueezeExcite(hidden, max(1, int(cin * se_ratio)))
        self.project = ConvBN(hidden, cout, 1, act=False)
        self.use_residual = stride == 1 and cin == cout

    def forward(self, x):
        y = x if self.expand is None else self.expand(x)
        y = self.project(self.se(self.depthwise(y)))
        return x + y if self.use_residual else y


class EfficientNetBackbone(nn.Module):
    def __init__(self, stages=B0_STAGES, stem_width: int = 32, top_width: int = 1280):
        super().__init__()
        self.stem = ConvBN(3, stem_width, 3, stride=2)
        blocks = []
        for st in stages:
            layers = []
            for i in range(st.repeats):
                cin = st.in_ch if i == 0 else st.out_ch
                layers.append(MBConv(cin, st.out_ch, st.expand, st.kernel, st.stride if i == 0 else 1))
            blocks.append(nn.Sequential(*layers))
        self.blocks = nn.Sequential(*blocks)
        self.top = ConvBN(stages[-1].out_ch, top_width, 1)
        self.out_features = top_width

    def forward(self, x):
        return self.top(self.blocks(self.stem(x)))


def efficientnetb0() -> EfficientNetBackbone:
    return EfficientNetBackbone()


def desk_efficientnet() -> EfficientNetBackbone:
    # one MBConv per stage, early downsampling; B0's final widths are kept
    stages = (
        Stage(1, 3, 2, 32, 32, 1),
        Stage(6, 3, 2, 32, 96, 1),
        Stage(6, 5, 2, 96, 192, 1),
        Stage(6, 3, 1, 192, 320, 1),
    )
    return EfficientNetBackbone(stages, stem_width=32, top_width=1280)
