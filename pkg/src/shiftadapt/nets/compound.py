"""Compound-scaled convolutional encoder (inverted-residual trunk).

The base stage table is scaled along width and depth by the fixed
compound coefficients of the B3 operating point (width x1.2, depth x1.4);
base_width additionally rescales all widths relative to the canonical
32-channel stem so the same topology runs thin on CPU.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .spec import NetworkSpec

# (expansion, channels, repeats, stride, kernel)
_BASE_STAGES = (
    (1, 16, 1, 1, 3),
    (6, 24, 2, 2, 3),
    (6, 40, 2, 2, 5),
    (6, 80, 3, 2, 3),
    (6, 112, 3, 1, 5),
    (6, 192, 4, 2, 5),
    (6, 320, 1, 1, 3),
)
_STEM = 32
_HEAD = 1280
_WIDTH_COEF = 1.2
_DEPTH_COEF = 1.4
_SE_RATIO = 0.25


def _round_filters(channels: float, width_mult: float) -> int:
    c = channels * width_mult
    new = max(8, int(c + 4) // 8 * 8)
    if new < 0.9 * c:
        new += 8
    return int(new)


def _round_repeats(repeats: int) -> int:
    return int(math.ceil(_DEPTH_COEF * repeats))


class SqueezeExcite(nn.Module):
    def __init__(self, channels, reduced):
        super().__init__()
        self.reduce = nn.Conv2d(channels, reduced, 1)
        self.expand = nn.Conv2d(reduced, channels, 1)

    def forward(self, x):
        s = F.adaptive_avg_pool2d(x, 1)
        s = torch.sigmoid(self.expand(F.silu(self.reduce(s))))
        return x * s


class MBConv(nn.Module):
    """Inverted residual: expand, depthwise, squeeze-excite, project."""

    def __init__(self, cin, cout, expansion, stride, kernel):
        super().__init__()
        mid = cin * expansion
        layers = []
        if expansion != 1:
            layers += [
                nn.Conv2d(cin, mid, 1, bias=False),
                nn.BatchNorm2d(mid),
                nn.SiLU(inplace=True),
            ]
        layers += [
            nn.Conv2d(mid, mid, kernel, stride, kernel // 2, groups=mid, bias=False),
            nn.BatchNorm2d(mid),
            nn.SiLU(inplace=True),
            SqueezeExcite(mid, max(1, int(cin * _SE_RATIO))),
            nn.Conv2d(mid, cout, 1, bias=False),
            nn.BatchNorm2d(cout),
        ]
        self.block = nn.Sequential(*layers)
        self.use_skip = stride == 1 and cin == cout

    def forward(self, x):
        out = self.block(x)
        return x + out if self.use_skip else out


class CompoundNet(nn.Module):
    def __init__(self, spec: NetworkSpec):
        super().__init__()
        s, _, _ = spec.input_shape
        width_mult = _WIDTH_COEF * spec.base_width / _STEM
        stem_c = _round_filters(_STEM, width_mult)
        self.stem = nn.Sequential(
            nn.Conv2d(s, stem_c, 3, 2, 1, bias=False),
            nn.BatchNorm2d(stem_c),
            nn.SiLU(inplace=True),
        )
        blocks = []
        cin = stem_c
        for expansion, channels, repeats, stride, kernel in _BASE_STAGES:
            cout = _round_filters(channels, width_mult)
            for r in range(_round_repeats(repeats)):
                blocks.append(
                    MBConv(cin, cout, expansion, stride if r == 0 else 1, kernel)
                )
                cin = cout
        self.blocks = nn.Sequential(*blocks)
        head_c = _round_filters(_HEAD, width_mult)
        self.head = nn.Sequential(
            nn.Conv2d(cin, head_c, 1, bias=False),
            nn.BatchNorm2d(head_c),
            nn.SiLU(inplace=True),
        )
        self.feature_width = head_c

    def forward(self, x):
        h = self.head(self.blocks(self.stem(x)))
        return F.adaptive_avg_pool2d(h, 1).flatten(1)
