"""Residual encoder families: 18-layer basic-block, 50-layer grouped
bottleneck, and the volumetric 18-layer variant.

All encoders map a slice stack (N, S, H, W) to a flat latent vector. The
2-D families consume slices as input channels; the 3-D family treats the
slice axis as a spatial dimension. Trunk channel counts scale with
base_width (canonical width 64); when the trunk's natural feature width
differs from the requested latent_dim a final linear projection bridges
the two, otherwise the pooled features are the latent.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .spec import NetworkSpec


class BasicBlock(nn.Module):
    """Two 3x3 convolutions with an identity (or 1x1-projected) skip."""

    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.shortcut = nn.Sequential()
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride, bias=False), nn.BatchNorm2d(cout)
            )

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class GroupedBottleneck(nn.Module):
    """1x1 reduce, grouped 3x3, 1x1 expand (x2), with skip connection.

    The 3x3 convolution splits its channels into ``groups`` independent
    transformation paths (the cardinality dimension).
    """

    expansion = 2

    def __init__(self, cin, width, stride=1, groups=32):
        super().__init__()
        cout = width * self.expansion
        self.conv1 = nn.Conv2d(cin, width, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(width)
        self.conv2 = nn.Conv2d(width, width, 3, stride, 1, groups=groups, bias=False)
        self.bn2 = nn.BatchNorm2d(width)
        self.conv3 = nn.Conv2d(width, cout, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(cout)
        self.shortcut = nn.Sequential()
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride, bias=False), nn.BatchNorm2d(cout)
            )

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = F.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return F.relu(out + self.shortcut(x))


class BasicBlock3d(nn.Module):
    def __init__(self, cin, cout, stride=(1, 1, 1)):
        super().__init__()
        self.conv1 = nn.Conv3d(cin, cout, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm3d(cout)
        self.conv2 = nn.Conv3d(cout, cout, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm3d(cout)
        self.shortcut = nn.Sequential()
        if any(s != 1 for s in stride) or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv3d(cin, cout, 1, stride, bias=False), nn.BatchNorm3d(cout)
            )

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class Residual18(nn.Module):
    """17-conv trunk (stem + 4 stages x 2 basic blocks) + global pooling."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        s, _, _ = spec.input_shape
        w = spec.base_width
        self.stem = nn.Sequential(
            nn.Conv2d(s, w, 7, 2, 3, bias=False),
            nn.BatchNorm2d(w),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, 2, 1),
        )
        stages = []
        cin = w
        for i, stride in enumerate((1, 2, 2, 2)):
            cout = w * 2**i
            stages.append(BasicBlock(cin, cout, stride))
            stages.append(BasicBlock(cout, cout))
            cin = cout
        self.stages = nn.Sequential(*stages)
        self.feature_width = cin

    def forward(self, x):
        h = self.stages(self.stem(x))
        return F.adaptive_avg_pool2d(h, 1).flatten(1)


class GroupedResidual50(nn.Module):
    """16-bottleneck trunk (3/4/6/3) with grouped 3x3 convolutions."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        s, _, _ = spec.input_shape
        w = spec.base_width
        groups = spec.cardinality
        self.stem = nn.Sequential(
            nn.Conv2d(s, w, 7, 2, 3, bias=False),
            nn.BatchNorm2d(w),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, 2, 1),
        )
        stages = []
        cin = w
        for i, (repeats, stride) in enumerate(((3, 1), (4, 2), (6, 2), (3, 2))):
            width = 2 * w * 2**i
            for r in range(repeats):
                stages.append(
                    GroupedBottleneck(cin, width, stride if r == 0 else 1, groups)
                )
                cin = width * GroupedBottleneck.expansion
        self.stages = nn.Sequential(*stages)
        self.feature_width = cin

    def forward(self, x):
        h = self.stages(self.stem(x))
        return F.adaptive_avg_pool2d(h, 1).flatten(1)


class Residual18Volumetric(nn.Module):
    """Basic-block trunk with volumetric kernels over (S, H, W).

    The slice axis downsamples by 2 at a stage only while at least 4
    slices remain, so shallow stacks keep a usable depth extent.
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        s, _, _ = spec.input_shape
        w = spec.base_width
        self.stem = nn.Sequential(
            nn.Conv3d(1, w, (3, 7, 7), (1, 2, 2), (1, 3, 3), bias=False),
            nn.BatchNorm3d(w),
            nn.ReLU(inplace=True),
            nn.MaxPool3d((1, 3, 3), (1, 2, 2), (0, 1, 1)),
        )
        stages = []
        cin = w
        depth = s
        for i, spatial_stride in enumerate((1, 2, 2, 2)):
            cout = w * 2**i
            depth_stride = 1
            if spatial_stride == 2 and depth >= 4:
                depth_stride = 2
                depth = (depth + 1) // 2
            stride = (depth_stride, spatial_stride, spatial_stride)
            stages.append(BasicBlock3d(cin, cout, stride))
            stages.append(BasicBlock3d(cout, cout))
            cin = cout
        self.stages = nn.Sequential(*stages)
        self.feature_width = cin

    def forward(self, x):
        if x.dim() == 4:
            x = x.unsqueeze(1)  # (N, S, H, W) -> (N, 1, S, H, W)
        h = self.stages(self.stem(x))
        return F.adaptive_avg_pool3d(h, 1).flatten(1)
