"""Seeded, fan-in-scaled parameter initialization.

Parameters are visited in registration order (deterministic for a fixed
topology) and drawn from one torch.Generator, so (spec, param_seed) fully
determines the initial state. Weights use the He-uniform bound
sqrt(6 / fan_in); biases start at zero; normalization layers at identity.
"""

from __future__ import annotations

import math

import torch
from torch import nn

_NORM_TYPES = (
    nn.BatchNorm1d,
    nn.BatchNorm2d,
    nn.BatchNorm3d,
    nn.GroupNorm,
    nn.LayerNorm,
)


def seeded_init(module: nn.Module, seed: int) -> nn.Module:
    gen = torch.Generator(device="cpu").manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Conv2d, nn.Conv3d,
                          nn.ConvTranspose1d, nn.ConvTranspose2d, nn.ConvTranspose3d,
                          nn.Linear)):
            # weight[0].numel() is in_channels/groups * prod(kernel) for
            # convs and in_features for linear layers.
            fan_in = m.weight[0].numel()
            if isinstance(m, (nn.ConvTranspose1d, nn.ConvTranspose2d, nn.ConvTranspose3d)):
                # transposed conv weight is (in, out/groups, *kernel)
                fan_in = m.in_channels * m.weight[0, 0].numel() // m.groups
            bound = math.sqrt(6.0 / max(fan_in, 1))
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, _NORM_TYPES):
            with torch.no_grad():
                if m.weight is not None:
                    m.weight.fill_(1.0)
                if m.bias is not None:
                    m.bias.zero_()
    return module
