"""Convolutional autoencoders with a Tanh-bounded output.

The encoder applies D stride-2 convolution stages (channels doubling from
base_width), flattens, and projects to the latent; the decoder mirrors it
with transposed convolutions and ends in Tanh, so every output voxel lies
in [-1, 1]. The variational variant's projection emits (mean, log-variance)
pairs; deterministic inference encodes to the posterior mean.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .spec import NetworkSpec


class ConvEncoder(nn.Module):
    def __init__(self, spec: NetworkSpec):
        super().__init__()
        s, h, _ = spec.input_shape
        stages = spec.resolved_ae_stages()
        latent = spec.resolved_latent()
        self.variational = spec.variational
        chans = [spec.base_width * 2**i for i in range(stages)]
        layers, cin = [], s
        for cout in chans:
            layers += [nn.Conv2d(cin, cout, 4, 2, 1), nn.ReLU(inplace=True)]
            cin = cout
        self.conv = nn.Sequential(*layers)
        self.bottom = h // 2**stages
        flat = chans[-1] * self.bottom**2
        out_dim = 2 * latent if spec.variational else latent
        self.fc = nn.Linear(flat, out_dim)
        self.latent_dim = latent

    def encode_params(self, x):
        """(mean, logvar) for the variational variant."""
        if not self.variational:
            raise RuntimeError("encode_params is only defined for variational encoders")
        out = self.fc(self.conv(x).flatten(1))
        return out.chunk(2, dim=1)

    def forward(self, x):
        out = self.fc(self.conv(x).flatten(1))
        if self.variational:
            mean, _ = out.chunk(2, dim=1)
            return mean
        return out


class ConvDecoder(nn.Module):
    def __init__(self, spec: NetworkSpec):
        super().__init__()
        s, h, _ = spec.input_shape
        stages = spec.resolved_ae_stages()
        latent = spec.resolved_latent()
        chans = [spec.base_width * 2**i for i in range(stages)]
        self.bottom = h // 2**stages
        self.top_channels = chans[-1]
        self.fc = nn.Linear(latent, self.top_channels * self.bottom**2)
        layers = []
        rev = chans[::-1]
        for i, cin in enumerate(rev):
            cout = rev[i + 1] if i + 1 < len(rev) else s
            layers.append(nn.ConvTranspose2d(cin, cout, 4, 2, 1))
            layers.append(nn.ReLU(inplace=True) if i + 1 < len(rev) else nn.Tanh())
        self.deconv = nn.Sequential(*layers)

    def forward(self, z):
        h = self.fc(z).view(-1, self.top_channels, self.bottom, self.bottom)
        return self.deconv(h)


class Autoencoder(nn.Module):
    """Encoder/decoder pair; forward reconstructs deterministically."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.encoder = ConvEncoder(spec)
        self.decoder = ConvDecoder(spec)
        self.variational = spec.variational
        self.latent_dim = self.encoder.latent_dim

    def reparameterize(self, mean, logvar, generator=None):
        eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
        return mean + eps * torch.exp(0.5 * logvar)

    def forward(self, x):
        return self.decoder(self.encoder(x))
