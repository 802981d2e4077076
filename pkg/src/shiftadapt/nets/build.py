"""Builders dispatching NetworkSpecs to concrete modules.

Every builder ends with the seeded fan-in initialization, so an identical
(spec, param_seed) pair always yields identical parameters.
"""

from __future__ import annotations

import torch.nn.functional as F
from torch import nn

from ..errors import ConfigError
from .autoencoder import Autoencoder
from .compound import CompoundNet
from .init import seeded_init
from .mlp import ClassifierHead, Discriminator, LatentPriorCritic
from .residual import GroupedResidual50, Residual18, Residual18Volumetric
from .spec import ENCODER_FAMILIES, NetworkSpec

_TRUNKS = {
    "residual18": Residual18,
    "grouped_residual50": GroupedResidual50,
    "residual18_3d": Residual18Volumetric,
    "compound_b3": CompoundNet,
}


class Encoder(nn.Module):
    """Trunk + optional linear projection onto the requested latent width."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.trunk = _TRUNKS[spec.family](spec)
        latent = spec.resolved_latent()
        self.proj = None
        if self.trunk.feature_width != latent:
            self.proj = nn.Linear(self.trunk.feature_width, latent)
        self.latent_dim = latent

    def forward(self, x):
        z = self.trunk(x)
        return self.proj(z) if self.proj is not None else z


class Classifier(nn.Module):
    """Encoder composed with the 2-logit head."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.encoder = Encoder(spec)
        self.head = ClassifierHead(self.encoder.latent_dim)

    def forward(self, x):
        return self.head(self.encoder(x))


def build_encoder(spec: NetworkSpec) -> Encoder:
    spec.validate()
    if spec.family not in ENCODER_FAMILIES:
        raise ConfigError(f"{spec.family!r} is not a classifier encoder family")
    return seeded_init(Encoder(spec), spec.param_seed)


def build_classifier(spec: NetworkSpec) -> Classifier:
    spec.validate()
    if spec.family not in ENCODER_FAMILIES:
        raise ConfigError(f"{spec.family!r} is not a classifier encoder family")
    return seeded_init(Classifier(spec), spec.param_seed)


def build_classifier_head(latent_dim: int, param_seed: int = 0) -> ClassifierHead:
    if latent_dim <= 0:
        raise ConfigError(f"latent_dim must be positive, got {latent_dim}")
    return seeded_init(ClassifierHead(latent_dim), param_seed)


def build_autoencoder(spec: NetworkSpec) -> Autoencoder:
    spec.validate()
    if spec.family != "autoencoder":
        raise ConfigError(f"expected an autoencoder spec, got family {spec.family!r}")
    return seeded_init(Autoencoder(spec), spec.param_seed)


def build_discriminator(latent_dim: int, widths=(512, 256), param_seed: int = 0) -> Discriminator:
    if latent_dim <= 0:
        raise ConfigError(f"latent_dim must be positive, got {latent_dim}")
    return seeded_init(Discriminator(latent_dim, widths), param_seed)


def build_latent_critic(latent_dim: int, hidden: int = 128, param_seed: int = 0) -> LatentPriorCritic:
    if latent_dim <= 0:
        raise ConfigError(f"latent_dim must be positive, got {latent_dim}")
    return seeded_init(LatentPriorCritic(latent_dim, hidden), param_seed)


#: Recognized model kinds for checkpoint materialization. Sub-model kinds
#: (head, decoder, ae_encoder) rebuild the matching component of a composed
#: checkpoint's spec.
MODEL_KINDS = (
    "encoder", "classifier", "autoencoder", "ae_encoder", "decoder", "head",
    "discriminator",
)


def build_model(spec: NetworkSpec, model_kind: str) -> nn.Module:
    if model_kind == "encoder":
        return build_encoder(spec)
    if model_kind == "classifier":
        return build_classifier(spec)
    if model_kind == "autoencoder":
        return build_autoencoder(spec)
    if model_kind == "ae_encoder":
        spec.validate()
        from .autoencoder import ConvEncoder

        return seeded_init(ConvEncoder(spec), spec.param_seed)
    if model_kind == "decoder":
        spec.validate()
        from .autoencoder import ConvDecoder

        return seeded_init(ConvDecoder(spec), spec.param_seed)
    if model_kind == "head":
        return build_classifier_head(spec.resolved_latent(), spec.param_seed)
    if model_kind == "discriminator":
        return build_discriminator(
            spec.resolved_latent(), spec.critic_widths, spec.param_seed
        )
    raise ConfigError(f"unknown model kind {model_kind!r}")


def parameter_count(spec: NetworkSpec, model_kind: str | None = None) -> int:
    """Exact number of trainable scalars for the spec's default model.

    Encoder families count the bare encoder; pass model_kind to count a
    composed model instead.
    """
    spec.validate()
    if model_kind is None:
        if spec.family == "autoencoder":
            model_kind = "autoencoder"
        elif spec.family == "discriminator":
            model_kind = "discriminator"
        else:
            model_kind = "encoder"
    model = build_model(spec, model_kind)
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
