"""Network builders: classifier encoders, autoencoders, and critics."""

from .autoencoder import Autoencoder, ConvDecoder, ConvEncoder
from .build import (
    Classifier,
    Encoder,
    build_autoencoder,
    build_classifier,
    build_classifier_head,
    build_discriminator,
    build_encoder,
    build_latent_critic,
    build_model,
    parameter_count,
)
from .checkpoint import Checkpoint, params_digest
from .init import seeded_init
from .mlp import ClassifierHead, Discriminator, LatentPriorCritic
from .spec import ENCODER_FAMILIES, FAMILIES, NetworkSpec

__all__ = [
    "Autoencoder",
    "Checkpoint",
    "Classifier",
    "ClassifierHead",
    "ConvDecoder",
    "ConvEncoder",
    "Discriminator",
    "Encoder",
    "ENCODER_FAMILIES",
    "FAMILIES",
    "LatentPriorCritic",
    "NetworkSpec",
    "build_autoencoder",
    "build_classifier",
    "build_classifier_head",
    "build_discriminator",
    "build_encoder",
    "build_latent_critic",
    "build_model",
    "parameter_count",
    "params_digest",
    "seeded_init",
]
