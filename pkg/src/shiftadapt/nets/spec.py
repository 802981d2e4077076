"""Declarative network descriptions.

A NetworkSpec plus its param_seed fully determines a network's topology,
initial parameters, and therefore its forward outputs; builders consume
specs rather than loose arguments so checkpoints can embed them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from ..errors import ConfigError

FAMILIES = (
    "residual18",
    "compound_b3",
    "grouped_residual50",
    "residual18_3d",
    "autoencoder",
    "discriminator",
)

ENCODER_FAMILIES = ("residual18", "compound_b3", "grouped_residual50", "residual18_3d")

#: Default latent (penultimate feature) width per family.
DEFAULT_LATENT = {
    "residual18": 512,
    "compound_b3": 512,
    "grouped_residual50": 512,
    "residual18_3d": 512,
    "autoencoder": 128,
}

#: Minimum spatial input side per family (receptive-field floor).
MIN_SIDE = {
    "residual18": 32,
    "compound_b3": 32,
    "grouped_residual50": 32,
    "residual18_3d": 32,
    "autoencoder": 32,
}

MIN_SLICES_3D = 4


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description.

    input_shape is (S, H, W); the 3-D family consumes the S axis spatially
    (equivalently a (1, S, H, W) tensor), all other encoder families stack
    slices as channels. base_width scales trunk channel counts (64 is the
    canonical width; desk-scale profiles use 8-16). ae_stages is the
    autoencoder downsampling depth D (stride-2 stages); None derives it
    from the image size (5 at 256, 4 at 64). critic_widths are the
    discriminator hidden layer sizes.
    """

    family: str
    input_shape: tuple = (10, 256, 256)
    latent_dim: int | None = None
    cardinality: int = 32
    param_seed: int = 0
    base_width: int = 64
    variational: bool = False
    ae_stages: int | None = None
    critic_widths: tuple = (512, 256)

    def resolved_latent(self) -> int:
        if self.latent_dim is not None:
            return self.latent_dim
        if self.family in DEFAULT_LATENT:
            return DEFAULT_LATENT[self.family]
        raise ConfigError(f"{self.family} spec requires an explicit latent_dim")

    def resolved_ae_stages(self) -> int:
        if self.ae_stages is not None:
            return self.ae_stages
        side = self.input_shape[-1]
        # 256 -> 5 stages (8x8 bottom), 64 -> 4 stages (4x4 bottom).
        stages = 1
        while side // (2 ** (stages + 1)) >= 4 and stages < 5:
            stages += 1
        return stages

    def validate(self) -> "NetworkSpec":
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown network family {self.family!r}")
        if self.family == "discriminator":
            if self.latent_dim is None or self.latent_dim <= 0:
                raise ConfigError("discriminator requires latent_dim > 0")
            if len(self.critic_widths) < 1 or any(w <= 0 for w in self.critic_widths):
                raise ConfigError(f"bad critic widths {self.critic_widths}")
            return self

        if len(self.input_shape) != 3 or any(d <= 0 for d in self.input_shape):
            raise ConfigError(f"bad input_shape {self.input_shape}")
        s, h, w = self.input_shape
        if self.resolved_latent() <= 0:
            raise ConfigError("latent_dim must be positive")
        if self.base_width <= 0:
            raise ConfigError("base_width must be positive")
        if min(h, w) < MIN_SIDE[self.family]:
            raise ConfigError(
                f"{self.family} needs input sides >= {MIN_SIDE[self.family]}, got {h}x{w}"
            )
        if self.family == "residual18_3d" and s < MIN_SLICES_3D:
            raise ConfigError(
                f"residual18_3d needs at least {MIN_SLICES_3D} slices, got {s}"
            )
        if self.family == "grouped_residual50":
            if self.cardinality < 1:
                raise ConfigError("cardinality must be >= 1")
            # Stage widths are 2 * base_width * 2**stage; all must split
            # evenly into cardinality groups.
            width0 = 2 * self.base_width
            if width0 % self.cardinality != 0:
                raise ConfigError(
                    f"bottleneck width {width0} not divisible by cardinality {self.cardinality}"
                )
        if self.family == "autoencoder":
            if h != w:
                raise ConfigError(f"autoencoder requires square inputs, got {h}x{w}")
            if h & (h - 1) != 0:
                raise ConfigError(f"autoencoder requires power-of-two sides, got {h}")
            stages = self.resolved_ae_stages()
            if stages < 1 or h // (2**stages) < 2:
                raise ConfigError(
                    f"ae_stages={stages} leaves no spatial extent at the bottleneck"
                )
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        d["critic_widths"] = list(self.critic_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        d = dict(d)
        d["input_shape"] = tuple(d.get("input_shape", (10, 256, 256)))
        d["critic_widths"] = tuple(d.get("critic_widths", (512, 256)))
        return cls(**d)

    def with_seed(self, param_seed: int) -> "NetworkSpec":
        return replace(self, param_seed=param_seed)
