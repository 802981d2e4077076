"""Dense heads: classifier head, domain critic, and the latent prior critic."""

from __future__ import annotations

from torch import nn


class ClassifierHead(nn.Module):
    """Affine map from the latent vector to 2 class logits."""

    def __init__(self, latent_dim: int):
        super().__init__()
        self.fc = nn.Linear(latent_dim, 2)

    def forward(self, z):
        return self.fc(z)


class Discriminator(nn.Module):
    """Domain critic: MLP from latent vector to one logit (source=1)."""

    def __init__(self, latent_dim: int, widths=(512, 256)):
        super().__init__()
        layers = []
        cin = latent_dim
        for w in widths:
            layers += [nn.Linear(cin, w), nn.ReLU(inplace=True)]
            cin = w
        layers.append(nn.Linear(cin, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, z):
        return self.net(z).squeeze(-1)


class LatentPriorCritic(nn.Module):
    """Two-layer critic distinguishing prior draws from encoder outputs
    (the adversarial autoencoder's latent regularizer)."""

    def __init__(self, latent_dim: int, hidden: int = 128):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(latent_dim, hidden), nn.ReLU(inplace=True), nn.Linear(hidden, 1)
        )

    def forward(self, z):
        return self.net(z).squeeze(-1)
