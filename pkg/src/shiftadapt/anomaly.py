"""Autoencoder anomaly detection: normal-only training, reconstruction-error
scoring, and AUC.

Two reconstruction objectives are supported. The adversarial model
minimizes per-voxel MSE plus a small adversarial latent-regularization
term: a two-layer critic is trained to tell standard-normal prior draws
from encoder outputs, and the encoder is rewarded for fooling it. The
variational model minimizes MSE + kl_weight * KL(posterior || N(0, I))
with the reparameterization estimator, and encodes to the posterior mean
at inference.

Samples are mapped into the decoder's [-1, 1] output range with a
dataset-level percentile window recorded on the checkpoint, so scoring is
consistent across partitions and domains.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .dataio import intensity_window, to_model_range
from .errors import ConfigError, DataError
from .loop import adam, batch_indices, guard_finite
from .metrics import roc_auc
from .nets import Checkpoint, NetworkSpec, build_autoencoder, build_latent_critic

logger = logging.getLogger(__name__)

MODELS = ("adversarial_ae", "variational_ae")


@dataclass(frozen=True)
class ReconTrainConfig:
    model: str = "adversarial_ae"
    learning_rate: float = 1.5e-3
    epochs: int = 50
    batch_size: int = 16
    kl_weight: float = 1.0        # variational only
    adv_weight: float = 0.02      # adversarial only
    critic_lr: float = 2e-4       # adversarial latent critic
    seed: int = 0

    def validate(self) -> "ReconTrainConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown reconstruction model {self.model!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.kl_weight < 0 or self.adv_weight < 0:
            raise ConfigError("regularizer weights must be non-negative")
        return self


@dataclass(frozen=True)
class AnomalyScore:
    subject_id: str
    reconstruction_mse: float
    label: int | None = None  # evaluation only


def vae_loss(recon, x, mean, logvar, kl_weight: float):
    """Per-voxel MSE plus weighted KL to the standard normal prior.

    KL is summed over latent dimensions and averaged over the batch.
    Returns (total, mse, kl) so callers can log the parts.
    """
    mse = F.mse_loss(recon, x)
    kl = (-0.5 * (1.0 + logvar - mean.pow(2) - logvar.exp()).sum(dim=1)).mean()
    return mse + kl_weight * kl, mse, kl


def train_reconstructor(normal_stacks, spec: NetworkSpec, cfg: ReconTrainConfig,
                        *, window: tuple | None = None, dataset_id: str = "") -> Checkpoint:
    """Train an autoencoder on cognitively normal samples only.

    Every training stack must carry the normal label; the guard is a hard
    error, not an assumption. The [-1, 1] intensity window defaults to the
    training pool's [1st, 99th] percentiles and is recorded on the returned
    checkpoint for scoring.
    """
    cfg.validate()
    if not normal_stacks:
        raise DataError("train_reconstructor requires a nonempty normal partition")
    bad = [st.subject_id for st in normal_stacks if st.label != 0]
    if bad:
        raise DataError(f"demented samples in reconstruction training set: {bad[:5]}")

    variational = cfg.model == "variational_ae"
    if spec.variational != variational:
        raise ConfigError(
            f"spec.variational={spec.variational} does not match model {cfg.model!r}"
        )
    if window is None:
        window = intensity_window(normal_stacks)

    x = np.stack([st.slices for st in normal_stacks]).astype(np.float32)
    x = to_model_range(x, window)

    ae = build_autoencoder(spec)
    opt = adam(ae.parameters(), cfg.learning_rate)
    critic = None
    opt_c = None
    if not variational:
        critic = build_latent_critic(ae.latent_dim, param_seed=cfg.seed + 1)
        opt_c = adam(critic.parameters(), cfg.critic_lr)

    rng = np.random.default_rng(cfg.seed)
    gen = torch.Generator(device="cpu").manual_seed(cfg.seed)
    loss_curve, mse_curve = [], []

    for epoch in range(cfg.epochs):
        ae.train()
        epoch_loss, epoch_mse = [], []
        for b, idx in enumerate(batch_indices(len(x), cfg.batch_size, rng)):
            xb = torch.from_numpy(x[idx])
            if variational:
                opt.zero_grad()
                mean, logvar = ae.encoder.encode_params(xb)
                z = ae.reparameterize(mean, logvar, generator=gen)
                recon = ae.decoder(z)
                loss, mse, _ = vae_loss(recon, xb, mean, logvar, cfg.kl_weight)
                guard_finite(loss, epoch=epoch, batch=b, context="train_reconstructor")
                loss.backward()
                opt.step()
            else:
                # critic step: prior draws = 1, encoded latents = 0
                z = ae.encoder(xb)
                opt_c.zero_grad()
                z_prior = torch.randn(z.shape, generator=gen)
                logits = critic(torch.cat([z_prior, z.detach()]))
                labels = torch.cat([torch.ones(len(z_prior)), torch.zeros(len(z))])
                critic_loss = F.binary_cross_entropy_with_logits(logits, labels)
                critic_loss.backward()
                opt_c.step()
                # reconstruction step with the latent pushed toward the prior
                opt.zero_grad()
                z = ae.encoder(xb)
                recon = ae.decoder(z)
                mse = F.mse_loss(recon, xb)
                adv = F.binary_cross_entropy_with_logits(critic(z), torch.ones(len(z)))
                loss = mse + cfg.adv_weight * adv
                guard_finite(loss, epoch=epoch, batch=b, context="train_reconstructor")
                loss.backward()
                opt.step()
            epoch_loss.append(float(loss.detach()))
            epoch_mse.append(float(mse.detach()))
        loss_curve.append(float(np.mean(epoch_loss)))
        mse_curve.append(float(np.mean(epoch_mse)))

    meta = {
        "dataset_id": dataset_id,
        "model": cfg.model,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "seed": cfg.seed,
        "window": [float(window[0]), float(window[1])],
        "loss_curve": loss_curve,
        "mse_curve": mse_curve,
    }
    return Checkpoint.capture(ae, spec, "autoencoder", training_meta=meta)


def checkpoint_window(ckpt: Checkpoint) -> tuple:
    win = ckpt.training_meta.get("window")
    if win is None:
        raise DataError("checkpoint records no intensity window")
    return float(win[0]), float(win[1])


def score_with_modules(encoder, decoder, stacks, *, window=None, batch_size: int = 64):
    """Reconstruction MSE per stack through an explicit encoder/decoder pair."""
    if not stacks:
        raise DataError("cannot score an empty sample set")
    x = np.stack([st.slices for st in stacks]).astype(np.float32)
    if window is not None:
        x = to_model_range(x, window)
    encoder.eval()
    decoder.eval()
    scores = []
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            xb = torch.from_numpy(x[i : i + batch_size])
            recon = decoder(encoder(xb))
            mse = ((recon - xb) ** 2).flatten(1).mean(1).numpy()
            scores.extend(mse.tolist())
    return [
        AnomalyScore(subject_id=st.subject_id, reconstruction_mse=float(s), label=st.label)
        for st, s in zip(stacks, scores)
    ]


def score_reconstruction(checkpoint: Checkpoint, stacks, *, window=None):
    """Score samples by reconstruction MSE under a trained autoencoder.

    Inputs are mapped into [-1, 1] with the checkpoint's recorded window
    unless one is passed explicitly. Variational checkpoints encode to the
    posterior mean (no sampling at inference), so scoring is deterministic.
    """
    if checkpoint.model_kind != "autoencoder":
        raise ConfigError("score_reconstruction requires an autoencoder checkpoint")
    ae = checkpoint.materialize()
    expected = tuple(checkpoint.spec.input_shape)
    for st in stacks:
        if tuple(st.slices.shape) != expected:
            raise DataError(
                f"sample {st.subject_id!r} shape {st.slices.shape} does not match "
                f"checkpoint input {expected}"
            )
    if window is None:
        window = checkpoint_window(checkpoint)
    return score_with_modules(ae.encoder, ae.decoder, stacks, window=window)


def anomaly_auc(scores) -> float | None:
    """ROC-AUC of reconstruction error, demented = positive.

    Returns the undefined marker (None) when only one class is present.
    """
    if not scores:
        raise DataError("anomaly_auc requires at least one score")
    values = [s.reconstruction_mse for s in scores]
    labels = [s.label for s in scores]
    if any(lab is None for lab in labels):
        raise DataError("anomaly_auc requires labeled scores")
    return roc_auc(values, labels)


def write_scores_csv(scores, path) -> None:
    """Persist scores in the documented ``subject_id,mse,label`` layout."""
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("subject_id,mse,label\n")
        for s in scores:
            label = "" if s.label is None else s.label
            fh.write(f"{s.subject_id},{s.reconstruction_mse!r},{label}\n")
