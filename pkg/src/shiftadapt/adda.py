"""Adversarial discriminative adaptation of encoders.

A frozen source encoder defines the reference latent distribution; a
target encoder (initialized as an exact copy) is trained so a domain
critic cannot tell its latents from the source's. Each batch alternates:

  (a) the critic minimizes binary cross-entropy labeling source latents 1
      and target latents 0, at critic_lr;
  (b) the target encoder minimizes the inverted-label loss
      -log sigmoid(critic(target latent)), at target_lr, with the critic
      frozen.

The task head (classifier head or autoencoder decoder) is never touched;
only the encoder adapts. Variants differ in which target samples the loop
admits:

  classifier            all target samples, labels never read
  anomaly_supervised    cognitively normal target samples only
  anomaly_unsupervised  all target samples, labels never read

Epochs iterate over the full admitted target set (ragged trailing batches
dropped to keep batch statistics uniform), with source batches drawn from
an endless seeded stream.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .dataio import to_model_range
from .errors import ConfigError, DataError, TrainingDivergedError
from .loop import SourceCycler, adam, batch_indices
from .metrics import MetricsReport
from .nets import Checkpoint, build_discriminator, params_digest, seeded_init
from .nets.build import build_model

logger = logging.getLogger(__name__)

VARIANTS = ("classifier", "anomaly_supervised", "anomaly_unsupervised")

#: Epoch milestones at which adaptation checkpoints are persisted when a
#: run directory is given.
CHECKPOINT_MILESTONES = (10, 20, 30, 50, 100)


@dataclass(frozen=True)
class AddaConfig:
    critic_lr: float = 1e-5
    target_lr: float = 1e-6
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    variant: str = "classifier"
    init_target_from_source: bool = True
    critic_widths: tuple = (512, 256)

    def validate(self) -> "AddaConfig":
        if self.critic_lr <= 0 or self.target_lr <= 0:
            raise ConfigError("both adaptation learning rates must be positive")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown adaptation variant {self.variant!r}")
        return self


@dataclass
class AdaptationBundle:
    """Frozen source side, trainable target side, and the run history."""

    source_encoder: Checkpoint
    target_encoder: Checkpoint
    task_head: Checkpoint
    discriminator: Checkpoint | None
    variant: str
    history: list = field(default_factory=list)  # (epoch, critic_loss, target_loss)
    window: tuple | None = None  # [-1,1] intensity window for anomaly variants

    @property
    def is_anomaly(self) -> bool:
        return self.variant != "classifier"


def _sub_checkpoint(ckpt: Checkpoint, prefix: str, model_kind: str) -> Checkpoint:
    state = {
        name[len(prefix):]: arr
        for name, arr in ckpt.state.items()
        if name.startswith(prefix)
    }
    if not state:
        raise DataError(f"checkpoint has no tensors under prefix {prefix!r}")
    return Checkpoint(
        spec=ckpt.spec,
        model_kind=model_kind,
        state=state,
        training_meta=dict(ckpt.training_meta),
    )


def make_classifier_bundle(classifier_ckpt: Checkpoint, cfg: AddaConfig) -> AdaptationBundle:
    """Split a trained classifier into a frozen encoder + head bundle.

    The target encoder starts as an exact copy of the source encoder (or a
    reseeded random encoder when init_target_from_source is off).
    """
    if classifier_ckpt.model_kind != "classifier":
        raise ConfigError("classifier bundle requires a classifier checkpoint")
    source_enc = _sub_checkpoint(classifier_ckpt, "encoder.", "encoder")
    head = _sub_checkpoint(classifier_ckpt, "head.", "head")
    target_enc = _init_target(source_enc, cfg)
    return AdaptationBundle(
        source_encoder=source_enc,
        target_encoder=target_enc,
        task_head=head,
        discriminator=None,
        variant=cfg.variant,
    )


def make_anomaly_bundle(ae_ckpt: Checkpoint, cfg: AddaConfig,
                        window: tuple | None = None) -> AdaptationBundle:
    """Split a trained autoencoder into encoder bundle + frozen decoder."""
    if ae_ckpt.model_kind != "autoencoder":
        raise ConfigError("anomaly bundle requires an autoencoder checkpoint")
    if cfg.variant == "classifier":
        raise ConfigError("anomaly bundle requires an anomaly_* variant")
    source_enc = _sub_checkpoint(ae_ckpt, "encoder.", "ae_encoder")
    decoder = _sub_checkpoint(ae_ckpt, "decoder.", "decoder")
    target_enc = _init_target(source_enc, cfg)
    return AdaptationBundle(
        source_encoder=source_enc,
        target_encoder=target_enc,
        task_head=decoder,
        discriminator=None,
        variant=cfg.variant,
        window=window,
    )


def _init_target(source_enc: Checkpoint, cfg: AddaConfig) -> Checkpoint:
    if cfg.init_target_from_source:
        return Checkpoint(
            spec=source_enc.spec,
            model_kind=source_enc.model_kind,
            state=copy.deepcopy(source_enc.state),
            training_meta={"initialized_from": "source"},
        )
    module = build_model(source_enc.spec.with_seed(cfg.seed), source_enc.model_kind)
    return Checkpoint.capture(
        module, source_enc.spec.with_seed(cfg.seed), source_enc.model_kind,
        training_meta={"initialized_from": "random"},
    )


def _admitted_arrays(target_stacks, variant: str, window) -> np.ndarray:
    """Admission filter; labels are read only on the supervised path."""
    if variant == "anomaly_supervised":
        stacks = [st for st in target_stacks if st.label == 0]
    else:
        stacks = list(target_stacks)
    if not stacks:
        raise DataError(f"variant {variant!r} admitted no target samples")
    x = np.stack([st.slices for st in stacks]).astype(np.float32)
    if window is not None:
        x = to_model_range(x, window)
    return x


def _source_arrays(source_stacks, window) -> np.ndarray:
    x = np.stack([st.slices for st in source_stacks]).astype(np.float32)
    if window is not None:
        x = to_model_range(x, window)
    return x


def adapt(source_stacks, target_stacks, bundle: AdaptationBundle, cfg: AddaConfig,
          *, run_dir=None) -> AdaptationBundle:
    """Run the alternating adversarial loop; returns a new bundle.

    The source encoder and task head are never modified. With epochs=0 the
    returned target encoder is bit-identical to the source copy. When
    run_dir is given, per-epoch history goes to history.csv and target
    checkpoints are saved at the milestone epochs.
    """
    cfg.validate()
    if cfg.variant != bundle.variant:
        raise ConfigError(
            f"config variant {cfg.variant!r} does not match bundle {bundle.variant!r}"
        )
    window = bundle.window if bundle.is_anomaly else None
    x_src = _source_arrays(source_stacks, window)
    x_tgt = _admitted_arrays(target_stacks, cfg.variant, window)

    source_digest = params_digest(bundle.source_encoder.state)
    head_digest = params_digest(bundle.task_head.state)

    src_enc = bundle.source_encoder.materialize()
    src_enc.eval()
    tgt_enc = bundle.target_encoder.materialize()
    latent_dim = bundle.source_encoder.spec.resolved_latent()
    critic = build_discriminator(latent_dim, cfg.critic_widths, param_seed=cfg.seed)

    opt_c = adam(critic.parameters(), cfg.critic_lr)
    opt_t = adam(tgt_enc.parameters(), cfg.target_lr)
    rng = np.random.default_rng(cfg.seed)
    batch_size = min(cfg.batch_size, len(x_tgt))
    src_stream = SourceCycler(len(x_src), min(batch_size, len(x_src)), rng)

    history = []
    last_good = Checkpoint.capture(
        tgt_enc, bundle.target_encoder.spec, bundle.target_encoder.model_kind
    )
    run_dir = Path(run_dir) if run_dir is not None else None

    for epoch in range(cfg.epochs):
        tgt_enc.train()
        critic.train()
        critic_losses, target_losses = [], []
        try:
            for idx_t in batch_indices(len(x_tgt), batch_size, rng, drop_last=True):
                xb_t = torch.from_numpy(x_tgt[idx_t])
                xb_s = torch.from_numpy(x_src[src_stream.next_batch()])
                with torch.no_grad():
                    zs = src_enc(xb_s)
                zt = tgt_enc(xb_t)

                # (a) critic step: source=1, target=0
                opt_c.zero_grad()
                logits = critic(torch.cat([zs, zt.detach()]))
                labels = torch.cat([torch.ones(len(zs)), torch.zeros(len(zt))])
                critic_loss = F.binary_cross_entropy_with_logits(logits, labels)
                critic_loss.backward()
                opt_c.step()

                # (b) target step with inverted labels, critic frozen
                opt_t.zero_grad()
                zt = tgt_enc(xb_t)
                target_loss = F.binary_cross_entropy_with_logits(
                    critic(zt), torch.ones(len(zt))
                )
                target_loss.backward()
                opt_t.step()

                c_val, t_val = float(critic_loss.detach()), float(target_loss.detach())
                if not (np.isfinite(c_val) and np.isfinite(t_val)):
                    raise TrainingDivergedError(
                        f"adapt: non-finite adversarial loss at epoch {epoch}",
                        epoch=epoch, loss=(c_val, t_val),
                    )
                critic_losses.append(c_val)
                target_losses.append(t_val)
        except TrainingDivergedError as exc:
            exc.last_good_bundle = AdaptationBundle(
                source_encoder=bundle.source_encoder,
                target_encoder=last_good,
                task_head=bundle.task_head,
                discriminator=Checkpoint.capture(
                    critic,
                    bundle.source_encoder.spec.with_seed(cfg.seed),
                    "discriminator",
                ),
                variant=cfg.variant,
                history=history,
                window=bundle.window,
            )
            raise
        history.append((epoch + 1, float(np.mean(critic_losses)), float(np.mean(target_losses))))
        last_good = Checkpoint.capture(
            tgt_enc, bundle.target_encoder.spec, bundle.target_encoder.model_kind
        )
        if run_dir is not None and (epoch + 1) in CHECKPOINT_MILESTONES:
            last_good.save(run_dir / f"target_encoder_epoch{epoch + 1:03d}.ckpt")
        logger.info(
            "adapt[%s] epoch %d: critic=%.4f target=%.4f",
            cfg.variant, epoch + 1, history[-1][1], history[-1][2],
        )

    if params_digest(bundle.source_encoder.state) != source_digest:
        raise RuntimeError("source encoder mutated during adaptation")
    if params_digest(bundle.task_head.state) != head_digest:
        raise RuntimeError("task head mutated during adaptation")

    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        with (run_dir / "history.csv").open("w", encoding="utf-8") as fh:
            fh.write("epoch,critic_loss,target_loss\n")
            for epoch, c, t in history:
                fh.write(f"{epoch},{c!r},{t!r}\n")

    return AdaptationBundle(
        source_encoder=bundle.source_encoder,
        target_encoder=last_good,
        task_head=bundle.task_head,
        discriminator=Checkpoint.capture(
            critic, bundle.source_encoder.spec.with_seed(cfg.seed), "discriminator"
        ),
        variant=cfg.variant,
        history=history,
        window=bundle.window,
    )


# ---------------------------------------------------------------------------
# Evaluation paths


def _classifier_metrics(encoder_ckpt, head_ckpt, stacks, dataset, model_name) -> MetricsReport:
    from .metrics import classification_report

    if not stacks:
        raise DataError("cannot evaluate an empty partition")
    enc = encoder_ckpt.materialize()
    head = head_ckpt.materialize()
    x = np.stack([st.slices for st in stacks]).astype(np.float32)
    y = np.array([st.label for st in stacks], dtype=np.int64)
    scores = []
    with torch.no_grad():
        for i in range(0, len(y), 64):
            logits = head(enc(torch.from_numpy(x[i : i + 64])))
            scores.append(F.softmax(logits, dim=1)[:, 1].numpy())
    scores = np.concatenate(scores)
    preds = (scores >= 0.5).astype(np.int64)
    return classification_report(y, scores, preds, dataset=dataset, model=model_name)


def _anomaly_metrics(encoder_ckpt, decoder_ckpt, stacks, window, dataset, model_name) -> MetricsReport:
    from .anomaly import anomaly_auc, score_with_modules

    scores = score_with_modules(
        encoder_ckpt.materialize(), decoder_ckpt.materialize(), stacks, window=window
    )
    rep = MetricsReport(dataset=dataset, model=model_name)
    rep.set_metric("auc", anomaly_auc(scores))
    return rep


def evaluate_no_da(bundle: AdaptationBundle, target_stacks, *, dataset: str = "",
                   model_name: str = "no_da") -> MetricsReport:
    """Run target samples through the unadapted source encoder + task head."""
    if bundle.is_anomaly:
        return _anomaly_metrics(
            bundle.source_encoder, bundle.task_head, target_stacks,
            bundle.window, dataset, model_name,
        )
    return _classifier_metrics(
        bundle.source_encoder, bundle.task_head, target_stacks, dataset, model_name
    )


def evaluate_adapted(bundle: AdaptationBundle, target_stacks, *, dataset: str = "",
                     model_name: str = "adda") -> MetricsReport:
    """Run target samples through the adapted target encoder + frozen head."""
    if bundle.is_anomaly:
        return _anomaly_metrics(
            bundle.target_encoder, bundle.task_head, target_stacks,
            bundle.window, dataset, model_name,
        )
    return _classifier_metrics(
        bundle.target_encoder, bundle.task_head, target_stacks, dataset, model_name
    )
