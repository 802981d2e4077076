"""Supervised classifier training, learning-rate/epoch grid search, and
evaluation.

Training minimizes mean cross-entropy with Adam and is deterministic given
the config seed: parameter initialization comes from the spec's param_seed
and the shuffle order from a dedicated numpy generator.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn.functional as F

from .dataio import DatasetSplit, stacks_to_arrays
from .errors import ConfigError, DataError, ShiftAdaptError
from .loop import adam, batch_indices, guard_finite
from .metrics import MetricsReport, classification_report
from .nets import Checkpoint, NetworkSpec, build_classifier

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-4
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        return self


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    loss_curve: list
    val_accuracy_curve: list


def _loss_digest(curve) -> str:
    return hashlib.sha256(np.asarray(curve, dtype=np.float64).tobytes()).hexdigest()[:16]


def _accuracy(model, x: np.ndarray, y: np.ndarray, batch_size: int = 64) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for i in range(0, len(y), batch_size):
            logits = model(torch.from_numpy(x[i : i + batch_size]))
            correct += int((logits.argmax(1).numpy() == y[i : i + batch_size]).sum())
    return correct / len(y)


def train_classifier(split: DatasetSplit, spec: NetworkSpec, cfg: TrainConfig,
                     *, dataset_id: str = "") -> TrainResult:
    """Train encoder + head on split.train; track loss and val accuracy.

    The validation curve is measured on split.val when present, otherwise
    on the training partition (desk-scale splits can be tiny).
    """
    cfg.validate()
    x_train, y_train = stacks_to_arrays(split.train)
    classes = set(y_train.tolist())
    if classes != {0, 1}:
        raise DataError(f"training partition must contain both classes, found {sorted(classes)}")
    if split.val:
        x_val, y_val = stacks_to_arrays(split.val)
    else:
        x_val, y_val = x_train, y_train

    model = build_classifier(spec)
    opt = adam(model.parameters(), cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)

    loss_curve = []
    val_curve = []
    for epoch in range(cfg.epochs):
        model.train()
        epoch_losses = []
        for b, idx in enumerate(batch_indices(len(y_train), cfg.batch_size, rng)):
            xb = torch.from_numpy(x_train[idx])
            yb = torch.from_numpy(y_train[idx])
            opt.zero_grad()
            loss = F.cross_entropy(model(xb), yb)
            epoch_losses.append(
                guard_finite(loss, epoch=epoch, batch=b, context="train_classifier")
            )
            loss.backward()
            opt.step()
        loss_curve.append(float(np.mean(epoch_losses)))
        val_curve.append(_accuracy(model, x_val, y_val))

    meta = {
        "dataset_id": dataset_id,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "loss_digest": _loss_digest(loss_curve),
    }
    ckpt = Checkpoint.capture(model, spec, "classifier", training_meta=meta)
    return TrainResult(checkpoint=ckpt, loss_curve=loss_curve, val_accuracy_curve=val_curve)


# ---------------------------------------------------------------------------
# Grid search


@dataclass
class GridReport:
    """Validation accuracy per (spec, lr, epochs) cell plus the selection."""

    spec_labels: list
    lrs: list
    epoch_budgets: list
    cells: dict = field(default_factory=dict)  # (label, lr, epochs) -> accuracy
    results: dict = field(default_factory=dict)  # (label, lr) -> TrainResult

    def accuracy(self, label: str, lr: float, epochs: int) -> float:
        return self.cells[(label, lr, epochs)]

    def best(self):
        return select_best(self)


def select_best(report: GridReport):
    """Argmax cell; ties broken by fewer epochs, then larger lr, then spec
    order."""
    if not report.cells:
        raise ConfigError("grid report has no cells")
    spec_order = {label: i for i, label in enumerate(report.spec_labels)}
    ranked = sorted(
        report.cells.items(),
        key=lambda kv: (-kv[1], kv[0][2], -kv[0][1], spec_order[kv[0][0]]),
    )
    (label, lr, epochs), acc = ranked[0]
    return label, lr, epochs, acc


def grid_report_from_matrix(matrix: dict, lrs, epoch_budgets) -> GridReport:
    """Build a GridReport from precomputed accuracy matrices.

    `matrix` maps spec label -> lr -> epochs -> accuracy; used to replay
    recorded tuning runs through the selection logic without retraining.
    """
    labels = list(matrix)
    report = GridReport(spec_labels=labels, lrs=list(lrs), epoch_budgets=list(epoch_budgets))
    for label in labels:
        for lr in lrs:
            for ep in epoch_budgets:
                report.cells[(label, lr, ep)] = float(matrix[label][lr][ep])
    return report


def _spec_labels(specs) -> list:
    labels = []
    for spec in specs:
        label = spec.family
        if label in labels:
            label = f"{label}#{sum(1 for l in labels if l.startswith(spec.family))}"
        labels.append(label)
    return labels


def grid_search(split: DatasetSplit, specs, lrs, epoch_budgets,
                base_cfg: TrainConfig | None = None, *, exact: bool = False,
                dataset_id: str = "") -> GridReport:
    """Train every (spec, lr, epochs) cell and record validation accuracy.

    By default each (spec, lr) pair trains once to max(epoch_budgets) and
    intermediate budgets are read off the per-epoch validation curve; the
    deterministic trajectory makes those cells identical to separate runs.
    Pass exact=True to retrain per budget instead.
    """
    if not specs or not lrs or not epoch_budgets:
        raise ConfigError("grid_search requires nonempty specs, lrs, and epoch_budgets")
    base_cfg = base_cfg or TrainConfig()
    labels = _spec_labels(specs)
    budgets = sorted(set(int(e) for e in epoch_budgets))
    report = GridReport(spec_labels=labels, lrs=list(lrs), epoch_budgets=budgets)

    for label, spec in zip(labels, specs):
        for lr in lrs:
            try:
                if exact:
                    for ep in budgets:
                        cfg = replace(base_cfg, learning_rate=lr, epochs=ep)
                        result = train_classifier(split, spec, cfg, dataset_id=dataset_id)
                        report.cells[(label, lr, ep)] = result.val_accuracy_curve[-1]
                        report.results[(label, lr)] = result
                else:
                    cfg = replace(base_cfg, learning_rate=lr, epochs=max(budgets))
                    result = train_classifier(split, spec, cfg, dataset_id=dataset_id)
                    report.results[(label, lr)] = result
                    for ep in budgets:
                        report.cells[(label, lr, ep)] = result.val_accuracy_curve[ep - 1]
            except ShiftAdaptError as exc:
                raise type(exc)(f"grid cell (spec={label}, lr={lr}): {exc}") from exc
            logger.info(
                "grid: spec=%s lr=%g -> %s",
                label, lr,
                {ep: round(report.cells[(label, lr, ep)], 5) for ep in budgets},
            )
    return report


# ---------------------------------------------------------------------------
# Evaluation


def predict(checkpoint: Checkpoint, stacks, batch_size: int = 64):
    """(positive-class scores, hard predictions, labels) for a partition."""
    if not stacks:
        raise DataError("cannot evaluate an empty partition")
    model = checkpoint.materialize()
    x, y = stacks_to_arrays(stacks)
    scores = []
    with torch.no_grad():
        for i in range(0, len(y), batch_size):
            logits = model(torch.from_numpy(x[i : i + batch_size]))
            scores.append(F.softmax(logits, dim=1)[:, 1].numpy())
    scores = np.concatenate(scores)
    preds = (scores >= 0.5).astype(np.int64)
    return scores, preds, y


def evaluate_classifier(checkpoint: Checkpoint, stacks, *, dataset: str = "",
                        model_name: str = "") -> MetricsReport:
    """Full metric suite on a partition; AUC is an undefined marker when a
    class is absent."""
    scores, preds, y = predict(checkpoint, stacks)
    return classification_report(
        y, scores, preds,
        dataset=dataset,
        model=model_name or checkpoint.spec.family,
    )
