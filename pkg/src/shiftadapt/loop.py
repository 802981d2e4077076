"""Shared training-loop plumbing: seeded batching and divergence guards."""

from __future__ import annotations

import numpy as np
import torch

from .errors import TrainingDivergedError

#: Adam moment defaults used across all trainers.
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def batch_indices(n: int, batch_size: int, rng: np.random.Generator, drop_last: bool = False):
    """Yield index arrays covering a seeded permutation of range(n).

    Adversarial loops pass drop_last=True so every batch carries full-size
    statistics; supervised loops keep the ragged tail.
    """
    order = rng.permutation(n)
    end = n - batch_size + 1 if drop_last else n
    for i in range(0, max(end, 0), batch_size):
        yield order[i : i + batch_size]


class SourceCycler:
    """Endless seeded stream of source batches for adversarial pairing."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self._order = rng.permutation(n)
        self._pos = 0

    def next_batch(self) -> np.ndarray:
        if self._pos + self.batch_size > self.n:
            self._order = self.rng.permutation(self.n)
            self._pos = 0
        out = self._order[self._pos : self._pos + self.batch_size]
        self._pos += self.batch_size
        return out


def guard_finite(loss: torch.Tensor, *, epoch: int, batch: int, context: str) -> float:
    value = float(loss.detach())
    if not np.isfinite(value):
        raise TrainingDivergedError(
            f"{context}: non-finite loss {value} at epoch {epoch}, batch {batch}",
            epoch=epoch,
            batch=batch,
            loss=value,
        )
    return value


def adam(params, lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)
