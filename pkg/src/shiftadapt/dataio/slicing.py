"""Sagittal slicing and per-stack standardization.

Slice selection: for stack size s out of sagittal extent E, indices are
equally spaced over the central 50% band,

    idx_k = round(E * (0.25 + 0.5 * k / (s - 1))),   k = 0..s-1

with round(x) = floor(x + 0.5). s = 1 takes the mid-sagittal slice
round(E / 2). When the central band is too narrow to give s distinct
indices (s > E/2 + 1, including the full-coverage case s = E), selection
falls back to equal spacing over the full extent, idx_k =
round((E - 1) * k / (s - 1)), which is the identity for s = E. Indices are
always pairwise distinct and strictly increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .volume import VolumeSample


@dataclass(frozen=True)
class SliceStack:
    """Preprocessed training unit: s standardized sagittal slices.

    ``slices`` is (S, H, W) float32 with per-stack mean 0 and std 1;
    ``normalization_stats`` records the (mean, std) that were removed.
    """

    subject_id: str
    slices: np.ndarray
    label: int | None
    normalization_stats: tuple[float, float]

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.slices.shape)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def slice_indices(extent: int, s: int) -> list[int]:
    """The s sagittal indices selected from a volume of the given extent."""
    if s < 1:
        raise DataError(f"slice count must be >= 1, got {s}")
    if s > extent:
        raise DataError(f"cannot take {s} slices from sagittal extent {extent}")
    if s == 1:
        return [min(_round_half_up(extent * 0.5), extent - 1)]
    central = [
        _round_half_up(extent * (0.25 + 0.5 * k / (s - 1))) for k in range(s)
    ]
    if len(set(central)) == s and central[-1] < extent:
        return central
    # Central band too narrow (or, for tiny extents, rounding past the end);
    # spread over the full extent instead. Identity selection when s == extent.
    return [_round_half_up((extent - 1) * k / (s - 1)) for k in range(s)]


def slice_sagittal(sample: VolumeSample, s: int) -> SliceStack:
    """Slice a volume along the sagittal axis and standardize the stack.

    The stack (not the source volume) is z-scored so the per-stack
    mean/std invariant holds regardless of which slices were selected;
    the removed statistics are recorded on the stack.
    """
    extent = sample.voxels.shape[0]
    idx = slice_indices(extent, s)
    stack = sample.voxels[idx].astype(np.float64)
    mean = float(stack.mean())
    std = float(stack.std())
    if std == 0.0:
        raise DataError(
            f"volume {sample.subject_id!r}: selected slices have zero variance"
        )
    stack = ((stack - mean) / std).astype(np.float32)
    return SliceStack(
        subject_id=sample.subject_id,
        slices=stack,
        label=None,
        normalization_stats=(mean, std),
    )
