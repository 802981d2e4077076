"""Dataset assembly: volumes + manifest -> labeled, subject-level splits."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import DataError
from .manifest import SubjectRecord, admitted
from .slicing import SliceStack, slice_sagittal
from .volume import normalize_volume, read_volume

DEFAULT_FRACTIONS = (0.7, 0.1, 0.2)  # train / val / test


@dataclass
class DatasetSplit:
    """Subject-level train/val/test partitions of SliceStacks."""

    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)
    split_seed: int = 0
    quarantined: int = 0

    def partitions(self):
        return {"train": self.train, "val": self.val, "test": self.test}

    def subjects(self, partition: str) -> set:
        return {st.subject_id for st in self.partitions()[partition]}

    def class_counts(self) -> dict:
        counts = {}
        for name, part in self.partitions().items():
            pos = sum(1 for st in part if st.label == 1)
            counts[name] = {"normal": len(part) - pos, "demented": pos}
        return counts

    def all_stacks(self) -> list:
        return list(self.train) + list(self.val) + list(self.test)


def assign_subjects(subject_ids, seed: int, fractions=DEFAULT_FRACTIONS) -> dict:
    """Deterministic subject-level assignment to train/val/test.

    Subjects are sorted, shuffled by the seed, and cut at the cumulative
    fractions. Pure function of (subject_ids as a set, seed, fractions).
    """
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise DataError(f"split fractions must be non-negative and sum to 1: {fractions}")
    ids = sorted(set(subject_ids))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(shuffled)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train : n_train + n_val],
        "test": shuffled[n_train + n_val :],
    }


def split_stacks(stacks, seed: int, fractions=DEFAULT_FRACTIONS, quarantined: int = 0) -> DatasetSplit:
    """Partition labeled stacks subject-wise with the seeded assignment."""
    assignment = assign_subjects([st.subject_id for st in stacks], seed, fractions)
    where = {}
    for name, ids in assignment.items():
        for sid in ids:
            where[sid] = name
    out = DatasetSplit(split_seed=seed, quarantined=quarantined)
    for st in stacks:
        out.partitions()[where[st.subject_id]].append(st)
    return out


def build_dataset(
    records,
    volume_dir,
    *,
    slice_count: int = 10,
    split_seed: int = 0,
    fractions=DEFAULT_FRACTIONS,
) -> DatasetSplit:
    """Assemble a labeled DatasetSplit from manifest records and .vol files.

    Pipeline per subject: read volume, z-score it, take the sagittal slice
    stack (re-standardized per stack), attach the CDR-derived label. The
    subject-level split is a pure function of the admitted subject set and
    split_seed.
    """
    volume_dir = Path(volume_dir)
    ids = [r.subject_id for r in records]
    if len(ids) != len(set(ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DataError(f"duplicate subject_id in manifest: {dupes}")

    usable = admitted(records)
    n_quarantined = len(records) - len(usable)
    stacks = []
    for rec in usable:
        path = volume_dir / f"{rec.subject_id}.vol"
        if not path.is_file():
            raise DataError(f"missing volume file for subject {rec.subject_id!r}: {path}")
        sample = normalize_volume(read_volume(path, rec.subject_id))
        st = slice_sagittal(sample, slice_count)
        stacks.append(replace(st, label=rec.label))

    labels = {st.label for st in stacks}
    if labels != {0, 1}:
        raise DataError(
            f"dataset must contain both classes after filtering; found labels {sorted(labels)}"
        )
    return split_stacks(stacks, split_seed, fractions, quarantined=n_quarantined)


def stacks_to_arrays(stacks) -> tuple[np.ndarray, np.ndarray]:
    """(N, S, H, W) float32 inputs and (N,) int64 labels."""
    if not stacks:
        raise DataError("empty partition")
    x = np.stack([st.slices for st in stacks]).astype(np.float32)
    y = np.array([st.label for st in stacks], dtype=np.int64)
    return x, y


def intensity_window(stacks, lo_pct: float = 1.0, hi_pct: float = 99.0) -> tuple[float, float]:
    """Dataset-level [lo, hi] percentile window of pooled stack intensities.

    Computed on the training partition and reused for val/test so the
    autoencoder range mapping is consistent across partitions.
    """
    if not stacks:
        raise DataError("cannot compute an intensity window from no stacks")
    pool = np.concatenate([st.slices.ravel() for st in stacks])
    lo, hi = np.percentile(pool, [lo_pct, hi_pct])
    if hi <= lo:
        raise DataError("degenerate intensity window (hi <= lo)")
    return float(lo), float(hi)


def to_model_range(x: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    """Clip to the window and rescale affinely to [-1, 1] (autoencoder input)."""
    lo, hi = window
    u = np.clip((np.asarray(x, dtype=np.float32) - lo) / (hi - lo), 0.0, 1.0)
    return (u * 2.0 - 1.0).astype(np.float32)


def from_model_range(x: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    """Inverse of to_model_range (up to the clipping)."""
    lo, hi = window
    return ((np.asarray(x, dtype=np.float64) + 1.0) * 0.5 * (hi - lo) + lo).astype(
        np.float32
    )
