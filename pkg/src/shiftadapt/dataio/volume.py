"""Volumetric samples and the on-disk ``.vol`` container.

File layout (little-endian):

    bytes 0..15   magic ``SHIFTADAPTVOL\\0\\0\\0``
    bytes 16..27  u32 extents: sagittal, coronal, axial
    bytes 28..31  u32 dtype code (0 = little-endian float32)
    bytes 32..    row-major voxel payload

Axis convention is fixed as (sagittal, coronal, axial); files recording a
different order cannot be represented and must be converted upstream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import DataError

VOLUME_MAGIC = b"SHIFTADAPTVOL\x00\x00\x00"
DTYPE_F32_LE = 0
_HEADER = struct.Struct("<III I")


@dataclass(frozen=True)
class VolumeSample:
    """One subject's scan: a 3-D voxel grid plus identification.

    ``voxels`` axes are (sagittal, coronal, axial). ``intensity_units``
    documents the scale of the raw values ("raw" for scanner units,
    "zscore" after normalization).
    """

    subject_id: str
    voxels: np.ndarray
    intensity_units: str = "raw"

    def __post_init__(self):
        v = self.voxels
        if v.ndim != 3:
            raise DataError(
                f"volume {self.subject_id!r}: expected 3-D voxels, got shape {v.shape}"
            )
        if not np.isfinite(v).all():
            raise DataError(f"volume {self.subject_id!r}: non-finite voxels")

    @property
    def extents(self) -> tuple[int, int, int]:
        return tuple(self.voxels.shape)


def write_volume(path, sample: VolumeSample) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    v = np.ascontiguousarray(sample.voxels, dtype="<f4")
    with path.open("wb") as fh:
        fh.write(VOLUME_MAGIC)
        fh.write(_HEADER.pack(*v.shape, DTYPE_F32_LE))
        fh.write(v.tobytes())


def read_volume(path, subject_id: str | None = None) -> VolumeSample:
    """Read a ``.vol`` file; subject_id defaults to the file stem."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"volume file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(VOLUME_MAGIC) + _HEADER.size:
        raise DataError(f"{path}: truncated volume file")
    if raw[: len(VOLUME_MAGIC)] != VOLUME_MAGIC:
        raise DataError(f"{path}: bad magic; not a volume container")
    sag, cor, ax, dtype_code = _HEADER.unpack_from(raw, len(VOLUME_MAGIC))
    if dtype_code != DTYPE_F32_LE:
        raise DataError(f"{path}: unsupported dtype code {dtype_code}")
    payload = raw[len(VOLUME_MAGIC) + _HEADER.size :]
    expected = sag * cor * ax * 4
    if len(payload) != expected:
        raise DataError(
            f"{path}: payload size {len(payload)} != expected {expected} bytes"
        )
    voxels = np.frombuffer(payload, dtype="<f4").reshape(sag, cor, ax).copy()
    return VolumeSample(
        subject_id=subject_id or path.stem, voxels=voxels, intensity_units="raw"
    )


def normalize_volume(sample: VolumeSample) -> VolumeSample:
    """Z-score the whole volume: (v - mean) / std, population std.

    Statistics are accumulated in float64; a zero-variance volume raises
    DataError rather than dividing by zero.
    """
    v = sample.voxels.astype(np.float64)
    mean = float(v.mean())
    std = float(v.std())
    if std == 0.0:
        raise DataError(
            f"volume {sample.subject_id!r} has zero variance; cannot z-score"
        )
    out = ((v - mean) / std).astype(np.float32)
    return replace(sample, voxels=out, intensity_units="zscore")
