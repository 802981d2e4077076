"""Synthetic two-domain benchmark generator.

Produces paired source/target datasets with a controlled domain gap, small
enough to train on CPU. Each subject volume is composed of a fixed bright
ellipsoid ("head"), a per-subject smooth random texture, an optional
class-conditional Gaussian blob pattern, and voxel noise. Target-domain
volumes pass through a fixed intensity/contrast/smoothing shift: pattern
contrast rescaling, Gaussian smoothing, and a gamma curve on the intensity
range.

Generation is a pure function of the config: identical configs produce
byte-identical datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import DataError
from .manifest import SubjectRecord, write_manifest
from .slicing import slice_sagittal
from .split import DatasetSplit, split_stacks
from .volume import VolumeSample, normalize_volume, write_volume

from dataclasses import replace as _replace

SOURCE = "source"
TARGET = "target"

#: CDR values cycled through demented synthetic subjects.
_DEMENTED_CDRS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class PatternSpec:
    """Class-conditional Gaussian blob: in-plane center in [-1, 1]^2 coords."""

    center: tuple = (0.35, 0.35)
    width: float = 0.30
    amp: float = 300.0
    depth_width: float = 0.6
    falloff: float = 3.0


@dataclass(frozen=True)
class DomainShift:
    """Fixed target-domain corruption applied after composition."""

    blur_sigma: float = 1.2
    gamma: float = 0.55
    pattern_scale: float = 0.55
    gain: float = 1.0
    offset: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    image_size: int = 64
    slice_count: int = 8
    subjects_per_class: int = 100
    seed: int = 0
    head_amp: float = 800.0
    head_falloff: float = 1.5
    texture_amp: float = 140.0
    texture_sigma: float = 2.0
    noise_amp: float = 40.0
    pattern_jitter: float = 0.08
    normal_pattern: PatternSpec | None = None
    demented_pattern: PatternSpec | None = None
    shift: DomainShift = field(default_factory=DomainShift)

    def validate(self) -> None:
        if self.subjects_per_class <= 0:
            raise DataError("subjects_per_class must be positive")
        if self.image_size < 8 or self.slice_count < 1:
            raise DataError("image_size must be >= 8 and slice_count >= 1")


def classification_benchmark_config(seed: int = 0, subjects_per_class: int = 100) -> SynthConfig:
    """Two asymmetric class blobs; target patterns dimmed, blurred, gamma'd.

    Calibrated so a thin source classifier reaches ~1.0 source accuracy
    while its unadapted target accuracy drops well below, leaving headroom
    the adversarial adaptation reliably recovers.
    """
    return SynthConfig(
        seed=seed,
        subjects_per_class=subjects_per_class,
        normal_pattern=PatternSpec(center=(-0.35, -0.35), width=0.22, amp=420.0),
        demented_pattern=PatternSpec(center=(0.35, 0.35), width=0.34, amp=420.0),
        shift=DomainShift(blur_sigma=1.2, gamma=0.55, pattern_scale=0.55),
    )


def anomaly_benchmark_config(seed: int = 0, subjects_per_class: int = 100) -> SynthConfig:
    """Pattern-free normals; demented subjects carry one blob whose contrast
    the target shift amplifies.

    Calibrated so a normal-only autoencoder cleanly flags source anomalies,
    while adaptation that admits anomalous target samples degrades the
    separation and normal-only adaptation preserves it.
    """
    return SynthConfig(
        seed=seed,
        subjects_per_class=subjects_per_class,
        normal_pattern=None,
        demented_pattern=PatternSpec(center=(0.35, 0.35), width=0.30, amp=300.0),
        shift=DomainShift(blur_sigma=1.2, gamma=0.55, pattern_scale=1.4),
    )


def _compose_volume(cfg: SynthConfig, rng: np.random.Generator, label: int, domain: str) -> np.ndarray:
    s, hw = cfg.slice_count, cfg.image_size
    extent = 2 * s
    zz = np.linspace(-1.0, 1.0, extent)[:, None, None]
    yy = np.linspace(-1.0, 1.0, hw)[None, :, None]
    xx = np.linspace(-1.0, 1.0, hw)[None, None, :]

    head = cfg.head_amp * np.exp(-cfg.head_falloff * (zz**2 + yy**2 + xx**2))
    texture = (
        gaussian_filter(rng.standard_normal((extent, hw, hw)), cfg.texture_sigma)
        * cfg.texture_amp
    )

    pattern = np.zeros_like(head)
    spec = cfg.normal_pattern if label == 0 else cfg.demented_pattern
    # A jitter pair is always drawn so the RNG stream does not depend on
    # which class patterns are configured.
    jitter = rng.uniform(-cfg.pattern_jitter, cfg.pattern_jitter, size=2)
    if spec is not None:
        cy = spec.center[0] + jitter[0]
        cx = spec.center[1] + jitter[1]
        d2 = (
            (zz / spec.depth_width) ** 2
            + ((yy - cy) / spec.width) ** 2
            + ((xx - cx) / spec.width) ** 2
        )
        amp = spec.amp * (cfg.shift.pattern_scale if domain == TARGET else 1.0)
        pattern = amp * np.exp(-spec.falloff * d2)

    noise = rng.standard_normal((extent, hw, hw)) * cfg.noise_amp
    v = head + texture + pattern + noise

    if domain == TARGET:
        sh = cfg.shift
        if sh.blur_sigma > 0:
            v = gaussian_filter(v, sh.blur_sigma)
        if sh.gamma != 1.0:
            lo, hi = v.min(), v.max()
            span = hi - lo
            if span > 0:
                v = lo + span * ((v - lo) / span) ** sh.gamma
        v = v * sh.gain + sh.offset
    return v.astype(np.float32)


def generate_volumes(cfg: SynthConfig):
    """Yield (SubjectRecord, raw VolumeSample) for both domains.

    Subjects are emitted in a fixed order (source then target, normals then
    demented) from a single seeded stream.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    for domain in (SOURCE, TARGET):
        for label in (0, 1):
            tag = "n" if label == 0 else "d"
            for i in range(cfg.subjects_per_class):
                subject_id = f"{domain[:3]}-{tag}{i:03d}"
                cdr = 0.0 if label == 0 else _DEMENTED_CDRS[i % len(_DEMENTED_CDRS)]
                rec = SubjectRecord(subject_id=subject_id, domain=domain, cdr=cdr)
                voxels = _compose_volume(cfg, rng, label, domain)
                yield rec, VolumeSample(subject_id=subject_id, voxels=voxels)


def synth_generate(cfg: SynthConfig, split_seed: int | None = None) -> tuple[DatasetSplit, DatasetSplit]:
    """Generate the benchmark in memory: (source split, target split).

    Volumes run through the standard preprocessing (volume z-score, sagittal
    slicing with per-stack standardization) and are split subject-wise;
    split_seed defaults to cfg.seed + 1.
    """
    stacks = {SOURCE: [], TARGET: []}
    for rec, sample in generate_volumes(cfg):
        st = slice_sagittal(normalize_volume(sample), cfg.slice_count)
        stacks[rec.domain].append(_replace(st, label=rec.label))
    if split_seed is None:
        split_seed = cfg.seed + 1
    return (
        split_stacks(stacks[SOURCE], split_seed),
        split_stacks(stacks[TARGET], split_seed),
    )


def materialize_synth(cfg: SynthConfig, out_dir) -> dict:
    """Write the benchmark to disk in the documented manifest/.vol layout.

    Creates ``<out_dir>/<domain>/manifest.csv`` plus one ``.vol`` per
    subject; returns the per-domain paths. Building a dataset from these
    files reproduces synth_generate exactly.
    """
    out_dir = Path(out_dir)
    records = {SOURCE: [], TARGET: []}
    for rec, sample in generate_volumes(cfg):
        domain_dir = out_dir / rec.domain
        write_volume(domain_dir / f"{rec.subject_id}.vol", sample)
        records[rec.domain].append(rec)
    paths = {}
    for domain, recs in records.items():
        manifest_path = out_dir / domain / "manifest.csv"
        write_manifest(manifest_path, recs)
        paths[domain] = {
            "manifest": str(manifest_path),
            "volume_dir": str(out_dir / domain),
        }
    return paths
