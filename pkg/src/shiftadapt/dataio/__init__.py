"""Data ingestion, preprocessing, splitting, and the synthetic benchmark."""

from .manifest import (
    LABEL_DEMENTED,
    LABEL_NORMAL,
    SubjectRecord,
    admitted,
    load_manifest,
    quarantine_count,
    write_manifest,
)
from .slicing import SliceStack, slice_indices, slice_sagittal
from .split import (
    DatasetSplit,
    assign_subjects,
    build_dataset,
    from_model_range,
    intensity_window,
    split_stacks,
    stacks_to_arrays,
    to_model_range,
)
from .synth import (
    DomainShift,
    PatternSpec,
    SynthConfig,
    anomaly_benchmark_config,
    classification_benchmark_config,
    materialize_synth,
    synth_generate,
)
from .volume import VolumeSample, normalize_volume, read_volume, write_volume

__all__ = [
    "LABEL_DEMENTED",
    "LABEL_NORMAL",
    "SubjectRecord",
    "SliceStack",
    "DatasetSplit",
    "VolumeSample",
    "SynthConfig",
    "PatternSpec",
    "DomainShift",
    "admitted",
    "assign_subjects",
    "anomaly_benchmark_config",
    "build_dataset",
    "classification_benchmark_config",
    "from_model_range",
    "intensity_window",
    "load_manifest",
    "materialize_synth",
    "normalize_volume",
    "quarantine_count",
    "read_volume",
    "slice_indices",
    "slice_sagittal",
    "split_stacks",
    "stacks_to_arrays",
    "synth_generate",
    "to_model_range",
    "write_manifest",
    "write_volume",
]
