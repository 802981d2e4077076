"""shiftadapt: cross-domain brain-scan analysis toolkit.

Slice-based CNN classification of volumetric scans, adversarial
discriminative domain adaptation between dataset domains, and autoencoder
reconstruction-error anomaly detection, with a deterministic synthetic
two-domain benchmark for end-to-end verification on CPU.
"""

__version__ = "0.1.0"

from . import adda, anomaly, dataio, metrics, nets, trainsup
from .errors import ConfigError, DataError, ShiftAdaptError, TrainingDivergedError

__all__ = [
    "adda",
    "anomaly",
    "dataio",
    "metrics",
    "nets",
    "trainsup",
    "ConfigError",
    "DataError",
    "ShiftAdaptError",
    "TrainingDivergedError",
    "__version__",
]
