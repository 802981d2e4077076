"""Config-driven experiment runner: parsing, orchestration, reports, CLI."""

from .config import canonical_json, experiment_id, parse_config, resolve_config
from .reports import emit_report
from .runner import DatasetProvider, RunRecord, load_record, run

__all__ = [
    "DatasetProvider",
    "RunRecord",
    "canonical_json",
    "emit_report",
    "experiment_id",
    "load_record",
    "parse_config",
    "resolve_config",
    "run",
]
