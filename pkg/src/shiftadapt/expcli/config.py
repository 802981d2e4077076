"""Experiment configuration: strict schema, default resolution, identity.

Configs are single-document YAML with an explicit schema_version. Parsing
fills every default into the resolved snapshot (downstream code never
applies an implicit default) and rejects unknown keys at every nesting
level, so typos fail loudly. The experiment id is the SHA-256 of the
canonical JSON serialization of the resolved config minus the output
location, so re-serialization or key reordering cannot change identity.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import yaml

from ..errors import ConfigError

SCHEMA_VERSION = 1

PIPELINES = ("classify", "tune", "adapt", "reconstruct", "anomaly", "adapt_anomaly")

_MISSING = object()


def _field(type_, default=_MISSING, choices=None):
    return {"type": type_, "default": default, "choices": choices}


_SYNTH_SCHEMA = {
    "preset": _field(str, "classification", ("classification", "anomaly", "custom")),
    "seed": _field(int, None),
    "image_size": _field(int, 64),
    "slice_count": _field(int, 8),
    "subjects_per_class": _field(int, 100),
    # custom-generator knobs; preset values win unless preset == custom
    "head_amp": _field(float, 800.0),
    "texture_amp": _field(float, 140.0),
    "noise_amp": _field(float, 40.0),
    "normal_pattern": _field(dict, None),
    "demented_pattern": _field(dict, None),
    "shift": _field(dict, None),
}

_PATTERN_SCHEMA = {
    "center": _field(list, [0.35, 0.35]),
    "width": _field(float, 0.30),
    "amp": _field(float, 300.0),
    "depth_width": _field(float, 0.6),
    "falloff": _field(float, 3.0),
}

_SHIFT_SCHEMA = {
    "blur_sigma": _field(float, 1.2),
    "gamma": _field(float, 0.55),
    "pattern_scale": _field(float, 0.55),
    "gain": _field(float, 1.0),
    "offset": _field(float, 0.0),
}

_DOMAIN_SCHEMA = {
    "manifest": _field(str, None),
    "volume_dir": _field(str, None),
    "synth": _field(dict, None),
}

_DATASET_SCHEMA = {
    "source": _field(dict, None),
    "target": _field(dict, None),
    "slice_count": _field(int, 10),
    "split_seed": _field(int, None),
}

_MODEL_SCHEMA = {
    "family": _field(str, "grouped_residual50"),
    "latent_dim": _field(int, None),
    "base_width": _field(int, 64),
    "cardinality": _field(int, 32),
    "param_seed": _field(int, None),
    "variational": _field(bool, False),
    "ae_stages": _field(int, None),
}

_TRAIN_SCHEMA = {
    "learning_rate": _field(float, 2e-4),
    "epochs": _field(int, 50),
    "batch_size": _field(int, 16),
}

_TUNE_SCHEMA = {
    "families": _field(list, ["residual18", "compound_b3", "grouped_residual50", "residual18_3d"]),
    "lrs": _field(list, [2e-4, 2e-5]),
    "epochs": _field(list, [10, 20, 50, 100]),
    "fixture": _field(str, None),  # "reference" or a CSV path; None trains
    "exact": _field(bool, False),
}

_ADDA_SCHEMA = {
    "critic_lr": _field(float, 1e-5),
    "target_lr": _field(float, 1e-6),
    "epochs": _field(int, 20),
    "batch_size": _field(int, 16),
    "variant": _field(str, "classifier",
                      ("classifier", "anomaly_supervised", "anomaly_unsupervised")),
    "init_target_from_source": _field(bool, True),
    "critic_widths": _field(list, [512, 256]),
}

_RECON_SCHEMA = {
    "model": _field(str, "adversarial_ae", ("adversarial_ae", "variational_ae")),
    "learning_rate": _field(float, 1.5e-3),
    "epochs": _field(int, 50),
    "batch_size": _field(int, 16),
    "kl_weight": _field(float, 1.0),
    "adv_weight": _field(float, 0.02),
    "critic_lr": _field(float, 2e-4),
}

_ROOT_SCHEMA = {
    "schema_version": _field(int),
    "pipeline": _field(str, choices=PIPELINES),
    "seed": _field(int, 0),
    "output_dir": _field(str, None),
    "dataset": _field(dict, {}),
    "model": _field(dict, {}),
    "train": _field(dict, {}),
    "tune": _field(dict, {}),
    "adda": _field(dict, {}),
    "recon": _field(dict, {}),
}

_NESTED = {
    "dataset": _DATASET_SCHEMA,
    "model": _MODEL_SCHEMA,
    "train": _TRAIN_SCHEMA,
    "tune": _TUNE_SCHEMA,
    "adda": _ADDA_SCHEMA,
    "recon": _RECON_SCHEMA,
}


def _coerce(value, type_, path):
    if value is None:
        return None
    if type_ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if type_ is float and isinstance(value, str):
        # YAML 1.1 reads bare scientific notation like 1e-3 as a string.
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{path}: expected float, got {value!r}") from None
    if type_ is int and isinstance(value, bool):
        raise ConfigError(f"{path}: expected int, got bool")
    if not isinstance(value, type_):
        raise ConfigError(f"{path}: expected {type_.__name__}, got {type(value).__name__}")
    return value


def _apply_schema(data: dict, schema: dict, path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    unknown = set(data) - set(schema)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    out = {}
    for key, meta in schema.items():
        if key in data:
            value = _coerce(data[key], meta["type"], f"{path}.{key}")
        elif meta["default"] is _MISSING:
            raise ConfigError(f"{path}.{key}: required key missing")
        else:
            value = meta["default"]
        if value is not None and meta["choices"] is not None and value not in meta["choices"]:
            raise ConfigError(
                f"{path}.{key}: {value!r} not one of {list(meta['choices'])}"
            )
        out[key] = value
    return out


def _resolve_domain(block, path):
    if block is None:
        return None
    block = _apply_schema(block, _DOMAIN_SCHEMA, path)
    if block["synth"] is not None:
        block["synth"] = _apply_schema(block["synth"], _SYNTH_SCHEMA, f"{path}.synth")
        for pkey in ("normal_pattern", "demented_pattern"):
            if block["synth"][pkey] is not None:
                block["synth"][pkey] = _apply_schema(
                    block["synth"][pkey], _PATTERN_SCHEMA, f"{path}.synth.{pkey}"
                )
        if block["synth"]["shift"] is not None:
            block["synth"]["shift"] = _apply_schema(
                block["synth"]["shift"], _SHIFT_SCHEMA, f"{path}.synth.shift"
            )
        if block["manifest"] or block["volume_dir"]:
            raise ConfigError(f"{path}: give either synth or manifest/volume_dir, not both")
    elif bool(block["manifest"]) != bool(block["volume_dir"]):
        raise ConfigError(f"{path}: manifest and volume_dir must be given together")
    elif not block["manifest"]:
        raise ConfigError(f"{path}: needs either a synth block or manifest + volume_dir")
    return block


def resolve_config(data: dict) -> dict:
    """Validate a raw mapping and fill every default."""
    cfg = _apply_schema(data, _ROOT_SCHEMA, "config")
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {cfg['schema_version']} (expected {SCHEMA_VERSION})"
        )
    for section, schema in _NESTED.items():
        if section == "dataset":
            continue
        cfg[section] = _apply_schema(cfg[section], schema, f"config.{section}")
    cfg["tune"]["lrs"] = [
        _coerce(v, float, "config.tune.lrs[]") for v in cfg["tune"]["lrs"]
    ]
    cfg["tune"]["epochs"] = [
        _coerce(v, int, "config.tune.epochs[]") for v in cfg["tune"]["epochs"]
    ]
    cfg["adda"]["critic_widths"] = [
        _coerce(v, int, "config.adda.critic_widths[]")
        for v in cfg["adda"]["critic_widths"]
    ]
    ds = _apply_schema(cfg["dataset"], _DATASET_SCHEMA, "config.dataset")
    ds["source"] = _resolve_domain(ds["source"], "config.dataset.source")
    ds["target"] = _resolve_domain(ds["target"], "config.dataset.target")
    cfg["dataset"] = ds

    needs_source = cfg["pipeline"] != "tune" or cfg["tune"]["fixture"] is None
    if needs_source and ds["source"] is None:
        raise ConfigError(f"pipeline {cfg['pipeline']!r} requires dataset.source")
    if cfg["pipeline"] in ("adapt", "adapt_anomaly") and ds["target"] is None:
        raise ConfigError(f"pipeline {cfg['pipeline']!r} requires dataset.target")

    # Seed derivation is recorded explicitly so nothing downstream defaults.
    if cfg["dataset"]["split_seed"] is None:
        cfg["dataset"]["split_seed"] = cfg["seed"] + 1
    if cfg["model"]["param_seed"] is None:
        cfg["model"]["param_seed"] = cfg["seed"]
    for domain in ("source", "target"):
        block = cfg["dataset"][domain]
        if block and block["synth"] and block["synth"]["seed"] is None:
            block["synth"]["seed"] = cfg["seed"]
    return cfg


def parse_config(path) -> dict:
    """Load, validate, and resolve a YAML experiment config."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open(encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return resolve_config(data)


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def experiment_id(cfg: dict) -> str:
    """Content hash of the resolved config, independent of output location."""
    key = {k: v for k, v in cfg.items() if k != "output_dir"}
    return hashlib.sha256(canonical_json(key).encode("utf-8")).hexdigest()
