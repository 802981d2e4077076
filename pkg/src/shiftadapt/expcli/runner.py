"""Pipeline orchestration: prepare data, train, adapt, score, persist.

Each run owns an output directory named by pipeline and experiment id and
guarded by a lock file. Heavy training stages are cached under the output
root keyed by a content hash of everything that determines them, so
pipelines sharing a trained source model (classify -> adapt, anomaly ->
adapt_anomaly) reuse it; ``force`` recomputes and overwrites. A completed
run leaves a record.json from which reports can be re-emitted.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import adda as adda_mod
from .. import anomaly as anomaly_mod
from .. import trainsup
from ..dataio import (
    DatasetSplit,
    DomainShift,
    PatternSpec,
    SynthConfig,
    anomaly_benchmark_config,
    build_dataset,
    classification_benchmark_config,
    load_manifest,
    synth_generate,
    to_model_range,
)
from ..errors import ConfigError, DataError
from ..metrics import MetricsReport, emd_report
from ..nets import Checkpoint, NetworkSpec
from .config import canonical_json, experiment_id
from .fixtures import fixture_grid

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ENV = "SHIFTADAPT_OUTPUT"


@dataclass
class RunRecord:
    experiment_id: str
    pipeline: str
    config: dict
    created_at: str = ""
    finished_at: str = ""
    artifacts: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)  # name -> MetricsReport dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "pipeline": self.pipeline,
            "config": self.config,
            "created_at": self.created_at,
            "finished_at": self.finished_at,
            "artifacts": self.artifacts,
            "metrics": self.metrics,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**{k: d[k] for k in (
            "experiment_id", "pipeline", "config", "created_at", "finished_at",
            "artifacts", "metrics", "extra",
        )})

    def report(self, name: str) -> MetricsReport:
        return MetricsReport.from_dict(self.metrics[name])


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def output_root(cfg: dict) -> Path:
    root = cfg.get("output_dir") or os.environ.get(DEFAULT_OUTPUT_ENV) or "runs"
    return Path(root)


# ---------------------------------------------------------------------------
# Dataset assembly


def _synth_config(block: dict) -> SynthConfig:
    preset = block["preset"]
    if preset == "classification":
        base = classification_benchmark_config(
            seed=block["seed"], subjects_per_class=block["subjects_per_class"]
        )
    elif preset == "anomaly":
        base = anomaly_benchmark_config(
            seed=block["seed"], subjects_per_class=block["subjects_per_class"]
        )
    else:
        def pattern(p):
            if p is None:
                return None
            return PatternSpec(
                center=tuple(p["center"]), width=p["width"], amp=p["amp"],
                depth_width=p["depth_width"], falloff=p["falloff"],
            )

        shift = DomainShift(**(block["shift"] or {}))
        base = SynthConfig(
            seed=block["seed"],
            subjects_per_class=block["subjects_per_class"],
            head_amp=block["head_amp"],
            texture_amp=block["texture_amp"],
            noise_amp=block["noise_amp"],
            normal_pattern=pattern(block["normal_pattern"]),
            demented_pattern=pattern(block["demented_pattern"]),
            shift=shift,
        )
    return SynthConfig(
        **{
            **base.__dict__,
            "image_size": block["image_size"],
            "slice_count": block["slice_count"],
        }
    )


def _dataset_id(block: dict, dataset_cfg: dict) -> str:
    key = canonical_json({
        "block": block,
        "slice_count": dataset_cfg["slice_count"],
        "split_seed": dataset_cfg["split_seed"],
    })
    return hashlib.sha256(key.encode()).hexdigest()[:16]


class DatasetProvider:
    """Lazily builds source/target splits; synth pairs generate once."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self._synth_pair = None
        self._cache: dict = {}

    def _from_synth(self, block: dict, domain: str) -> DatasetSplit:
        synth_cfg = _synth_config(block["synth"])
        if self._synth_pair is None:
            self._synth_pair = (
                synth_cfg,
                synth_generate(synth_cfg, split_seed=self.cfg["dataset"]["split_seed"]),
            )
        else:
            prior_cfg, _ = self._synth_pair
            if prior_cfg != synth_cfg:
                raise ConfigError(
                    "source and target synth blocks must describe the same generator"
                )
        source, target = self._synth_pair[1]
        return source if domain == "source" else target

    def split(self, domain: str) -> DatasetSplit:
        if domain in self._cache:
            return self._cache[domain]
        block = self.cfg["dataset"][domain]
        if block is None:
            raise ConfigError(f"config has no dataset.{domain}")
        if block["synth"] is not None:
            ds = self._from_synth(block, domain)
        else:
            records = load_manifest(block["manifest"])
            ds = build_dataset(
                records,
                block["volume_dir"],
                slice_count=self.cfg["dataset"]["slice_count"],
                split_seed=self.cfg["dataset"]["split_seed"],
            )
        self._cache[domain] = ds
        return ds

    def dataset_id(self, domain: str) -> str:
        return _dataset_id(self.cfg["dataset"][domain], self.cfg["dataset"])

    def input_shape(self, domain: str) -> tuple:
        return self.split(domain).all_stacks()[0].shape


# ---------------------------------------------------------------------------
# Stage cache


class StageCache:
    def __init__(self, root: Path, force: bool):
        self.dir = root / "cache"
        self.force = force

    def _stage_dir(self, key: str) -> Path:
        return self.dir / key

    def lookup(self, key: str) -> Path | None:
        d = self._stage_dir(key)
        if not self.force and (d / "DONE").is_file():
            return d
        return None

    def commit(self, key: str) -> Path:
        d = self._stage_dir(key)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def mark_done(self, key: str) -> None:
        (self._stage_dir(key) / "DONE").write_text(_now(), encoding="utf-8")


def _stage_key(name: str, **parts) -> str:
    payload = canonical_json({"stage": name, **parts})
    return f"{name}-{hashlib.sha256(payload.encode()).hexdigest()[:24]}"


def _model_spec(cfg: dict, input_shape: tuple) -> NetworkSpec:
    m = cfg["model"]
    return NetworkSpec(
        family=m["family"],
        input_shape=tuple(input_shape),
        latent_dim=m["latent_dim"],
        cardinality=m["cardinality"],
        param_seed=m["param_seed"],
        base_width=m["base_width"],
        variational=m["variational"],
        ae_stages=m["ae_stages"],
    ).validate()


def _train_cfg(cfg: dict) -> trainsup.TrainConfig:
    t = cfg["train"]
    return trainsup.TrainConfig(
        learning_rate=t["learning_rate"], epochs=t["epochs"],
        batch_size=t["batch_size"], seed=cfg["seed"],
    ).validate()


def _adda_cfg(cfg: dict, variant: str | None = None) -> adda_mod.AddaConfig:
    a = cfg["adda"]
    return adda_mod.AddaConfig(
        critic_lr=a["critic_lr"], target_lr=a["target_lr"], epochs=a["epochs"],
        batch_size=a["batch_size"], seed=cfg["seed"],
        variant=variant or a["variant"],
        init_target_from_source=a["init_target_from_source"],
        critic_widths=tuple(a["critic_widths"]),
    ).validate()


def _recon_cfg(cfg: dict) -> anomaly_mod.ReconTrainConfig:
    r = cfg["recon"]
    return anomaly_mod.ReconTrainConfig(
        model=r["model"], learning_rate=r["learning_rate"], epochs=r["epochs"],
        batch_size=r["batch_size"], kl_weight=r["kl_weight"],
        adv_weight=r["adv_weight"], critic_lr=r["critic_lr"], seed=cfg["seed"],
    ).validate()


def train_source_classifier(cfg, provider: DatasetProvider, cache: StageCache):
    """Cached stage: source classifier checkpoint + curves."""
    spec = _model_spec(cfg, provider.input_shape("source"))
    tcfg = _train_cfg(cfg)
    key = _stage_key(
        "classifier",
        dataset=provider.dataset_id("source"),
        spec=spec.to_dict(),
        train=tcfg.__dict__,
    )
    hit = cache.lookup(key)
    if hit is not None:
        logger.info("classifier stage: cache hit %s", key)
        ckpt = Checkpoint.load(hit / "checkpoint.ckpt")
        curves = json.loads((hit / "curves.json").read_text(encoding="utf-8"))
        return ckpt, curves, key
    split = provider.split("source")
    result = trainsup.train_classifier(
        split, spec, tcfg, dataset_id=provider.dataset_id("source")
    )
    curves = {
        "loss_curve": result.loss_curve,
        "val_accuracy_curve": result.val_accuracy_curve,
    }
    d = cache.commit(key)
    result.checkpoint.save(d / "checkpoint.ckpt")
    (d / "curves.json").write_text(
        json.dumps(curves, sort_keys=True), encoding="utf-8"
    )
    cache.mark_done(key)
    return result.checkpoint, curves, key


def train_source_reconstructor(cfg, provider: DatasetProvider, cache: StageCache):
    """Cached stage: autoencoder trained on source train normals."""
    spec = _model_spec(cfg, provider.input_shape("source"))
    if spec.family != "autoencoder":
        raise ConfigError(
            f"pipeline {cfg['pipeline']!r} requires model.family=autoencoder"
        )
    rcfg = _recon_cfg(cfg)
    key = _stage_key(
        "reconstructor",
        dataset=provider.dataset_id("source"),
        spec=spec.to_dict(),
        recon=rcfg.__dict__,
    )
    hit = cache.lookup(key)
    if hit is not None:
        logger.info("reconstructor stage: cache hit %s", key)
        return Checkpoint.load(hit / "checkpoint.ckpt"), key
    split = provider.split("source")
    normals = [st for st in split.train if st.label == 0]
    ckpt = anomaly_mod.train_reconstructor(
        normals, spec, rcfg, dataset_id=provider.dataset_id("source")
    )
    d = cache.commit(key)
    ckpt.save(d / "checkpoint.ckpt")
    cache.mark_done(key)
    return ckpt, key


# ---------------------------------------------------------------------------
# Pipelines


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")


def _attach_report(record: RunRecord, run_dir: Path, name: str, report: MetricsReport) -> None:
    report.experiment_id = record.experiment_id
    record.metrics[name] = report.to_dict()
    path = run_dir / f"metrics_{name}.json"
    _write_json(path, report.to_dict())
    record.artifacts[f"metrics_{name}"] = path.name


def _pipeline_classify(cfg, record, run_dir, provider, cache):
    ckpt, curves, key = train_source_classifier(cfg, provider, cache)
    ckpt_path = run_dir / "classifier.ckpt"
    ckpt.save(ckpt_path)
    record.artifacts["checkpoint"] = ckpt_path.name
    record.extra["curves"] = curves
    record.extra["classifier_stage"] = key
    split = provider.split("source")
    report = trainsup.evaluate_classifier(
        ckpt, split.test, dataset=provider.dataset_id("source")
    )
    _attach_report(record, run_dir, "source_test", report)


def _pipeline_tune(cfg, record, run_dir, provider, cache):
    tune = cfg["tune"]
    if tune["fixture"] is not None:
        matrix, lrs, epochs = fixture_grid(tune["fixture"])
        report = trainsup.grid_report_from_matrix(matrix, lrs, epochs)
    else:
        split = provider.split("source")
        shape = provider.input_shape("source")
        specs = []
        for family in tune["families"]:
            m = dict(cfg["model"], family=family)
            specs.append(
                NetworkSpec(
                    family=family, input_shape=tuple(shape),
                    latent_dim=m["latent_dim"], cardinality=m["cardinality"],
                    param_seed=m["param_seed"], base_width=m["base_width"],
                ).validate()
            )
        report = trainsup.grid_search(
            split, specs, tune["lrs"], tune["epochs"],
            base_cfg=_train_cfg(cfg), exact=tune["exact"],
            dataset_id=provider.dataset_id("source"),
        )
    label, lr, epochs_best, acc = report.best()
    record.extra["grid"] = {
        "spec_labels": report.spec_labels,
        "lrs": report.lrs,
        "epoch_budgets": report.epoch_budgets,
        "cells": [
            {"family": k[0], "lr": k[1], "epochs": k[2], "accuracy": v}
            for k, v in sorted(report.cells.items())
        ],
        "best": {"family": label, "lr": lr, "epochs": epochs_best, "accuracy": acc},
    }
    from .reports import write_grid_csv

    grid_path = run_dir / "grid.csv"
    write_grid_csv(record.extra["grid"], grid_path)
    record.artifacts["grid_csv"] = grid_path.name
    _write_json(run_dir / "grid_summary.json", record.extra["grid"]["best"])
    record.artifacts["grid_summary"] = "grid_summary.json"


def _pipeline_adapt(cfg, record, run_dir, provider, cache):
    ckpt, curves, _ = train_source_classifier(cfg, provider, cache)
    record.extra["curves"] = curves
    split_src = provider.split("source")
    split_tgt = provider.split("target")
    _attach_report(
        record, run_dir, "source_test",
        trainsup.evaluate_classifier(ckpt, split_src.test, dataset=provider.dataset_id("source")),
    )
    acfg = _adda_cfg(cfg, variant="classifier")
    bundle = adda_mod.make_classifier_bundle(ckpt, acfg)
    _attach_report(
        record, run_dir, "target_no_da",
        adda_mod.evaluate_no_da(bundle, split_tgt.test, dataset=provider.dataset_id("target")),
    )
    adapted = adda_mod.adapt(
        split_src.train, split_tgt.train, bundle, acfg, run_dir=run_dir / "adaptation"
    )
    record.artifacts["adaptation_history"] = "adaptation/history.csv"
    enc_path = run_dir / "target_encoder.ckpt"
    adapted.target_encoder.save(enc_path)
    record.artifacts["target_encoder"] = enc_path.name
    record.extra["adaptation_history"] = adapted.history
    _attach_report(
        record, run_dir, "target_adda",
        adda_mod.evaluate_adapted(adapted, split_tgt.test, dataset=provider.dataset_id("target")),
    )


def _reconstruction_sets(ckpt: Checkpoint, stacks, seed: int):
    """Real / reconstructed / generated pixel sets in the model range."""
    window = anomaly_mod.checkpoint_window(ckpt)
    ae = ckpt.materialize()
    x = np.stack([st.slices for st in stacks]).astype(np.float32)
    x = to_model_range(x, window)
    with torch.no_grad():
        recon = []
        for i in range(0, len(x), 32):
            recon.append(ae(torch.from_numpy(x[i : i + 32])).numpy())
        recon = np.concatenate(recon)
        gen = torch.Generator(device="cpu").manual_seed(seed)
        z = torch.randn((len(x), ae.latent_dim), generator=gen)
        generated = []
        for i in range(0, len(x), 32):
            generated.append(ae.decoder(z[i : i + 32]).numpy())
        generated = np.concatenate(generated)
    return x, recon, generated, window


def _pipeline_reconstruct(cfg, record, run_dir, provider, cache):
    ckpt, key = train_source_reconstructor(cfg, provider, cache)
    ckpt_path = run_dir / "autoencoder.ckpt"
    ckpt.save(ckpt_path)
    record.artifacts["checkpoint"] = ckpt_path.name
    record.extra["curves"] = {
        "loss_curve": ckpt.training_meta["loss_curve"],
        "mse_curve": ckpt.training_meta["mse_curve"],
    }
    split = provider.split("source")
    real, recon, generated, window = _reconstruction_sets(
        ckpt, split.test, cfg["seed"] + 77
    )
    emds = emd_report(list(real), list(recon), generated_set=list(generated), window=window)
    report = MetricsReport(dataset=provider.dataset_id("source"), model=cfg["recon"]["model"])
    report.set_metric("emd_reconstructed", emds["reconstructed"])
    report.set_metric("emd_generated", emds["generated"])
    _attach_report(record, run_dir, "reconstruction", report)


def _score_and_report(ckpt, stacks, run_dir, name, dataset, model_name, record):
    scores = anomaly_mod.score_reconstruction(ckpt, stacks)
    anomaly_mod.write_scores_csv(scores, run_dir / f"scores_{name}.csv")
    record.artifacts[f"scores_{name}"] = f"scores_{name}.csv"
    report = MetricsReport(dataset=dataset, model=model_name)
    report.set_metric("auc", anomaly_mod.anomaly_auc(scores))
    _attach_report(record, run_dir, name, report)
    return report


def _pipeline_anomaly(cfg, record, run_dir, provider, cache):
    ckpt, _ = train_source_reconstructor(cfg, provider, cache)
    ckpt_path = run_dir / "autoencoder.ckpt"
    ckpt.save(ckpt_path)
    record.artifacts["checkpoint"] = ckpt_path.name
    record.extra["curves"] = {
        "loss_curve": ckpt.training_meta["loss_curve"],
        "mse_curve": ckpt.training_meta["mse_curve"],
    }
    split = provider.split("source")
    _score_and_report(
        ckpt, split.test, run_dir, "anomaly_source",
        provider.dataset_id("source"), cfg["recon"]["model"], record,
    )
    summary = {
        "model": cfg["recon"]["model"],
        "dataset": provider.dataset_id("source"),
        "variant": "in_domain",
        "auc": record.metrics["anomaly_source"]["metrics"].get("auc"),
    }
    _write_json(run_dir / "auc_summary.json", summary)
    record.artifacts["auc_summary"] = "auc_summary.json"


def _pipeline_adapt_anomaly(cfg, record, run_dir, provider, cache):
    ckpt, _ = train_source_reconstructor(cfg, provider, cache)
    split_src = provider.split("source")
    split_tgt = provider.split("target")
    window = anomaly_mod.checkpoint_window(ckpt)
    source_normals = [st for st in split_src.train if st.label == 0]

    summary = {"model": cfg["recon"]["model"], "dataset": provider.dataset_id("target")}
    results = {}
    for variant, name in (
        ("anomaly_supervised", "target_adda_supervised"),
        ("anomaly_unsupervised", "target_adda_unsupervised"),
    ):
        acfg = _adda_cfg(cfg, variant=variant)
        bundle = adda_mod.make_anomaly_bundle(ckpt, acfg, window=window)
        if "target_no_da" not in record.metrics:
            rep = adda_mod.evaluate_no_da(
                bundle, split_tgt.test, dataset=provider.dataset_id("target")
            )
            _attach_report(record, run_dir, "target_no_da", rep)
            summary["without_da"] = rep.metrics.get("auc")
        adapted = adda_mod.adapt(
            source_normals, split_tgt.train, bundle, acfg,
            run_dir=run_dir / f"adaptation_{variant}",
        )
        record.artifacts[f"history_{variant}"] = f"adaptation_{variant}/history.csv"
        rep = adda_mod.evaluate_adapted(
            adapted, split_tgt.test, dataset=provider.dataset_id("target"),
            model_name=f"adda_{variant}",
        )
        _attach_report(record, run_dir, name, rep)
        results[variant] = rep.metrics.get("auc")
    summary["adda_supervised"] = results["anomaly_supervised"]
    summary["adda_unsupervised"] = results["anomaly_unsupervised"]
    _write_json(run_dir / "auc_summary.json", summary)
    record.artifacts["auc_summary"] = "auc_summary.json"


_PIPELINES = {
    "classify": _pipeline_classify,
    "tune": _pipeline_tune,
    "adapt": _pipeline_adapt,
    "reconstruct": _pipeline_reconstruct,
    "anomaly": _pipeline_anomaly,
    "adapt_anomaly": _pipeline_adapt_anomaly,
}


def run(cfg: dict, *, force: bool = False) -> RunRecord:
    """Execute the configured pipeline; idempotent per experiment id.

    A completed record is reused unless force is set; stage caches under
    the output root are shared across runs.
    """
    exp_id = experiment_id(cfg)
    root = output_root(cfg)
    run_dir = root / f"{cfg['pipeline']}-{exp_id[:12]}"
    record_path = run_dir / "record.json"
    if record_path.is_file() and not force:
        logger.info("run %s already complete; reusing record", exp_id[:12])
        return RunRecord.from_dict(json.loads(record_path.read_text(encoding="utf-8")))

    run_dir.mkdir(parents=True, exist_ok=True)
    lock = run_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(
            f"run directory {run_dir} is locked (concurrent run, or delete stale {lock})"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        record = RunRecord(
            experiment_id=exp_id,
            pipeline=cfg["pipeline"],
            config=cfg,
            created_at=_now(),
        )
        provider = DatasetProvider(cfg)
        cache = StageCache(root, force)
        _PIPELINES[cfg["pipeline"]](cfg, record, run_dir, provider, cache)

        from .reports import emit_report

        emitted = emit_report(record, "all", run_dir)
        record.artifacts.update(emitted)
        record.finished_at = _now()
        _write_json(record_path, record.to_dict())
        snapshot = run_dir / "config.json"
        _write_json(snapshot, cfg)
        return record
    finally:
        lock.unlink(missing_ok=True)


def load_record(run_dir) -> RunRecord:
    path = Path(run_dir) / "record.json"
    if not path.is_file():
        raise DataError(f"no run record at {path}")
    return RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
