"""Command-line experiment runner.

Verbs map onto pipelines (the verb wins over the config's pipeline field):

    prepare        validate a dataset and report class counts, no training
    synth          materialize the synthetic benchmark to manifest + .vol files
    train          classify pipeline (supervised source training + eval)
    tune           grid search / fixture replay
    adapt          classifier domain adaptation
    reconstruct    autoencoder reconstruction + EMD report
    anomaly        in-domain anomaly detection AUC
    adapt-anomaly  domain adaptation for anomaly detection (3 AUCs)
    report         re-emit tables/curves from a completed run directory

Global flags: --config, --seed (overrides config seed), --force, --output
(overrides output root; default also honors $SHIFTADAPT_OUTPUT).

Exit codes: 0 success, 2 config error, 3 data error, 4 training
divergence, 5 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError, DataError, TrainingDivergedError
from .config import parse_config, resolve_config
from .runner import DatasetProvider, load_record, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_INTERNAL = 5

_VERB_PIPELINE = {
    "train": "classify",
    "tune": "tune",
    "adapt": "adapt",
    "reconstruct": "reconstruct",
    "anomaly": "anomaly",
    "adapt-anomaly": "adapt_anomaly",
}


def _add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="experiment config (YAML)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--force", action="store_true", help="recompute cached stages")
    p.add_argument("--output", default=None, help="output root directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftadapt",
        description="Config-driven experiments: classification, domain adaptation, anomaly detection.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb in ("prepare", "synth", *(sorted(_VERB_PIPELINE))):
        p = sub.add_parser(verb)
        _add_common(p)
        if verb == "synth":
            p.add_argument("--dest", required=True, help="directory for manifests and volumes")

    p = sub.add_parser("report")
    p.add_argument("run_dir", help="completed run directory")
    p.add_argument("--format", default="all", choices=("csv", "text", "plot", "all"))
    return parser


def _load_config(args) -> dict:
    cfg = parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output is not None:
        overrides["output_dir"] = args.output
    if args.verb in _VERB_PIPELINE:
        overrides["pipeline"] = _VERB_PIPELINE[args.verb]
    if overrides:
        raw = {k: v for k, v in cfg.items()}
        raw.update(overrides)
        # Re-resolve so derived seeds follow an overridden master seed.
        if "seed" in overrides:
            raw["dataset"] = dict(raw["dataset"], split_seed=None)
            raw["model"] = dict(raw["model"], param_seed=None)
            for domain in ("source", "target"):
                block = raw["dataset"][domain]
                if block and block.get("synth"):
                    raw["dataset"] = dict(raw["dataset"])
                    raw["dataset"][domain] = dict(block, synth=dict(block["synth"], seed=None))
        cfg = resolve_config(raw)
    return cfg


def _cmd_prepare(args) -> int:
    cfg = _load_config(args)
    provider = DatasetProvider(cfg)
    for domain in ("source", "target"):
        if cfg["dataset"][domain] is None:
            continue
        split = provider.split(domain)
        counts = split.class_counts()
        print(f"{domain}: quarantined={split.quarantined}")
        for part, c in counts.items():
            print(f"  {part}: normal={c['normal']} demented={c['demented']}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    from ..dataio import materialize_synth
    from .runner import _synth_config

    cfg = _load_config(args)
    block = cfg["dataset"]["source"]
    if block is None or block["synth"] is None:
        raise ConfigError("synth verb requires dataset.source.synth in the config")
    paths = materialize_synth(_synth_config(block["synth"]), args.dest)
    print(json.dumps(paths, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    record = run(cfg, force=args.force)
    summary = {
        "experiment_id": record.experiment_id,
        "pipeline": record.pipeline,
        "metrics": {
            name: block["metrics"] for name, block in sorted(record.metrics.items())
        },
    }
    if "grid" in record.extra:
        summary["best"] = record.extra["grid"]["best"]
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_report(args) -> int:
    from .reports import emit_report

    record = load_record(args.run_dir)
    emitted = emit_report(record, args.format, args.run_dir)
    for name, path in sorted(emitted.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.verb == "prepare":
            return _cmd_prepare(args)
        if args.verb == "synth":
            return _cmd_synth(args)
        if args.verb == "report":
            return _cmd_report(args)
        return _cmd_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - safety net
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
