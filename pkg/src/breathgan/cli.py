"""Command line interface.

Subcommands:
  ingest             recording documents -> windowed dataset JSON
  oracle-gen         synthetic corpus spec -> recording documents
  train-gan          dataset -> checkpoint files
  generate           checkpoint -> labeled synthetic windows
  train-mixture      dataset + subset plan -> one checkpoint dir per GAN
  evaluate-quality   real + synthetic windows -> quality JSON
  train-classifiers  dataset -> trained model files
  experiment         experiment config -> report dir (JSON, CSV, figures)

The experiment subcommand exits 0 on success, 2 when any checkpoint
selection had to fall back past the quality thresholds, 1 on error.
Setting AUGMENT_DETERMINISTIC=1 asserts fixed-order summation; this
implementation is single threaded, so summations are always fixed-order
and the flag is recorded in the report provenance.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import classifiers
from .data import (
    TRAIN,
    build_dataset,
    load_recording,
    load_windows,
    save_dataset,
    save_recording,
    save_windows,
    split_by_events,
)
from .experiments import ExperimentConfig, run_experiment
from .gan import GanConfig, generate, load_checkpoint, new_model, save_checkpoint, train
from .metrics import evaluate_quality
from .mixture import MixturePlan, train_mixture
from .oracle import OracleSpec, generate_corpus
from .report import emit_report


def _cmd_ingest(args) -> int:
    paths = sorted(Path(args.in_dir).glob("*.json"))
    if not paths:
        raise ValueError(f"no recording documents in {args.in_dir}")
    recordings = [load_recording(p) for p in paths]
    ds = build_dataset(recordings)
    if args.split:
        fractions = tuple(float(f) for f in args.split.split(","))
        if len(fractions) != 3:
            raise ValueError("--split needs train,test,validation fractions")
        ds = split_by_events(ds, fractions, args.seed)
    save_dataset(ds, args.out)
    print(f"ingested {len(recordings)} recordings -> {len(ds)} windows -> {args.out}")
    return 0


def _cmd_oracle_gen(args) -> int:
    spec = OracleSpec.from_json(args.spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rec in generate_corpus(spec):
        save_recording(rec, out_dir / f"{rec.id}.json")
    print(f"wrote {len(spec.recordings)} recordings to {out_dir}")
    return 0


def _load_gan_config(path: str) -> GanConfig:
    return GanConfig.from_dict(json.loads(Path(path).read_text()))


def _cmd_train_gan(args) -> int:
    ds = load_windows(args.data)
    windows = ds.subset(TRAIN)
    config = _load_gan_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = new_model(config)

    def checkpoint_cb(snapshot):
        save_checkpoint(snapshot, out_dir / f"checkpoint_epoch{snapshot.epoch:05d}.json")

    model, checkpoints = train(
        model, windows, callback=checkpoint_cb,
        allow_single_class=args.allow_single_class)
    save_checkpoint(model, out_dir / "model.json")
    (out_dir / "loss_history.json").write_text(json.dumps(model.loss_history))
    print(f"trained {config.epochs} epochs on {len(windows)} windows; "
          f"{len(checkpoints)} checkpoints in {out_dir}")
    return 0


def _cmd_generate(args) -> int:
    model = load_checkpoint(args.ckpt)
    windows = generate(model, args.label, args.count, args.seed)
    save_windows(windows, args.out, window_seconds=model.config.sequence_length)
    print(f"generated {len(windows)} {args.label!r} windows -> {args.out}")
    return 0


def _cmd_train_mixture(args) -> int:
    ds = load_windows(args.data)
    plan = MixturePlan.from_json(args.plan)
    config = _load_gan_config(args.config)
    windows_by_recording: dict = {}
    for w in ds.subset(TRAIN):
        windows_by_recording.setdefault(w.recording_id, []).append(w)
    results = train_mixture(plan, windows_by_recording, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for j, res in enumerate(results):
        save_checkpoint(res.model, out_dir / f"gan{j}.json")
    (out_dir / "draw_log.json").write_text(
        json.dumps({"draw_counts": [res.draw_counts for res in results],
                    "plan": plan.to_dict()}))
    print(f"trained {plan.k_sub} GANs -> {out_dir}")
    return 0


def _cmd_evaluate_quality(args) -> int:
    real = load_windows(args.real).windows
    synth = load_windows(args.synth).windows
    specs = classifiers.default_classifier_set(seed=args.seed)
    report = evaluate_quality(real, synth, specs, seed=args.seed, metric=args.metric)
    Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    print(f"T={report.t_metric:.4f} (TSTR {report.tstr:.4f} / TRTS {report.trts:.4f}) "
          f"MMD2={report.mmd2:.6f} sigma={report.kernel_sigma:.4f} -> {args.out}")
    return 0


def _cmd_train_classifiers(args) -> int:
    ds = load_windows(args.data)
    windows = ds.subset(TRAIN)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for spec in classifiers.default_classifier_set(seed=args.seed):
        clf = classifiers.fit(spec, windows)
        doc = classifiers.classifier_to_doc(clf)
        (out_dir / f"{spec.kind}.json").write_text(json.dumps(doc))
    print(f"trained 4 classifiers on {len(windows)} windows -> {out_dir}")
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    report = run_experiment(config)
    paths = emit_report(report, args.out)
    print(f"{config.experiment}: wrote {', '.join(str(p) for p in paths)}")
    if report.warning_flag:
        print("warning: checkpoint selection fell back past the quality thresholds")
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breathgan",
        description="GAN-based augmentation toolkit for labeled breathing windows")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="recording documents -> dataset JSON")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None,
                   help="train,test,validation fractions, e.g. 0.5,0.25,0.25")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("oracle-gen", help="synthetic corpus -> recording documents")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle_gen)

    p = sub.add_parser("train-gan", help="train one conditional recurrent GAN")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-single-class", action="store_true")
    p.set_defaults(func=_cmd_train_gan)

    p = sub.add_parser("generate", help="sample labeled windows from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--label", required=True, choices=["A", "N"])
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train-mixture", help="train one GAN per recording subset")
    p.add_argument("--data", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_mixture)

    p = sub.add_parser("evaluate-quality", help="quality metrics real vs synthetic")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric", default="accuracy", choices=["accuracy", "auroc"])
    p.set_defaults(func=_cmd_evaluate_quality)

    p = sub.add_parser("train-classifiers", help="fit the four front-end classifiers")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train_classifiers)

    p = sub.add_parser("experiment", help="run one experiment end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
