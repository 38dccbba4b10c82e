"""Command-line entry point: gen, train, eval, and compare subcommands.

Every command validates its JSON inputs against the published schemas
below before doing any work, writes diff-able JSON/CSV artifacts, and is
idempotent: identical inputs produce byte-identical outputs.  Run manifests
record the configuration, seeds, and SHA-256 hashes of all inputs and
outputs; wall-clock timestamps appear only there and can be suppressed
with --no-timestamp.

Exit codes: 0 success, 2 usage/config/data error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import jsonschema

from .data import (
    DEFAULT_SCHEMAS,
    EmbeddingDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    stratified_split,
)
from .errors import DivergenceError, MemebgError
from .metrics import confusion, render_report, report
from .model import ArchConfig, load_network, predict, save_network
from .numerics import Rng
from .stats import default_workers, run_5x2
from .train import TrainConfig, make_stl_trainer, mtl_trainer, train_mtl, train_stl

_PRIORS_SCHEMA = {
    "type": "object",
    "properties": {
        "TE": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "ICM": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "EXP": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
    },
    "required": ["TE", "ICM", "EXP"],
    "additionalProperties": False,
}

SYNTHETIC_SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Synthetic dataset spec",
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "noise_sigma": {"type": "number", "minimum": 0},
        "coupling": {"type": "number", "minimum": 0, "maximum": 1},
        "class_priors": _PRIORS_SCHEMA,
    },
    "required": ["n", "d", "k", "noise_sigma", "coupling", "class_priors"],
    "additionalProperties": False,
}

EXPERIMENT_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Experiment config",
    "type": "object",
    "properties": {
        "embeddings": {"type": "string"},
        "labels": {"type": "string"},
        "arch": {
            "type": "object",
            "properties": {
                "trunk_dims": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                }
            },
            "additionalProperties": False,
        },
        "train": {
            "type": "object",
            "properties": {
                "learning_rate": {"type": "number", "minimum": 0},
                "momentum": {"type": "number", "minimum": 0},
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
                "patience": {"type": "integer", "minimum": 1},
                "task_weights": {
                    "type": "object",
                    "additionalProperties": {"type": "number"},
                },
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "split_seed": {"type": "integer", "minimum": 0},
        "split_fraction": {
            "oneOf": [
                {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                {"type": "null"},
            ]
        },
        "output_dir": {"type": "string"},
    },
    "required": ["embeddings", "labels", "seed"],
    "additionalProperties": False,
}


def _load_json(path, schema, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MemebgError(f"{path}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise MemebgError(f"{path}: invalid {what} at {where}: {exc.message}") from exc
    return doc


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, doc: dict, with_timestamp: bool) -> None:
    if with_timestamp:
        doc = dict(doc, created_utc=datetime.now(timezone.utc).isoformat())
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dataset_from_config(cfg: dict) -> EmbeddingDataset:
    return load_dataset(cfg["embeddings"], cfg["labels"], DEFAULT_SCHEMAS)


def _train_config(cfg: dict, ds: EmbeddingDataset, patience: int | None = None) -> TrainConfig:
    arch = ArchConfig(
        input_dim=ds.dim,
        tasks=ds.schemas,
        trunk_dims=tuple(cfg.get("arch", {}).get("trunk_dims", [256])),
    )
    t = cfg.get("train", {})
    return TrainConfig(
        arch=arch,
        learning_rate=t.get("learning_rate", 0.01),
        momentum=t.get("momentum", 0.9),
        epochs=t.get("epochs", 100),
        batch_size=t.get("batch_size", 32),
        seed=cfg["seed"],
        task_weights=dict(t.get("task_weights", {})),
        patience=patience if patience is not None else t.get("patience"),
    )


def _resolve_out(args, cfg: dict | None = None) -> Path:
    out = args.out or (cfg or {}).get("output_dir")
    if not out:
        raise MemebgError("no output directory: pass --out or set output_dir in the config")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_gen(args) -> int:
    doc = _load_json(args.spec, SYNTHETIC_SPEC_SCHEMA, "synthetic spec")
    spec = SyntheticSpec(
        n=doc["n"],
        d=doc["d"],
        k=doc["k"],
        noise_sigma=doc["noise_sigma"],
        coupling=doc["coupling"],
        class_priors={k: tuple(v) for k, v in doc["class_priors"].items()},
    )
    ds = generate_synthetic(spec, Rng(args.seed))
    out = _resolve_out(args)
    emb, lab = out / "embeddings.csv", out / "labels.csv"
    save_dataset(ds, emb, lab)
    _write_manifest(
        out,
        {
            "command": "gen",
            "spec": doc,
            "seed": args.seed,
            "outputs": {"embeddings.csv": _sha256(emb), "labels.csv": _sha256(lab)},
        },
        with_timestamp=not args.no_timestamp,
    )
    print(f"wrote {emb} and {lab} ({spec.n} samples, d={spec.d})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_json(args.config, EXPERIMENT_CONFIG_SCHEMA, "experiment config")
    if args.mode == "stl" and not args.task:
        raise MemebgError("--task is required when --mode stl")
    if args.mode == "mtl" and args.task:
        raise MemebgError("--task only applies to --mode stl")
    ds = _dataset_from_config(cfg)
    config = _train_config(cfg, ds, patience=args.patience)
    fraction = cfg.get("split_fraction", 0.75)
    if fraction is None:
        train_ds, val_ds = ds, None
    else:
        split_rng = Rng(cfg.get("split_seed", cfg["seed"]))
        train_ds, val_ds = stratified_split(ds, fraction, split_rng)

    if args.mode == "mtl":
        net, history = train_mtl(train_ds, val_ds, config)
    else:
        net, history = train_stl(train_ds, val_ds, args.task, config)

    out = _resolve_out(args, cfg)
    ckpt, hist = out / "checkpoint.json", out / "history.csv"
    save_network(net, ckpt)
    hist.write_text(history.to_csv(), encoding="utf-8")
    _write_manifest(
        out,
        {
            "command": "train",
            "mode": args.mode,
            "task": args.task,
            "config": cfg,
            "split": {
                "fraction": fraction,
                "train": train_ds.n,
                "val": val_ds.n if val_ds is not None else 0,
            },
            "inputs": {
                "embeddings": _sha256(cfg["embeddings"]),
                "labels": _sha256(cfg["labels"]),
            },
            "outputs": {"checkpoint.json": _sha256(ckpt), "history.csv": _sha256(hist)},
        },
        with_timestamp=not args.no_timestamp,
    )
    last = history.records[-1]
    print(
        f"trained {args.mode} for {len(history.records)} epochs "
        f"(final joint loss {last.joint_loss:.4f}); checkpoint at {ckpt}"
    )
    return 0


def cmd_eval(args) -> int:
    net = load_network(args.checkpoint)
    data_dir = Path(args.data)
    emb_path, lab_path = data_dir / "embeddings.csv", data_dir / "labels.csv"
    ds = load_dataset(emb_path, lab_path, DEFAULT_SCHEMAS)
    if ds.dim != net.arch.input_dim:
        raise MemebgError(
            f"checkpoint expects input_dim {net.arch.input_dim}, dataset has {ds.dim}"
        )
    for t in net.arch.tasks:
        if t.name not in ds.labels or ds.schema(t.name).classes != t.classes:
            raise MemebgError(
                f"checkpoint task {t.name} with classes {list(t.classes)} does "
                f"not match the dataset's label schema"
            )
    out = _resolve_out(args)
    preds = predict(net, ds.x)
    outputs = {}
    for t in net.arch.tasks:
        cm = confusion(ds.labels[t.name], preds[t.name], t.classes)
        rep = report(cm, task=t.name)
        text, doc = render_report(rep)
        for name, payload in (
            (f"report_{t.name}.txt", text),
            (f"report_{t.name}.json", doc),
            (f"confusion_{t.name}.csv", cm.to_csv()),
        ):
            (out / name).write_text(payload, encoding="utf-8")
            outputs[name] = _sha256(out / name)
        print(f"{t.name}: accuracy {rep.accuracy:.3f}, macro-F1 {rep.macro.f1:.3f}")
    _write_manifest(
        out,
        {
            "command": "eval",
            "checkpoint": str(args.checkpoint),
            "inputs": {
                "checkpoint": _sha256(args.checkpoint),
                "embeddings": _sha256(emb_path),
                "labels": _sha256(lab_path),
            },
            "outputs": outputs,
        },
        with_timestamp=not args.no_timestamp,
    )
    print(f"reports written to {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_json(args.config, EXPERIMENT_CONFIG_SCHEMA, "experiment config")
    ds = _dataset_from_config(cfg)
    if args.task not in ds.labels:
        raise MemebgError(
            f"unknown task {args.task!r}; dataset tasks are {sorted(ds.labels)}"
        )
    config = _train_config(cfg, ds)
    if args.debug_identical:
        trainer_a = trainer_b = mtl_trainer
    else:
        trainer_a, trainer_b = mtl_trainer, make_stl_trainer(args.task)
    comparison = run_5x2(
        ds,
        trainer_a,
        trainer_b,
        args.task,
        config,
        base_seed=cfg["seed"],
        alpha=args.alpha,
        max_workers=default_workers(),
        metric=args.metric,
    )
    out = _resolve_out(args, cfg)
    (out / "comparison.json").write_text(comparison.to_json(), encoding="utf-8")
    _write_manifest(
        out,
        {
            "command": "compare",
            "task": args.task,
            "metric": args.metric,
            "alpha": args.alpha,
            "config": cfg,
            "inputs": {
                "embeddings": _sha256(cfg["embeddings"]),
                "labels": _sha256(cfg["labels"]),
            },
            "outputs": {"comparison.json": _sha256(out / "comparison.json")},
        },
        with_timestamp=not args.no_timestamp,
    )
    verdict = "significant" if comparison.significant else "not significant"
    print(
        f"{args.task}: MTL vs STL t={comparison.t:.4f}, p={comparison.p_value:.4f} "
        f"-> {verdict} at alpha={args.alpha}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memebg",
        description="Multi-task embedding grading experiments: generate data, "
        "train, evaluate, and compare MTL against STL.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset pair")
    p.add_argument("--spec", required=True, help="SyntheticSpec JSON file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an MTL or STL model")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--mode", choices=("mtl", "stl"), required=True)
    p.add_argument("--task", help="task name (required for stl)")
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    p.add_argument(
        "--patience",
        type=int,
        help="stop early after N epochs without validation improvement",
    )
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset pair")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="directory with embeddings.csv + labels.csv")
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="5x2 cross-validated MTL-vs-STL comparison")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--task", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument(
        "--metric",
        choices=("macro_f1", "weighted_f1"),
        default="macro_f1",
        help="F1 averaging fed to the test (weighted for sensitivity analysis)",
    )
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    p.add_argument(
        "--debug-identical",
        action="store_true",
        help="compare the MTL trainer against itself (sanity check: t=0, p=1)",
    )
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (MemebgError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
