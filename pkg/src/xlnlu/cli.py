"""Command-line surface: gen / refine / train / eval / ablate /
export-latents.

Every command writes a run manifest (config snapshot + input digests)
before heavy computation, so outputs can be reproduced byte-exactly.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, fields, replace

import numpy as np

from . import __version__
from .alignment import RefineConfig, build_seed_dictionary, load_lexicon, \
    map_space, refine
from .corpus import LabelCatalog, delexicalize_corpus, load_corpus
from .embeddings import load_embeddings, preprocess, save_embeddings
from .errors import ConfigError, DataError, NumericError, XlnluError
from .evaluation import evaluate_model, export_latents
from .experiment import (Bundle, ExperimentSettings, default_grid,
                         prepare_target_space, read_bundle, run_ablation,
                         write_bundle)
from .manifest import RunManifest
from .model import Model, ModelConfig
from .synthetic import SyntheticSpec, generate_synthetic
from .training import TrainConfig, train, zero_shot_evaluate

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _from_dict(cls, data: dict):
    """Build a dataclass from a dict, rejecting unknown or duplicate keys."""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(
            f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    return cls(**data)


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f, object_pairs_hook=_reject_duplicates)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _reject_duplicates(pairs):
    d = {}
    for k, v in pairs:
        if k in d:
            raise ConfigError(f"duplicate config key: {k}")
        d[k] = v
    return d


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# --------------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    spec_data = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        spec_data["seed"] = args.seed
    spec = SyntheticSpec.from_json(json.dumps(spec_data))
    out = _outdir(args)
    manifest = RunManifest(command="gen", config=json.loads(spec.to_json()),
                           seed=spec.seed)
    if args.config:
        manifest.add_input(args.config)
    manifest.write(os.path.join(out, "manifest.json"))
    bundle = generate_synthetic(spec)
    written = write_bundle(bundle, out)
    manifest.outputs = sorted(written)
    manifest.write(os.path.join(out, "manifest.json"))
    print(f"wrote bundle with {len(written)} files to {out}")
    return 0


# ------------------------------------------------------------------ refine

def cmd_refine(args) -> int:
    out = _outdir(args)
    manifest = RunManifest(
        command="refine", seed=args.seed,
        config={"threshold": args.threshold, "max_iters": args.max_iters,
                "augment": args.augment})
    for p in (args.source_embeddings, args.target_embeddings, args.lexicon,
              args.seed_words):
        manifest.add_input(p)
    manifest.write(os.path.join(out, "manifest.json"))

    src = preprocess(load_embeddings(args.source_embeddings, language="src"))
    tgt = preprocess(load_embeddings(args.target_embeddings, language="tgt"))
    with open(args.seed_words, "r", encoding="utf-8") as f:
        words = [w for w in (line.strip() for line in f) if w]
    selection = build_seed_dictionary(words, load_lexicon(args.lexicon))
    if selection.missing:
        print("not in lexicon: " + ", ".join(selection.missing),
              file=sys.stderr)
    if selection.dictionary is None:
        raise DataError("no usable seed pair; cannot refine")
    cfg = RefineConfig(threshold=args.threshold, max_iters=args.max_iters,
                       augment=args.augment)
    mapping, report = refine(tgt, src, selection.dictionary.flipped(), cfg)
    for i, (dist, size) in enumerate(zip(report.seed_distances,
                                         report.dictionary_sizes), 1):
        print(f"iteration {i}: seed cosine distance {dist:.6f} "
              f"(dictionary size {size})")
    mapped = map_space(tgt, mapping)
    out_vec = os.path.join(out, "refined.tgt.vec")
    save_embeddings(mapped, out_vec)
    np.savetxt(os.path.join(out, "mapping.txt"), mapping.w, fmt="%.17g")
    with open(os.path.join(out, "refine_report.json"), "w",
              encoding="utf-8") as f:
        json.dump({"seed_distances": report.seed_distances,
                   "dictionary_sizes": report.dictionary_sizes,
                   "missing_seed_words": selection.missing}, f, indent=2)
        f.write("\n")
    manifest.outputs = [out_vec]
    manifest.write(os.path.join(out, "manifest.json"))
    return 0


# ------------------------------------------------------------------- train

def _load_train_config(args) -> tuple[TrainConfig, ExperimentSettings]:
    data = _load_json(args.config) if args.config else {}
    settings = _from_dict(ExperimentSettings, data.pop("settings", {}))
    cfg = _from_dict(TrainConfig, data)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg, settings


def cmd_train(args) -> int:
    out = _outdir(args)
    cfg, settings = _load_train_config(args)
    manifest = RunManifest(command="train", seed=cfg.seed,
                           config={"train": asdict(cfg),
                                   "settings": asdict(settings)})
    if args.config:
        manifest.add_input(args.config)
    manifest.write(os.path.join(out, "manifest.json"))

    bundle = read_bundle(args.bundle)
    src_space, _, _ = prepare_target_space(bundle, False, settings)
    src_train, src_valid = bundle.src_train, bundle.src_valid
    if cfg.delexicalize:
        src_train = delexicalize_corpus(src_train)
        src_valid = delexicalize_corpus(src_valid)
    catalog = LabelCatalog()
    for u in src_train:
        catalog.observe(u)
    for u in src_valid:
        catalog.observe(u)
    model_cfg = ModelConfig(
        embedding_dim=src_space.dim, n_slots=len(catalog.slot_labels),
        n_intents=len(catalog.intent_labels),
        hidden_size=settings.hidden_size, latent_size=settings.latent_size,
        head=cfg.head, noise_variance=settings.noise_variance,
        noise_enabled=cfg.noise)
    model = Model(model_cfg, rng=np.random.default_rng(cfg.seed))
    best, report = train(model, src_train, src_valid, src_space, cfg, catalog)

    ckpt = os.path.join(out, "checkpoint.npz")
    best.save(ckpt)
    catalog.save(os.path.join(out, "catalog.json"))
    with open(os.path.join(out, "train_config.json"), "w",
              encoding="utf-8") as f:
        json.dump({"train": asdict(cfg), "settings": asdict(settings)}, f,
                  indent=2)
        f.write("\n")
    with open(os.path.join(out, "report.jsonl"), "w", encoding="utf-8") as f:
        f.write(report.to_jsonl())
    manifest.outputs = [ckpt]
    manifest.write(os.path.join(out, "manifest.json"))
    best_rec = report.epochs[report.best_epoch - 1]
    print(f"best epoch {report.best_epoch}: "
          f"valid slot F1 {best_rec.valid_slot_f1:.4f}, "
          f"intent acc {best_rec.valid_intent_accuracy:.4f} "
          f"({report.stopping_reason})")
    return 0


# -------------------------------------------------------------------- eval

def _load_run(run_dir: str) -> tuple[Model, LabelCatalog, TrainConfig,
                                     ExperimentSettings]:
    ckpt = os.path.join(run_dir, "checkpoint.npz")
    if not os.path.exists(ckpt):
        raise DataError(f"checkpoint missing: {ckpt}")
    model = Model.load(ckpt)
    catalog = LabelCatalog.load(os.path.join(run_dir, "catalog.json"))
    with open(os.path.join(run_dir, "train_config.json"), "r",
              encoding="utf-8") as f:
        data = json.load(f)
    cfg = _from_dict(TrainConfig, data["train"])
    settings = _from_dict(ExperimentSettings, data["settings"])
    return model, catalog, cfg, settings


def cmd_eval(args) -> int:
    out = _outdir(args)
    model, catalog, cfg, settings = _load_run(args.run)
    manifest = RunManifest(command="eval", seed=cfg.seed,
                           config={"run": args.run, "bundle": args.bundle})
    manifest.add_input(os.path.join(args.run, "checkpoint.npz"))
    manifest.write(os.path.join(out, "manifest.json"))

    bundle = read_bundle(args.bundle)
    src_space, tgt_space, _ = prepare_target_space(
        bundle, cfg.refinement, settings)
    src_test, tgt_test = bundle.src_test, bundle.tgt_test
    if cfg.delexicalize:
        src_test = delexicalize_corpus(src_test)
        tgt_test = delexicalize_corpus(tgt_test)
    source = evaluate_model(model, src_test, src_space, catalog)
    target = zero_shot_evaluate(model, tgt_space, tgt_test, catalog)
    results = {"source": source.as_dict(), "target": target.as_dict()}
    with open(os.path.join(out, "eval.json"), "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"source: intent acc {source.intent_accuracy:.4f}, "
          f"slot F1 {source.slot_f1:.4f}")
    print(f"zero-shot: intent acc {target.intent_accuracy:.4f}, "
          f"slot F1 {target.slot_f1:.4f}, oov rate {target.oov_rate:.4f}")
    return 0


# ------------------------------------------------------------------ ablate

def cmd_ablate(args) -> int:
    out = _outdir(args)
    data = _load_json(args.config) if args.config else {}
    seeds = data.pop("seeds", [0, 1, 2, 3, 4])
    settings = _from_dict(ExperimentSettings, data.pop("settings", {}))
    base = _from_dict(TrainConfig, data.pop("train", {}))
    config_names = data.pop("configs", None)
    if data:
        raise ConfigError(
            f"unknown ablation config keys: {', '.join(sorted(data))}")
    grid = default_grid(base)
    if config_names is not None:
        if not config_names:
            raise ConfigError("ablation config list is empty")
        known = dict(grid)
        missing = [n for n in config_names if n not in known]
        if missing:
            raise ConfigError(f"unknown ablation configs: {missing}")
        grid = [(n, known[n]) for n in config_names]

    manifest = RunManifest(
        command="ablate", seed=None,
        config={"seeds": seeds, "settings": asdict(settings),
                "train": asdict(base), "configs": [n for n, _ in grid]})
    if args.config:
        manifest.add_input(args.config)
    manifest.write(os.path.join(out, "manifest.json"))

    bundle = read_bundle(args.bundle)
    table = run_ablation(grid, bundle, seeds, settings)
    tsv = os.path.join(out, "ablation.tsv")
    with open(tsv, "w", encoding="utf-8") as f:
        f.write(table.to_tsv())
    with open(os.path.join(out, "ablation_summary.json"), "w",
              encoding="utf-8") as f:
        f.write(table.to_summary_json() + "\n")
    manifest.outputs = [tsv]
    manifest.write(os.path.join(out, "manifest.json"))
    print(table.to_tsv(), end="")
    return 0


# ---------------------------------------------------------- export-latents

def cmd_export_latents(args) -> int:
    out = _outdir(args)
    model, catalog, cfg, settings = _load_run(args.run)
    manifest = RunManifest(command="export-latents", seed=cfg.seed,
                           config={"run": args.run, "corpus": args.corpus,
                                   "embeddings": args.embeddings})
    manifest.add_input(args.corpus)
    manifest.add_input(args.embeddings)
    manifest.write(os.path.join(out, "manifest.json"))
    corpus, _ = load_corpus(args.corpus)
    if cfg.delexicalize:
        corpus = delexicalize_corpus(corpus)
    space = preprocess(load_embeddings(args.embeddings,
                                       language=corpus.language))
    dump = os.path.join(out, "latents.jsonl")
    export_latents(model, corpus, space, dump)
    manifest.outputs = [dump]
    manifest.write(os.path.join(out, "manifest.json"))
    print(f"wrote {dump}")
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xlnlu",
        description="Zero-shot cross-lingual slot filling / intent detection")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("gen", help="generate a synthetic bilingual bundle")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("refine", help="refine a cross-lingual mapping")
    common(p)
    p.add_argument("--source-embeddings", required=True)
    p.add_argument("--target-embeddings", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--seed-words", required=True)
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--augment", action="store_true")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("train", help="train on the source language")
    common(p)
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="zero-shot evaluation via embedding swap")
    common(p)
    p.add_argument("--run", required=True, help="train output directory")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation grid")
    common(p)
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-latents", help="dump latent posteriors")
    common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_export_latents)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, XlnluError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
