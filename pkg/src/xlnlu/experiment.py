"""End-to-end zero-shot cycles and the ablation grid.

A "bundle" is the data a full experiment needs: source train/valid/test
corpora, a target-language test corpus, both embedding spaces, a bilingual
lexicon, and the seed-word list used for mapping refinement.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .alignment import (RefineConfig, RefineReport, SeedDictionary,
                        build_seed_dictionary, load_lexicon, refine,
                        map_space)
from .corpus import Corpus, LabelCatalog, delexicalize_corpus, load_corpus, \
    save_corpus
from .embeddings import EmbeddingSpace, load_embeddings, preprocess, \
    save_embeddings
from .errors import ConfigError, DataError
from .evaluation import AblationCell, AblationTable, EvalResult, \
    evaluate_model
from .model import Model, ModelConfig
from .synthetic import SyntheticBundle
from .training import TrainConfig, TrainReport, train, zero_shot_evaluate


@dataclass
class Bundle:
    src_train: Corpus
    src_valid: Corpus
    src_test: Corpus
    tgt_test: Corpus
    space_src: EmbeddingSpace
    space_tgt: EmbeddingSpace
    lexicon: list[tuple[str, str]]
    seed_words: list[str]

    @classmethod
    def from_synthetic(cls, sb: SyntheticBundle) -> "Bundle":
        return cls(
            src_train=sb.corpus_a["train"], src_valid=sb.corpus_a["valid"],
            src_test=sb.corpus_a["test"], tgt_test=sb.corpus_b["test"],
            space_src=sb.space_a, space_tgt=sb.space_b,
            lexicon=sb.lexicon, seed_words=sb.seed_words)


BUNDLE_FILES = {
    "src_train": "src_train.conll",
    "src_valid": "src_valid.conll",
    "src_test": "src_test.conll",
    "tgt_test": "tgt_test.conll",
    "space_src": "embeddings.src.vec",
    "space_tgt": "embeddings.tgt.vec",
    "lexicon": "lexicon.tsv",
    "seed_words": "seed_words.txt",
    "gold_mapping": "gold_mapping.txt",
    "spec": "spec.json",
}


def write_bundle(sb: SyntheticBundle, out_dir: str) -> list[str]:
    """Write a synthetic bundle as the on-disk layout the CLI consumes."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(key):
        p = os.path.join(out_dir, BUNDLE_FILES[key])
        written.append(p)
        return p

    save_corpus(sb.corpus_a["train"], path("src_train"))
    save_corpus(sb.corpus_a["valid"], path("src_valid"))
    save_corpus(sb.corpus_a["test"], path("src_test"))
    save_corpus(sb.corpus_b["test"], path("tgt_test"))
    save_embeddings(sb.space_a, path("space_src"))
    save_embeddings(sb.space_b, path("space_tgt"))
    with open(path("lexicon"), "w", encoding="utf-8") as f:
        for a, b in sb.lexicon:
            f.write(f"{a}\t{b}\n")
    with open(path("seed_words"), "w", encoding="utf-8") as f:
        f.write("\n".join(sb.seed_words) + "\n")
    np.savetxt(path("gold_mapping"), sb.gold_mapping.w, fmt="%.17g")
    with open(path("spec"), "w", encoding="utf-8") as f:
        f.write(sb.spec.to_json() + "\n")
    return written


def read_bundle(bundle_dir: str) -> Bundle:
    def p(key):
        path = os.path.join(bundle_dir, BUNDLE_FILES[key])
        if not os.path.exists(path):
            raise DataError(f"bundle file missing: {path}")
        return path

    src_train, _ = load_corpus(p("src_train"))
    src_valid, _ = load_corpus(p("src_valid"))
    src_test, _ = load_corpus(p("src_test"))
    tgt_test, _ = load_corpus(p("tgt_test"))
    space_src = load_embeddings(p("space_src"), language=src_train.language)
    space_tgt = load_embeddings(p("space_tgt"), language=tgt_test.language)
    with open(p("seed_words"), "r", encoding="utf-8") as f:
        seed_words = [w for w in (line.strip() for line in f) if w]
    return Bundle(src_train=src_train, src_valid=src_valid,
                  src_test=src_test, tgt_test=tgt_test,
                  space_src=space_src, space_tgt=space_tgt,
                  lexicon=load_lexicon(p("lexicon")), seed_words=seed_words)


@dataclass
class ExperimentSettings:
    """Desk-scale model/refinement sizes; the defaults of the original
    protocol (hidden 250, latent 100) are impractical for test runs."""

    hidden_size: int = 16
    latent_size: int = 8
    noise_variance: float = 0.1
    refine_threshold: float = 0.15
    refine_max_iters: int = 10
    refine_augment: bool = False


@dataclass
class CycleResult:
    source: EvalResult
    target: EvalResult
    report: TrainReport
    model: Model
    catalog: LabelCatalog
    refine_report: RefineReport | None = None


def build_seed_pairs(seed_words: list[str],
                     lexicon: list[tuple[str, str]]) -> SeedDictionary:
    selection = build_seed_dictionary(seed_words, lexicon)
    if selection.dictionary is None:
        raise DataError("no seed word could be resolved in the lexicon")
    return selection.dictionary


def prepare_target_space(bundle: Bundle, refinement: bool,
                         settings: ExperimentSettings
                         ) -> tuple[EmbeddingSpace, EmbeddingSpace,
                                    RefineReport | None]:
    """Preprocess both spaces; with refinement on, map the target space into
    the source space through the seed-refined orthogonal mapping."""
    src = preprocess(bundle.space_src)
    tgt = preprocess(bundle.space_tgt)
    if not refinement:
        return src, tgt, None
    seeds = build_seed_pairs(bundle.seed_words, bundle.lexicon).flipped()
    cfg = RefineConfig(threshold=settings.refine_threshold,
                       max_iters=settings.refine_max_iters,
                       augment=settings.refine_augment)
    mapping, report = refine(tgt, src, seeds, cfg)
    return src, map_space(tgt, mapping), report


def run_cycle(bundle: Bundle, train_cfg: TrainConfig,
              settings: ExperimentSettings | None = None) -> CycleResult:
    """Train on the source language, evaluate in-language and zero-shot."""
    settings = settings or ExperimentSettings()
    src_space, tgt_space, refine_report = prepare_target_space(
        bundle, train_cfg.refinement, settings)

    src_train, src_valid, src_test = (
        bundle.src_train, bundle.src_valid, bundle.src_test)
    tgt_test = bundle.tgt_test
    if train_cfg.delexicalize:
        src_train = delexicalize_corpus(src_train)
        src_valid = delexicalize_corpus(src_valid)
        src_test = delexicalize_corpus(src_test)
        tgt_test = delexicalize_corpus(tgt_test)

    catalog = LabelCatalog()
    for u in src_train:
        catalog.observe(u)
    for u in src_valid:
        catalog.observe(u)

    model_cfg = ModelConfig(
        embedding_dim=src_space.dim,
        n_slots=len(catalog.slot_labels),
        n_intents=len(catalog.intent_labels),
        hidden_size=settings.hidden_size,
        latent_size=settings.latent_size,
        head=train_cfg.head,
        noise_variance=settings.noise_variance,
        noise_enabled=train_cfg.noise)
    model = Model(model_cfg, rng=np.random.default_rng(train_cfg.seed))
    best, report = train(model, src_train, src_valid, src_space,
                         train_cfg, catalog)
    source_result = evaluate_model(best, src_test, src_space, catalog)
    target_result = zero_shot_evaluate(best, tgt_space, tgt_test, catalog)
    return CycleResult(source=source_result, target=target_result,
                       report=report, model=best, catalog=catalog,
                       refine_report=refine_report)


def run_ablation(grid: list[tuple[str, TrainConfig]], bundle: Bundle,
                 seeds: list[int],
                 settings: ExperimentSettings | None = None) -> AblationTable:
    """One train + zero-shot-evaluate cycle per (config, seed) cell."""
    if not grid:
        raise ConfigError("ablation grid is empty")
    if not seeds:
        raise ConfigError("ablation needs at least one seed")
    table = AblationTable()
    for name, cfg in grid:
        for seed in seeds:
            result = run_cycle(bundle, replace(cfg, seed=seed), settings)
            table.cells.append(AblationCell(
                config_name=name, seed=seed, result=result.target))
    return table


def default_grid(base: TrainConfig | None = None
                 ) -> list[tuple[str, TrainConfig]]:
    """The five-row grid (vanilla .. noise+refinement+delex) plus the
    MLP-head comparison row."""
    base = base or TrainConfig()
    rows = [
        ("vanilla", replace(base, noise=False, refinement=False,
                            delexicalize=False)),
        ("noise", replace(base, noise=True, refinement=False,
                          delexicalize=False)),
        ("refinement", replace(base, noise=False, refinement=True,
                               delexicalize=False)),
        ("noise_refinement", replace(base, noise=True, refinement=True,
                                     delexicalize=False)),
        ("noise_refinement_delex", replace(base, noise=True, refinement=True,
                                           delexicalize=True)),
        ("noise_refinement_mlp", replace(base, noise=True, refinement=True,
                                         delexicalize=False, head="mlp")),
    ]
    return rows
