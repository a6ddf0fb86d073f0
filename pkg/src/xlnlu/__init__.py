"""Zero-shot cross-lingual slot filling and intent detection.

Pipeline: refine aligned word embeddings from a small seed dictionary
(orthogonal Procrustes), train a noise-regularized BiLSTM latent-variable
model on the source language, then swap in mapped target-language
embeddings for zero-shot evaluation.
"""

__version__ = "0.1.0"

from .alignment import (MappingMatrix, ProcrustesAligner, RefineConfig,
                        SeedDictionary, build_seed_dictionary, map_space,
                        refine, solve_procrustes)
from .corpus import Corpus, LabelCatalog, Utterance, delexicalize, encode, \
    load_corpus, save_corpus
from .embeddings import EmbeddingSpace, load_embeddings, preprocess, \
    save_embeddings
from .autodiff import Tape
from .errors import ConfigError, DataError, NumericError, XlnluError
from .estimator import SlotIntentTagger
from .experiment import (Bundle, ExperimentSettings, run_ablation, run_cycle,
                         read_bundle, write_bundle)
from .evaluation import EvalResult, intent_accuracy, slot_f1
from .model import Model, ModelConfig
from .synthetic import SyntheticSpec, generate_synthetic
from .training import TrainConfig, train, zero_shot_evaluate, zero_shot_swap

__all__ = [
    "MappingMatrix", "ProcrustesAligner", "RefineConfig", "SeedDictionary",
    "build_seed_dictionary", "map_space", "refine", "solve_procrustes",
    "Corpus", "LabelCatalog", "Utterance", "delexicalize", "encode",
    "load_corpus", "save_corpus",
    "EmbeddingSpace", "load_embeddings", "preprocess", "save_embeddings",
    "Tape",
    "ConfigError", "DataError", "NumericError", "XlnluError",
    "SlotIntentTagger",
    "Bundle", "ExperimentSettings", "run_ablation", "run_cycle",
    "read_bundle", "write_bundle",
    "EvalResult", "intent_accuracy", "slot_f1",
    "Model", "ModelConfig",
    "SyntheticSpec", "generate_synthetic",
    "TrainConfig", "train", "zero_shot_evaluate", "zero_shot_swap",
    "__version__",
]
