"""Sklearn-style estimator facade over the joint slot/intent model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import Corpus, LabelCatalog, encode
from .embeddings import EmbeddingSpace
from .errors import DataError
from .evaluation import EvalResult, evaluate_model
from .model import Model, ModelConfig
from .training import TrainConfig, train


class SlotIntentTagger(BaseEstimator):
    """fit() on a labeled source-language corpus, predict() label sequences
    and intents for new utterances; swap `space` at predict time for
    zero-shot transfer."""

    def __init__(self, hidden_size: int = 16, latent_size: int = 8,
                 head: str = "lvm", noise: bool = True,
                 noise_variance: float = 0.1, learning_rate: float = 1e-3,
                 batch_size: int = 32, max_epochs: int = 50,
                 patience: int = 5, seed: int = 0):
        self.hidden_size = hidden_size
        self.latent_size = latent_size
        self.head = head
        self.noise = noise
        self.noise_variance = noise_variance
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def fit(self, corpus_train: Corpus, space: EmbeddingSpace,
            corpus_valid: Corpus | None = None) -> "SlotIntentTagger":
        corpus_valid = corpus_valid or corpus_train
        catalog = LabelCatalog()
        for u in corpus_train:
            catalog.observe(u)
        for u in corpus_valid:
            catalog.observe(u)
        cfg = ModelConfig(
            embedding_dim=space.dim, n_slots=len(catalog.slot_labels),
            n_intents=len(catalog.intent_labels),
            hidden_size=self.hidden_size, latent_size=self.latent_size,
            head=self.head, noise_variance=self.noise_variance,
            noise_enabled=self.noise)
        model = Model(cfg, rng=np.random.default_rng(self.seed))
        train_cfg = TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            max_epochs=self.max_epochs, patience=self.patience,
            seed=self.seed, noise=self.noise, head=self.head)
        self.model_, self.report_ = train(
            model, corpus_train, corpus_valid, space, train_cfg, catalog)
        self.catalog_ = catalog
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise DataError("SlotIntentTagger is not fitted")

    def predict(self, corpus: Corpus, space: EmbeddingSpace
                ) -> list[tuple[list[str], str]]:
        self._check_fitted()
        out = []
        for u in corpus:
            emb, _ = encode(u, space)
            slot_idx, intent_idx, _ = self.model_.predict(emb)
            out.append(([self.catalog_.slot_labels[i] for i in slot_idx],
                        self.catalog_.intent_labels[intent_idx]))
        return out

    def score(self, corpus: Corpus, space: EmbeddingSpace) -> EvalResult:
        self._check_fitted()
        return evaluate_model(self.model_, corpus, space, self.catalog_)
