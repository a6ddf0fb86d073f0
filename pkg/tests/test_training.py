import numpy as np
import pytest

from xlnlu.corpus import Corpus, LabelCatalog, Utterance
from xlnlu.embeddings import EmbeddingSpace
from xlnlu.errors import ConfigError, DataError
from xlnlu.model import Model, ModelConfig
from xlnlu.training import (AdamState, TrainConfig, clip_gradients, step,
                            train, zero_shot_swap)


def toy_space(dim=4, language="en"):
    rng = np.random.default_rng(0)
    vocab = ["red", "blue", "green", "stop", "go", "wait"]
    v = rng.standard_normal((len(vocab), dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return EmbeddingSpace(language, vocab, v)


def toy_corpus(n=24, language="en", seed=1):
    """Separable task: the color token carries slot B-color; the verb token
    determines the intent."""
    rng = np.random.default_rng(seed)
    colors = ["red", "blue", "green"]
    verbs = {"stop": "halt", "go": "move", "wait": "hold"}
    utts = []
    for _ in range(n):
        c = colors[int(rng.integers(3))]
        v = list(verbs)[int(rng.integers(3))]
        utts.append(Utterance([v, c], ["O", "B-color"], verbs[v]))
    return Corpus(utts, language)


def toy_catalog():
    return LabelCatalog(slot_labels=["O", "B-color", "I-color"],
                        intent_labels=["halt", "move", "hold"])


def toy_model(seed=0, **kw):
    base = dict(embedding_dim=4, n_slots=3, n_intents=3, hidden_size=6,
                latent_size=4, head="mlp", noise_variance=0.1,
                noise_enabled=False)
    base.update(kw)
    return Model(ModelConfig(**base), rng=np.random.default_rng(seed))


def quick_cfg(**kw):
    base = dict(batch_size=8, max_epochs=3, patience=5, seed=0)
    base.update(kw)
    return TrainConfig(**base)


class TestAdam:
    def test_three_steps_match_hand_recurrence(self):
        cfg = TrainConfig(learning_rate=0.1)
        opt = AdamState(cfg)
        params = {"w": np.array([1.0])}
        m = v = 0.0
        x = 1.0
        for t in range(1, 4):
            g = 2.0 * params["w"][0]  # d/dw of w^2
            opt.update(params, {"w": np.array([g])})
            m = cfg.beta1 * m + (1 - cfg.beta1) * g
            v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            x -= cfg.learning_rate * (m / (1 - cfg.beta1 ** t)) / (
                np.sqrt(v / (1 - cfg.beta2 ** t)) + cfg.epsilon)
            assert params["w"][0] == pytest.approx(x, abs=1e-15)

    def test_zero_learning_rate_is_a_null_step(self):
        opt = AdamState(TrainConfig(learning_rate=0.0))
        params = {"w": np.arange(4.0)}
        before = params["w"].copy()
        opt.update(params, {"w": np.ones(4)})
        assert np.array_equal(params["w"], before)


class TestClipping:
    def test_below_threshold_untouched(self):
        g = {"a": np.array([3.0]), "b": np.array([4.0])}  # norm 5
        norm = clip_gradients(g, 10.0)
        assert norm == pytest.approx(5.0)
        assert g["a"][0] == 3.0 and g["b"][0] == 4.0

    def test_above_threshold_rescaled_to_max(self):
        g = {"a": np.array([30.0]), "b": np.array([40.0])}  # norm 50
        clip_gradients(g, 5.0)
        total = np.sqrt(g["a"][0] ** 2 + g["b"][0] ** 2)
        assert total == pytest.approx(5.0, abs=1e-12)
        assert g["a"][0] / g["b"][0] == pytest.approx(0.75)


class TestTrain:
    def test_loss_decreases_and_validation_converges(self):
        model = toy_model()
        report_model, report = train(
            model, toy_corpus(48), toy_corpus(16, seed=2), toy_space(),
            quick_cfg(max_epochs=30, patience=30, learning_rate=0.05),
            toy_catalog())
        first, last = report.epochs[0], report.epochs[-1]
        assert last.train_loss <= 0.1 * first.train_loss
        best = max(e.valid_slot_f1 for e in report.epochs)
        assert best >= 0.95

    def test_early_stopping_with_patience_one(self):
        # zero learning rate: F1 is flat, so epoch 2 fails to improve and
        # patience=1 stops there, keeping the epoch-1 snapshot
        model = toy_model()
        best, report = train(
            model, toy_corpus(16), toy_corpus(8, seed=2), toy_space(),
            quick_cfg(max_epochs=10, patience=1, learning_rate=0.0),
            toy_catalog())
        assert len(report.epochs) == 2
        assert report.best_epoch == 1
        assert report.stopping_reason == "early_stop"

    def test_fixed_seed_runs_are_bit_identical(self):
        results = []
        for _ in range(2):
            model = toy_model(seed=9)
            best, report = train(
                model, toy_corpus(16), toy_corpus(8, seed=2), toy_space(),
                quick_cfg(seed=4), toy_catalog())
            results.append((best.params, report.to_jsonl()))
        p1, p2 = results[0][0], results[1][0]
        for k in p1:
            assert np.array_equal(p1[k], p2[k])
        assert results[0][1] == results[1][1]

    def test_embeddings_are_frozen(self):
        space = toy_space()
        checksum = space.vectors.copy()
        train(toy_model(), toy_corpus(16), toy_corpus(8, seed=2), space,
              quick_cfg(), toy_catalog())
        assert np.array_equal(space.vectors, checksum)

    def test_language_mismatch_rejected(self):
        with pytest.raises(DataError, match="language"):
            train(toy_model(), toy_corpus(8, language="xx"),
                  toy_corpus(8, seed=2), toy_space(), quick_cfg(),
                  toy_catalog())

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError, match="non-empty"):
            train(toy_model(), Corpus([], "en"), toy_corpus(8), toy_space(),
                  quick_cfg(), toy_catalog())

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(patience=0)
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0)


class TestStep:
    def test_single_step_reduces_batch_loss(self):
        model = toy_model()
        cfg = quick_cfg(learning_rate=0.1)
        opt = AdamState(cfg)
        batch = toy_corpus(8).utterances
        space, catalog = toy_space(), toy_catalog()
        rng = np.random.default_rng(0)
        losses = [step(model, batch, space, catalog, opt, cfg, rng)
                  for _ in range(5)]
        assert losses[-1] < losses[0]

    def test_empty_batch_rejected(self):
        with pytest.raises(DataError, match="empty"):
            step(toy_model(), [], toy_space(), toy_catalog(),
                 AdamState(quick_cfg()), quick_cfg(),
                 np.random.default_rng(0))


class TestZeroShotSwap:
    def test_self_swap_is_identity(self):
        model = toy_model()
        space = toy_space()
        swapped, out_space = zero_shot_swap(model, space)
        assert swapped is model and out_space is space

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DataError, match="dim"):
            zero_shot_swap(toy_model(), toy_space(dim=7))
