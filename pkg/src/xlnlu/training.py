"""Joint training loop: Adam with gradient clipping, frozen embeddings,
early stopping on validation slot F1, and the zero-shot embedding swap."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import Tape
from .corpus import Corpus, LabelCatalog, encode
from .embeddings import EmbeddingSpace
from .errors import ConfigError, DataError, NumericError
from .evaluation import EvalResult, evaluate_model
from .model import Model


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    shuffle: bool = True
    clip_norm: float = 5.0
    # Table-1 ablation axes; noise is consumed via ModelConfig, the other
    # two by the experiment pipeline before train() is called
    noise: bool = True
    delexicalize: bool = False
    refinement: bool = False
    head: str = "lvm"

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_intent_accuracy: float
    valid_slot_f1: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopping_reason: str = ""
    train_oov_tokens: int = 0
    valid_oov_tokens: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps({"record": "epoch", **asdict(e)})
                 for e in self.epochs]
        lines.append(json.dumps({
            "record": "summary", "best_epoch": self.best_epoch,
            "stopping_reason": self.stopping_reason,
            "train_oov_tokens": self.train_oov_tokens,
            "valid_oov_tokens": self.valid_oov_tokens}))
        return "\n".join(lines) + "\n"


class AdamState:
    """Per-tensor first/second moment accumulators with bias correction."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def update(self, params: dict[str, np.ndarray],
               grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            self.m[name] = c.beta1 * self.m[name] + (1 - c.beta1) * g
            self.v[name] = c.beta2 * self.v[name] + (1 - c.beta2) * g * g
            m_hat = self.m[name] / (1 - c.beta1 ** self.t)
            v_hat = self.v[name] / (1 - c.beta2 ** self.t)
            params[name] -= c.learning_rate * m_hat / (
                np.sqrt(v_hat) + c.epsilon)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def step(model: Model, batch: list, space: EmbeddingSpace,
         catalog: LabelCatalog, opt: AdamState, cfg: TrainConfig,
         rng: np.random.Generator) -> float:
    """One gradient step on the mean joint NLL over a batch."""
    if not batch:
        raise DataError("empty batch")
    tape = Tape()
    leaves = model.make_leaves(tape)
    losses = []
    for u in batch:
        emb, _ = encode(u, space)
        gold_slots = np.array([catalog.slot_index(s) for s in u.slots])
        gold_intent = catalog.intent_index(u.intent)
        trace = model.forward(tape, leaves, emb, mode="train", rng=rng,
                              gold_slots=gold_slots, gold_intent=gold_intent)
        if not np.isfinite(trace.loss.value):
            raise NumericError(
                f"non-finite loss on utterance {' '.join(u.tokens)!r}")
        losses.append(trace.loss)
    total = losses[0]
    for extra in losses[1:]:
        total = tape.add(total, extra)
    mean_loss = tape.scale(total, 1.0 / len(losses))
    adjoints = tape.backward(mean_loss)
    grads = {name: tape.grad(adjoints, node)
             for name, node in leaves.items()}
    clip_gradients(grads, cfg.clip_norm)
    opt.update(model.params, grads)
    return float(mean_loss.value)


def _make_batches(corpus: Corpus, cfg: TrainConfig,
                  rng: np.random.Generator) -> list[list]:
    # bucket by length for cache-friendly batches; batch order is shuffled
    order = sorted(range(len(corpus.utterances)),
                   key=lambda i: (len(corpus.utterances[i].tokens), i))
    batches = [order[i:i + cfg.batch_size]
               for i in range(0, len(order), cfg.batch_size)]
    if cfg.shuffle:
        rng.shuffle(batches)
    return [[corpus.utterances[i] for i in b] for b in batches]


def train(model: Model, corpus_train: Corpus, corpus_valid: Corpus,
          space: EmbeddingSpace, cfg: TrainConfig,
          catalog: LabelCatalog) -> tuple[Model, TrainReport]:
    """Train on source-language data only; select on validation slot F1.

    The embedding matrix is a frozen lookup: it is read, never written.
    Corpora whose language tag differs from the embedding space are
    rejected, which keeps target-language data out of model selection.
    """
    if not corpus_train.utterances or not corpus_valid.utterances:
        raise DataError("training and validation corpora must be non-empty")
    for c, name in ((corpus_train, "train"), (corpus_valid, "valid")):
        if c.language != space.language:
            raise DataError(
                f"{name} corpus language {c.language!r} does not match "
                f"embedding space language {space.language!r}")

    rng = np.random.default_rng(cfg.seed)
    opt = AdamState(cfg)
    report = TrainReport()
    report.train_oov_tokens = sum(encode(u, space)[1] for u in corpus_train)
    report.valid_oov_tokens = sum(encode(u, space)[1] for u in corpus_valid)

    best_f1 = -1.0
    best_params = {k: v.copy() for k, v in model.params.items()}
    bad_streak = 0
    report.stopping_reason = "max_epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        batch_losses = [
            step(model, batch, space, catalog, opt, cfg, rng)
            for batch in _make_batches(corpus_train, cfg, rng)]
        valid = evaluate_model(model, corpus_valid, space, catalog)
        report.epochs.append(EpochRecord(
            epoch=epoch, train_loss=float(np.mean(batch_losses)),
            valid_intent_accuracy=valid.intent_accuracy,
            valid_slot_f1=valid.slot_f1))
        if valid.slot_f1 > best_f1:
            best_f1 = valid.slot_f1
            best_params = {k: v.copy() for k, v in model.params.items()}
            report.best_epoch = epoch
            bad_streak = 0
        else:
            bad_streak += 1
            if bad_streak >= cfg.patience:
                report.stopping_reason = "early_stop"
                break
    best_model = Model(model.config, params=best_params)
    return best_model, report


def zero_shot_swap(model: Model, target_space: EmbeddingSpace
                   ) -> tuple[Model, EmbeddingSpace]:
    """Swap in aligned target-language embeddings for zero-shot inference.

    Trained parameters are untouched; prediction goes through Model.predict,
    which is inference-mode only (mean substitution, no noise, no rng)."""
    if target_space.dim != model.config.embedding_dim:
        raise DataError(
            f"target space dim {target_space.dim} != model embedding dim "
            f"{model.config.embedding_dim}")
    return model, target_space


def zero_shot_evaluate(model: Model, target_space: EmbeddingSpace,
                       corpus: Corpus, catalog: LabelCatalog) -> EvalResult:
    swapped_model, space = zero_shot_swap(model, target_space)
    return evaluate_model(swapped_model, corpus, space, catalog)
