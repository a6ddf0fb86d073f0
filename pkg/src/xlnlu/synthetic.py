"""Synthetic bilingual corpora with planted alignments.

Language A is generated from a small template grammar; language B is its
token-wise cipher translation. The B embedding space is the A space pushed
through a planted orthogonal map plus optional Gaussian perturbation, so the
quality of any recovered mapping can be judged against ground truth.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .alignment import MappingMatrix
from .corpus import (DURATION_TOKEN, NUMBER_TOKEN, TIME_TOKEN, Corpus,
                     Utterance)
from .embeddings import EmbeddingSpace
from .errors import ConfigError

_SHARED_TOKENS = {NUMBER_TOKEN, TIME_TOKEN, DURATION_TOKEN, "am", "pm"}


@dataclass
class Element:
    """One template position: a draw from `pool`, optionally opening a slot
    span of up to `max_span` tokens."""

    pool: str
    slot: str | None = None
    max_span: int = 1


@dataclass
class Template:
    intent: str
    elements: list[Element]


@dataclass
class SyntheticSpec:
    source_language: str = "en"
    target_language: str = "xx"
    embedding_dim: int = 12
    n_train: int = 120
    n_valid: int = 40
    n_test: int = 40
    # per-entry std-dev of the perturbation applied to target vectors
    alignment_noise: float = 0.0
    # rotation angle of the planted map's 2-d blocks; 0 keeps both spaces
    # identical up to noise, larger values degrade the unrefined baseline
    rotation_angle: float = 0.0
    # spread of word vectors around their pool center
    class_spread: float = 0.35
    n_numbers_total: int = 30
    n_numbers_embedded: int = 12
    n_seed_words: int = 30
    seed: int = 13
    pools: dict[str, int] = field(default_factory=lambda: {
        "wverb": 3, "averb": 3, "rverb": 3,
        "filler": 6, "loc": 6, "item": 6, "daypart": 6,
    })
    templates: list[Template] = field(default_factory=list)

    def __post_init__(self):
        if not self.templates:
            self.templates = default_templates()
        self.templates = [
            t if isinstance(t, Template) else Template(
                intent=t["intent"],
                elements=[Element(**e) for e in t["elements"]])
            for t in self.templates]
        self.validate()

    def validate(self) -> None:
        if self.embedding_dim < 2:
            raise ConfigError("embedding_dim must be >= 2")
        if self.alignment_noise < 0:
            raise ConfigError("alignment_noise must be >= 0")
        if self.n_numbers_embedded > self.n_numbers_total:
            raise ConfigError("n_numbers_embedded > n_numbers_total")
        for t in self.templates:
            if not t.elements:
                raise ConfigError(
                    f"template for intent {t.intent!r} emits no tokens")
            for e in t.elements:
                if e.pool not in self.pools and e.pool not in (
                        "number", "clocktime"):
                    raise ConfigError(
                        f"template references unknown pool {e.pool!r}")
                if e.max_span < 1:
                    raise ConfigError("element max_span must be >= 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        data = json.loads(text)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(
                f"unknown synthetic-spec keys: {', '.join(sorted(unknown))}")
        return cls(**data)


def default_templates() -> list[Template]:
    return [
        Template("get_weather", [
            Element("wverb"), Element("filler"),
            Element("loc", slot="loc", max_span=2),
            Element("daypart", slot="when"),
        ]),
        Template("get_weather", [
            Element("wverb"), Element("loc", slot="loc"),
            Element("number", slot="when"), Element("clocktime", slot="when"),
        ]),
        Template("set_alarm", [
            Element("averb"), Element("filler"),
            Element("number", slot="when"), Element("clocktime", slot="when"),
        ]),
        Template("set_alarm", [
            Element("averb"), Element("daypart", slot="when"),
            Element("filler"),
        ]),
        Template("set_reminder", [
            Element("rverb"), Element("filler"),
            Element("item", slot="todo", max_span=2),
            Element("daypart", slot="when"),
        ]),
        Template("set_reminder", [
            Element("rverb"), Element("item", slot="todo"),
            Element("number", slot="when"),
        ]),
    ]


@dataclass
class SyntheticBundle:
    corpus_a: dict[str, Corpus]
    corpus_b: dict[str, Corpus]
    space_a: EmbeddingSpace
    space_b: EmbeddingSpace
    gold_mapping: MappingMatrix
    lexicon: list[tuple[str, str]]
    seed_words: list[str]
    spec: SyntheticSpec


def _cipher(word: str) -> str:
    if word in _SHARED_TOKENS or _looks_numeric(word):
        return word
    return "zq" + word


def _looks_numeric(word: str) -> bool:
    return word.replace(":", "").isdigit()


def _planted_rotation(dim: int, angle: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Orthogonal map built from 2-d rotations of `angle` in a random basis."""
    from .linalg import random_orthogonal
    if angle == 0.0:
        block = np.eye(dim)
    else:
        block = np.eye(dim)
        c, s = np.cos(angle), np.sin(angle)
        for i in range(0, dim - 1, 2):
            block[i, i] = c
            block[i, i + 1] = s
            block[i + 1, i] = -s
            block[i + 1, i + 1] = c
    basis = random_orthogonal(dim, rng)
    return basis @ block @ basis.T


def generate_synthetic(spec: SyntheticSpec) -> SyntheticBundle:
    """Build parallel corpora, both embedding spaces, the planted map, and
    the cipher lexicon, all deterministically from spec.seed."""
    # independent streams so e.g. the noise level cannot perturb the
    # corpus draws: changing alignment_noise must change embeddings only
    rng = np.random.default_rng([spec.seed, 0])
    rng_map = np.random.default_rng([spec.seed, 1])
    rng_noise = np.random.default_rng([spec.seed, 2])
    rng_corpus = np.random.default_rng([spec.seed, 3])

    pool_words: dict[str, list[str]] = {
        name: [f"{name}{i}" for i in range(size)]
        for name, size in spec.pools.items()
    }
    numbers = [str(n) for n in range(spec.n_numbers_total)]
    clocktimes = ["am", "pm"]

    vocab: list[str] = []
    pool_of: dict[str, str] = {}
    for name, words in pool_words.items():
        for w in words:
            vocab.append(w)
            pool_of[w] = name
    for w in numbers[:spec.n_numbers_embedded]:
        vocab.append(w)
        pool_of[w] = "number"
    for w in clocktimes:
        vocab.append(w)
        pool_of[w] = "clocktime"
    for w in (NUMBER_TOKEN, TIME_TOKEN, DURATION_TOKEN):
        vocab.append(w)
        pool_of[w] = "placeholder:" + w

    # pool centers on the unit sphere; words scattered around them
    centers: dict[str, np.ndarray] = {}
    vectors = np.zeros((len(vocab), spec.embedding_dim))
    for i, w in enumerate(vocab):
        pool = pool_of[w]
        if pool not in centers:
            c = rng.standard_normal(spec.embedding_dim)
            centers[pool] = c / np.linalg.norm(c)
        v = centers[pool] + spec.class_spread * rng.standard_normal(
            spec.embedding_dim)
        vectors[i] = v / np.linalg.norm(v)

    space_a = EmbeddingSpace(spec.source_language, list(vocab), vectors)

    q = _planted_rotation(spec.embedding_dim, spec.rotation_angle, rng_map)
    b_vectors = vectors @ q
    if spec.alignment_noise > 0:
        b_vectors = b_vectors + spec.alignment_noise * rng_noise.standard_normal(
            b_vectors.shape)
    b_vocab = [_cipher(w) for w in vocab]
    space_b = EmbeddingSpace(spec.target_language, b_vocab, b_vectors)

    lexicon = [(w, _cipher(w)) for w in vocab]

    def emit(template: Template) -> Utterance:
        tokens: list[str] = []
        slots: list[str] = []
        for e in template.elements:
            if e.pool == "number":
                choices = numbers
            elif e.pool == "clocktime":
                choices = clocktimes
            else:
                choices = pool_words[e.pool]
            span = (1 if e.max_span == 1
                    else int(rng_corpus.integers(1, e.max_span + 1)))
            for k in range(span):
                tokens.append(choices[int(rng_corpus.integers(len(choices)))])
                if e.slot is None:
                    slots.append("O")
                else:
                    slots.append(("B-" if k == 0 else "I-") + e.slot)
        return Utterance(tokens=tokens, slots=slots, intent=template.intent)

    def make_split(n: int) -> tuple[Corpus, Corpus]:
        a_utts, b_utts = [], []
        for i in range(n):
            t = spec.templates[i % len(spec.templates)]
            u = emit(t)
            a_utts.append(u)
            b_utts.append(Utterance(tokens=[_cipher(w) for w in u.tokens],
                                    slots=list(u.slots), intent=u.intent))
        return (Corpus(a_utts, spec.source_language),
                Corpus(b_utts, spec.target_language))

    corpus_a, corpus_b = {}, {}
    for split, n in (("train", spec.n_train), ("valid", spec.n_valid),
                     ("test", spec.n_test)):
        corpus_a[split], corpus_b[split] = make_split(n)

    seed_words = [w for w in vocab if not _looks_numeric(w)][:spec.n_seed_words]

    return SyntheticBundle(
        corpus_a=corpus_a, corpus_b=corpus_b,
        space_a=space_a, space_b=space_b,
        gold_mapping=MappingMatrix(q),
        lexicon=lexicon, seed_words=seed_words, spec=spec)
