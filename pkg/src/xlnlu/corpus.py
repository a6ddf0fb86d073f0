"""Corpus handling: CoNLL-style ingestion, BIO repair, label catalogs,
delexicalization, and embedding lookup."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSpace
from .errors import DataError

log = logging.getLogger(__name__)

NUMBER_TOKEN = "<number>"
TIME_TOKEN = "<time>"
DURATION_TOKEN = "<last>"

_NUMBER_RE = re.compile(r"^\d+([.,]\d+)?$")
_CLOCK_RE = re.compile(r"^\d{1,2}:\d{2}$")
_DURATION_RE = re.compile(r"^\d+([.,]\d+)?(min|mins|hr|hrs|h|m|sec|s)$")
_TIME_WORDS = {"am", "pm", "AM", "PM"}


@dataclass
class Utterance:
    tokens: list[str]
    slots: list[str]
    intent: str

    def __post_init__(self):
        if not self.tokens:
            raise DataError("utterance has no tokens")
        if len(self.tokens) != len(self.slots):
            raise DataError(
                f"{len(self.tokens)} tokens vs {len(self.slots)} slot labels")


@dataclass
class LabelCatalog:
    """Stable slot/intent label indexing; 'O' is always slot index 0."""

    slot_labels: list[str] = field(default_factory=lambda: ["O"])
    intent_labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if "O" not in self.slot_labels:
            self.slot_labels = ["O"] + self.slot_labels

    def slot_index(self, label: str) -> int:
        return self.slot_labels.index(label)

    def intent_index(self, label: str) -> int:
        return self.intent_labels.index(label)

    def observe(self, u: Utterance, strict: bool = False) -> None:
        for s in u.slots:
            if s not in self.slot_labels:
                if strict:
                    raise DataError(f"unknown slot label {s!r}")
                self.slot_labels.append(s)
        if u.intent not in self.intent_labels:
            if strict:
                raise DataError(f"unknown intent label {u.intent!r}")
            self.intent_labels.append(u.intent)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"slot_labels": self.slot_labels,
                       "intent_labels": self.intent_labels}, f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "LabelCatalog":
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        return cls(slot_labels=d["slot_labels"],
                   intent_labels=d["intent_labels"])


@dataclass
class Corpus:
    utterances: list[Utterance]
    language: str = "und"

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)


def repair_bio(labels: list[str]) -> tuple[list[str], int]:
    """Turn orphaned I-X labels into B-X (conlleval-style leniency)."""
    repaired = list(labels)
    fixes = 0
    prev = "O"
    for i, lab in enumerate(repaired):
        if lab.startswith("I-"):
            kind = lab[2:]
            if prev not in (f"B-{kind}", f"I-{kind}"):
                repaired[i] = f"B-{kind}"
                fixes += 1
        prev = repaired[i]
    return repaired, fixes


def load_corpus(path: str, catalog: LabelCatalog | None = None,
                strict: bool = False) -> tuple[Corpus, LabelCatalog]:
    """Parse the CoNLL-style corpus format.

    Lines are "token<TAB>slot"; an utterance ends with "#intent=<label>";
    blank lines separate utterances; an optional "#language=<tag>" line may
    open the file.
    """
    catalog = catalog or LabelCatalog()
    utterances: list[Utterance] = []
    language = "und"
    tokens: list[str] = []
    slots: list[str] = []
    repairs = 0

    def flush(intent: str, lineno: int):
        nonlocal tokens, slots, repairs
        if not tokens:
            raise DataError(f"{path}:{lineno}: intent line with no tokens")
        fixed, n = repair_bio(slots)
        repairs += n
        u = Utterance(tokens=tokens, slots=fixed, intent=intent)
        catalog.observe(u, strict=strict)
        utterances.append(u)
        tokens, slots = [], []

    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                if tokens:
                    raise DataError(
                        f"{path}:{lineno}: utterance without #intent line")
                continue
            if line.startswith("#language="):
                language = line.split("=", 1)[1]
                continue
            if line.startswith("#intent="):
                flush(line.split("=", 1)[1], lineno)
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(
                    f"{path}:{lineno}: expected 'token<TAB>slot', got {line!r}")
            tokens.append(parts[0])
            slots.append(parts[1])
    if tokens:
        raise DataError(f"{path}: trailing utterance without #intent line")
    if repairs:
        log.warning("%s: repaired %d orphaned I- label(s)", path, repairs)
    return Corpus(utterances=utterances, language=language), catalog


def save_corpus(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#language={corpus.language}\n")
        for u in corpus:
            for tok, slot in zip(u.tokens, u.slots):
                f.write(f"{tok}\t{slot}\n")
            f.write(f"#intent={u.intent}\n\n")


def delexicalize_token(tok: str) -> str:
    if tok in _TIME_WORDS or _CLOCK_RE.match(tok):
        return TIME_TOKEN
    if _DURATION_RE.match(tok):
        return DURATION_TOKEN
    if _NUMBER_RE.match(tok):
        return NUMBER_TOKEN
    return tok


def delexicalize(u: Utterance) -> Utterance:
    """Replace number/time/duration surface tokens by placeholder tokens.

    Labels and intent are untouched; idempotent because the placeholders
    match none of the recognizers.
    """
    return Utterance(tokens=[delexicalize_token(t) for t in u.tokens],
                     slots=list(u.slots), intent=u.intent)


def delexicalize_corpus(corpus: Corpus) -> Corpus:
    return Corpus([delexicalize(u) for u in corpus], language=corpus.language)


def encode(u: Utterance, space: EmbeddingSpace) -> tuple[np.ndarray, int]:
    """Per-token embedding lookup; out-of-vocabulary tokens get zero vectors.

    Returns (T x dim matrix, oov count).
    """
    out = np.zeros((len(u.tokens), space.dim))
    oov = 0
    for i, tok in enumerate(u.tokens):
        idx = space.index.get(tok)
        if idx is None:
            oov += 1
        else:
            out[i] = space.vectors[idx]
    return out, oov
