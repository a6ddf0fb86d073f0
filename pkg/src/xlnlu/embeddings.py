"""Embedding spaces: fastText-style .vec parsing, export, and preprocessing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)


@dataclass
class EmbeddingSpace:
    """An ordered vocabulary plus a dense (|vocab| x dim) vector matrix."""

    language: str
    vocab: list[str]
    vectors: np.ndarray
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: i for i, w in enumerate(self.vocab)}
        if len(self.index) != len(self.vocab):
            raise DataError("duplicate words in embedding vocabulary")
        if self.vectors.shape[0] != len(self.vocab):
            raise DataError(
                f"vector count {self.vectors.shape[0]} != vocab size "
                f"{len(self.vocab)}")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self.index[word]]

    def copy(self) -> "EmbeddingSpace":
        return EmbeddingSpace(self.language, list(self.vocab),
                              self.vectors.copy())


def load_embeddings(path: str, max_vocab: int | None = None,
                    language: str = "und") -> EmbeddingSpace:
    """Parse a .vec text file: optional "<count> <dim>" header, then
    "word v1 ... vdim" per line. Duplicate words keep the first occurrence."""
    vocab: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            if lineno == 1 and len(parts) == 2:
                try:
                    declared_dim = int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = declared_dim
                    continue
            word, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            if len(vals) != dim:
                raise DataError(
                    f"{path}:{lineno}: expected {dim} values, got {len(vals)}")
            if word in seen:
                log.warning("%s:%d: duplicate word %r skipped",
                            path, lineno, word)
                continue
            try:
                row = np.array([float(v) for v in vals], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad float value") from exc
            seen.add(word)
            vocab.append(word)
            rows.append(row)
            if max_vocab is not None and len(vocab) >= max_vocab:
                break
    if not vocab:
        raise DataError(f"{path}: empty embedding file")
    return EmbeddingSpace(language, vocab, np.vstack(rows))


def save_embeddings(space: EmbeddingSpace, path: str) -> None:
    """Export in .vec format at 17 significant digits (lossless for float64)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(space.vocab)} {space.dim}\n")
        for word, row in zip(space.vocab, space.vectors):
            vals = " ".join(format(v, ".17g") for v in row)
            f.write(f"{word} {vals}\n")


def preprocess(space: EmbeddingSpace) -> EmbeddingSpace:
    """Length-normalize, mean-center, length-normalize, repeated to the
    joint fixed point.

    A single normalize-center-normalize pass leaves residual column means
    of order (mean x spread); iterating the center/normalize pair drives
    both invariants (unit rows, zero column means) below 1e-10 and makes
    the whole operation idempotent. Zero rows cannot be normalized; they
    stay zero and are logged.
    """
    if len(space.vocab) == 0:
        raise DataError("cannot preprocess an empty embedding space")
    v = _normalize_rows(space.vectors.copy())
    for _ in range(100):
        v = v - v.mean(axis=0, keepdims=True)
        v = _normalize_rows(v)
        if np.abs(v.mean(axis=0)).max() <= 1e-12:
            break
    return EmbeddingSpace(space.language, list(space.vocab), v)


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    if zero.any():
        log.warning("%d zero row(s) left unnormalized", int(zero.sum()))
    norms[norms == 0.0] = 1.0
    return v / norms
