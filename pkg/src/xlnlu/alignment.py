"""Cross-lingual mapping refinement: orthogonal Procrustes over a seed
dictionary, with optional self-learning augmentation by mutual nearest
neighbors."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import linalg
from .embeddings import EmbeddingSpace
from .errors import DataError
from .linalg import svd

log = logging.getLogger(__name__)


@dataclass
class SeedDictionary:
    """Word pairs (x_word, z_word) anchoring the alignment; equivalent to a
    sparse binary dictionary matrix."""

    pairs: list[tuple[str, str]]

    def __post_init__(self):
        if not self.pairs:
            raise DataError("seed dictionary must be non-empty")
        if len(set(self.pairs)) != len(self.pairs):
            raise DataError("seed dictionary contains duplicate pairs")

    def __len__(self) -> int:
        return len(self.pairs)

    def flipped(self) -> "SeedDictionary":
        return SeedDictionary([(b, a) for a, b in self.pairs])

    def resolve(self, x: EmbeddingSpace, z: EmbeddingSpace
                ) -> tuple[np.ndarray, np.ndarray]:
        """Row indices of each pair in its space; unknown words are errors."""
        xi, zi = [], []
        for xw, zw in self.pairs:
            if xw not in x:
                raise DataError(f"seed word {xw!r} missing from {x.language} space")
            if zw not in z:
                raise DataError(f"seed word {zw!r} missing from {z.language} space")
            xi.append(x.index[xw])
            zi.append(z.index[zw])
        return np.array(xi, dtype=np.intp), np.array(zi, dtype=np.intp)


@dataclass
class MappingMatrix:
    """Orthogonal dim x dim map; applied on the right to row vectors."""

    w: np.ndarray

    def __post_init__(self):
        err = linalg.orthogonality_error(self.w)
        if err > 1e-6:
            raise DataError(f"mapping matrix not orthogonal (error {err:.2e})")


@dataclass
class RefineConfig:
    threshold: float = 0.15
    max_iters: int = 10
    augment: bool = False


@dataclass
class RefineReport:
    seed_distances: list[float] = field(default_factory=list)
    dictionary_sizes: list[int] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.seed_distances)


def solve_procrustes(x: EmbeddingSpace, z: EmbeddingSpace,
                     d: SeedDictionary) -> MappingMatrix:
    """Closed-form maximizer of the dictionary-restricted alignment trace:
    W = U V^T for U S V^T = svd(X_d^T Z_d)."""
    if x.dim != z.dim:
        raise DataError(f"dimension mismatch: {x.dim} vs {z.dim}")
    xi, zi = d.resolve(x, z)
    m = x.vectors[xi].T @ z.vectors[zi]
    res = svd(m)
    w = res.u @ res.v.T
    return MappingMatrix(w)


def map_space(space: EmbeddingSpace, mapping: MappingMatrix) -> EmbeddingSpace:
    if space.dim != mapping.w.shape[0]:
        raise DataError(
            f"cannot map {space.dim}-d space with "
            f"{mapping.w.shape[0]}-d mapping")
    return EmbeddingSpace(space.language, list(space.vocab),
                          space.vectors @ mapping.w)


def seed_cosine_distance(x: EmbeddingSpace, z: EmbeddingSpace,
                         mapping: MappingMatrix, d: SeedDictionary) -> float:
    """Mean cosine distance between mapped x seed rows and z seed rows."""
    xi, zi = d.resolve(x, z)
    a = x.vectors[xi] @ mapping.w
    b = z.vectors[zi]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.where(na * nb == 0.0, 1.0, na * nb)
    cos = (a * b).sum(axis=1) / denom
    return float(np.mean(1.0 - cos))


def _mutual_nearest_neighbors(x_mapped: np.ndarray, z: np.ndarray
                              ) -> list[tuple[int, int]]:
    # rows are unit norm after preprocessing, so dot products are cosines
    sim = x_mapped @ z.T
    nn_xz = sim.argmax(axis=1)
    nn_zx = sim.argmax(axis=0)
    return [(i, int(j)) for i, j in enumerate(nn_xz) if nn_zx[j] == i]


def refine(x: EmbeddingSpace, z: EmbeddingSpace, seeds: SeedDictionary,
           cfg: RefineConfig | None = None
           ) -> tuple[MappingMatrix, RefineReport]:
    """Iterate solve -> (optional mutual-NN dictionary augmentation) -> re-solve
    until the seed pairs are closer than cfg.threshold or max_iters is hit.

    Seed pairs are always retained in the augmented dictionary. Without
    augmentation the closed form is exact for the fixed dictionary, so the
    loop stops after one iteration.
    """
    cfg = cfg or RefineConfig()
    report = RefineReport()
    current = SeedDictionary(list(seeds.pairs))
    mapping = solve_procrustes(x, z, current)
    for _ in range(cfg.max_iters):
        if cfg.augment:
            pairs = dict.fromkeys(seeds.pairs)
            for i, j in _mutual_nearest_neighbors(
                    x.vectors @ mapping.w, z.vectors):
                pairs.setdefault((x.vocab[i], z.vocab[j]))
            current = SeedDictionary(list(pairs))
            mapping = solve_procrustes(x, z, current)
        dist = seed_cosine_distance(x, z, mapping, seeds)
        report.seed_distances.append(dist)
        report.dictionary_sizes.append(len(current))
        if not cfg.augment or dist <= cfg.threshold:
            break
    return mapping, report


@dataclass
class SeedSelection:
    dictionary: SeedDictionary | None
    missing: list[str]
    ambiguous: dict[str, list[str]]


def load_lexicon(path: str) -> list[tuple[str, str]]:
    """MUSE-style bilingual lexicon: one tab-separated pair per line."""
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(
                    f"{path}:{lineno}: expected 'source<TAB>target'")
            pairs.append((parts[0], parts[1]))
    return pairs


def build_seed_dictionary(source_words: list[str],
                          lexicon: list[tuple[str, str]]) -> SeedSelection:
    """Pair each requested source word with its first lexicon translation.

    Words absent from the lexicon are reported and excluded; words with
    several translations keep the first and are reported as ambiguous.
    """
    if not source_words:
        raise DataError("seed word list is empty")
    translations: dict[str, list[str]] = {}
    for src, tgt in lexicon:
        translations.setdefault(src, []).append(tgt)
    pairs, missing, ambiguous = [], [], {}
    for word in source_words:
        options = translations.get(word)
        if not options:
            missing.append(word)
            continue
        if len(options) > 1:
            ambiguous[word] = options
        pairs.append((word, options[0]))
    if missing:
        log.warning("seed words missing from lexicon: %s", ", ".join(missing))
    dictionary = SeedDictionary(pairs) if pairs else None
    return SeedSelection(dictionary=dictionary, missing=missing,
                         ambiguous=ambiguous)


class ProcrustesAligner(BaseEstimator):
    """Estimator-style wrapper around the refinement loop.

    fit() learns the orthogonal mapping from (x_space, z_space, seeds);
    transform() applies it to an embedding space.
    """

    def __init__(self, threshold: float = 0.15, max_iters: int = 10,
                 augment: bool = False):
        self.threshold = threshold
        self.max_iters = max_iters
        self.augment = augment

    def fit(self, x_space: EmbeddingSpace, z_space: EmbeddingSpace,
            seeds: SeedDictionary) -> "ProcrustesAligner":
        cfg = RefineConfig(threshold=self.threshold, max_iters=self.max_iters,
                           augment=self.augment)
        self.mapping_, self.report_ = refine(x_space, z_space, seeds, cfg)
        return self

    def transform(self, space: EmbeddingSpace) -> EmbeddingSpace:
        if not hasattr(self, "mapping_"):
            raise DataError("ProcrustesAligner is not fitted")
        return map_space(space, self.mapping_)
