"""Shared test oracles: finite differences, brute-force CRF scoring,
naive span extraction."""

from __future__ import annotations

import itertools

import numpy as np


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        out[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def brute_log_partition(emissions: np.ndarray,
                        transitions: np.ndarray) -> float:
    t_len, k = emissions.shape
    scores = []
    for path in itertools.product(range(k), repeat=t_len):
        s = sum(emissions[t, y] for t, y in enumerate(path))
        s += sum(transitions[a, b] for a, b in zip(path, path[1:]))
        scores.append(s)
    m = max(scores)
    return m + np.log(sum(np.exp(s - m) for s in scores))


def brute_best_path(emissions: np.ndarray,
                    transitions: np.ndarray) -> tuple[list[int], float]:
    t_len, k = emissions.shape
    best, best_score = None, -np.inf
    for path in itertools.product(range(k), repeat=t_len):
        s = sum(emissions[t, y] for t, y in enumerate(path))
        s += sum(transitions[a, b] for a, b in zip(path, path[1:]))
        if s > best_score:
            best, best_score = list(path), s
    return best, best_score


def brute_spans(labels: list[str]) -> set[tuple[str, int, int]]:
    """Maximal B-I runs, scanning directly (independent of the package's
    extractor)."""
    spans = set()
    i, n = 0, len(labels)
    while i < n:
        lab = labels[i]
        if lab == "O":
            i += 1
            continue
        kind = lab[2:]
        start = i
        i += 1
        while i < n and labels[i] == f"I-{kind}":
            i += 1
        spans.add((kind, start, i))
    return spans
