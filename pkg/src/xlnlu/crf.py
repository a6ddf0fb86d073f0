"""Linear-chain CRF: differentiable sequence NLL via the forward algorithm,
plus numpy Viterbi decoding."""

from __future__ import annotations

import numpy as np

from .autodiff import Node, Tape


def crf_nll(tape: Tape, emissions: Node, transitions: Node,
            gold: np.ndarray) -> Node:
    """Negative log-likelihood of the gold path.

    Path score = sum_t emissions[t, y_t] + sum_t transitions[y_{t-1}, y_t];
    the partition function comes from the forward algorithm in log space.
    No start/end potentials: the first step scores emissions only.
    """
    t_len = emissions.value.shape[0]
    gold = np.asarray(gold, dtype=np.intp)

    alpha = tape.slice_rows(emissions, 0, 1)            # (1, K)
    for t in range(1, t_len):
        prev = tape.transpose(alpha)                    # (K, 1)
        scores = tape.add(prev, transitions)            # (K, K) broadcast
        lse = tape.logsumexp(scores, axis=0, keepdims=True)
        alpha = tape.add(lse, tape.slice_rows(emissions, t, t + 1))
    log_z = tape.logsumexp(alpha)

    em_score = tape.sum(tape.pick(emissions, np.arange(t_len), gold))
    if t_len > 1:
        tr_score = tape.sum(tape.pick(transitions, gold[:-1], gold[1:]))
        gold_score = tape.add(em_score, tr_score)
    else:
        gold_score = em_score
    return tape.sub(log_z, gold_score)


def viterbi(emissions: np.ndarray, transitions: np.ndarray
            ) -> tuple[list[int], float]:
    """Best label path and its score (same scoring convention as crf_nll)."""
    t_len, k = emissions.shape
    delta = emissions[0].copy()
    back = np.zeros((t_len, k), dtype=np.intp)
    for t in range(1, t_len):
        cand = delta[:, None] + transitions
        back[t] = cand.argmax(axis=0)
        delta = cand.max(axis=0) + emissions[t]
    path = [int(delta.argmax())]
    for t in range(t_len - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, float(delta.max())


def log_partition(emissions: np.ndarray, transitions: np.ndarray) -> float:
    """Forward-algorithm log partition, numpy only (no tape)."""
    alpha = emissions[0].copy()
    for t in range(1, emissions.shape[0]):
        m = (alpha[:, None] + transitions).max(axis=0)
        alpha = m + np.log(
            np.exp(alpha[:, None] + transitions - m).sum(axis=0))
        alpha = alpha + emissions[t]
    m = alpha.max()
    return float(m + np.log(np.exp(alpha - m).sum()))
