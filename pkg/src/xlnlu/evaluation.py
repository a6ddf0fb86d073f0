"""Intent accuracy and span-level BIO slot F1 (conlleval semantics), plus
the ablation runner and the latent-vector export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, repair_bio
from .errors import DataError


@dataclass
class EvalResult:
    intent_accuracy: float = 0.0
    slot_precision: float = 0.0
    slot_recall: float = 0.0
    slot_f1: float = 0.0
    gold_spans: int = 0
    predicted_spans: int = 0
    matched_spans: int = 0
    oov_rate: float = 0.0
    utterance_count: int = 0

    def as_dict(self) -> dict:
        return {
            "intent_accuracy": self.intent_accuracy,
            "slot_precision": self.slot_precision,
            "slot_recall": self.slot_recall,
            "slot_f1": self.slot_f1,
            "gold_spans": self.gold_spans,
            "predicted_spans": self.predicted_spans,
            "matched_spans": self.matched_spans,
            "oov_rate": self.oov_rate,
            "utterance_count": self.utterance_count,
        }


def intent_accuracy(pred: list[str], gold: list[str]) -> float:
    if len(pred) != len(gold) or not gold:
        raise DataError(
            f"intent lists must be equal-length and non-empty "
            f"({len(pred)} vs {len(gold)})")
    hits = sum(1 for p, g in zip(pred, gold) if p == g)
    return hits / len(gold)


def extract_spans(labels: list[str]) -> set[tuple[str, int, int]]:
    """(type, start, end-exclusive) spans from a BIO sequence.

    Orphaned I- labels are first repaired to B- so predictions get the same
    leniency as corpus ingestion."""
    labels, _ = repair_bio(list(labels))
    spans = set()
    start, kind = None, None
    for i, lab in enumerate(labels):
        if lab.startswith("B-"):
            if start is not None:
                spans.add((kind, start, i))
            start, kind = i, lab[2:]
        elif lab.startswith("I-") and kind == lab[2:] and start is not None:
            continue
        else:
            if start is not None:
                spans.add((kind, start, i))
            start, kind = None, None
    if start is not None:
        spans.add((kind, start, len(labels)))
    return spans


def slot_f1(pred_seqs: list[list[str]], gold_seqs: list[list[str]]
            ) -> EvalResult:
    """Micro-averaged span P/R/F1; a span counts only on exact type and
    boundary match. 0/0 ratios collapse to 0."""
    if len(pred_seqs) != len(gold_seqs):
        raise DataError("prediction / gold corpus size mismatch")
    n_gold = n_pred = n_match = 0
    for uid, (pred, gold) in enumerate(zip(pred_seqs, gold_seqs)):
        if len(pred) != len(gold):
            raise DataError(
                f"utterance {uid}: {len(pred)} predicted labels "
                f"vs {len(gold)} gold labels")
        p_spans = extract_spans(pred)
        g_spans = extract_spans(gold)
        n_gold += len(g_spans)
        n_pred += len(p_spans)
        n_match += len(p_spans & g_spans)
    precision = n_match / n_pred if n_pred else 0.0
    recall = n_match / n_gold if n_gold else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return EvalResult(slot_precision=precision, slot_recall=recall,
                      slot_f1=f1, gold_spans=n_gold, predicted_spans=n_pred,
                      matched_spans=n_match)


def evaluate_model(model, corpus: Corpus, space, catalog) -> EvalResult:
    """Inference-mode pass over a corpus; returns joint metrics + OOV rate."""
    from .corpus import encode
    pred_intents, gold_intents = [], []
    pred_seqs, gold_seqs = [], []
    oov_total = token_total = 0
    for u in corpus:
        emb, oov = encode(u, space)
        oov_total += oov
        token_total += len(u.tokens)
        slot_idx, intent_idx, _ = model.predict(emb)
        pred_seqs.append([catalog.slot_labels[i] for i in slot_idx])
        gold_seqs.append(list(u.slots))
        pred_intents.append(catalog.intent_labels[intent_idx])
        gold_intents.append(u.intent)
    result = slot_f1(pred_seqs, gold_seqs)
    result.intent_accuracy = intent_accuracy(pred_intents, gold_intents)
    result.oov_rate = oov_total / token_total if token_total else 0.0
    result.utterance_count = len(corpus.utterances)
    return result


def export_latents(model, corpus: Corpus, space, path: str) -> None:
    """Line-delimited JSON dump of posterior means/log-variances.

    One record per token (slot posterior) and one per utterance (intent
    posterior); deterministic because inference uses mean substitution."""
    from .corpus import encode
    if model.config.head != "lvm":
        raise DataError("latent export requires an LVM-head model")
    with open(path, "w", encoding="utf-8") as f:
        for uid, u in enumerate(corpus):
            emb, _ = encode(u, space)
            _, _, trace = model.predict(emb)
            for t, word in enumerate(u.tokens):
                rec = {"kind": "token", "utterance": uid, "position": t,
                       "word": word,
                       "mu": trace.slot_mu[t].tolist(),
                       "log_var": trace.slot_logvar[t].tolist()}
                f.write(json.dumps(rec) + "\n")
            rec = {"kind": "sentence", "utterance": uid,
                   "mu": trace.intent_mu.tolist(),
                   "log_var": trace.intent_logvar.tolist()}
            f.write(json.dumps(rec) + "\n")


@dataclass
class AblationCell:
    config_name: str
    seed: int
    result: EvalResult


@dataclass
class AblationTable:
    cells: list[AblationCell] = field(default_factory=list)

    def mean(self, config_name: str, metric: str) -> float:
        vals = [getattr(c.result, metric) for c in self.cells
                if c.config_name == config_name]
        return float(np.mean(vals))

    def spread(self, config_name: str, metric: str) -> float:
        vals = [getattr(c.result, metric) for c in self.cells
                if c.config_name == config_name]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    def config_names(self) -> list[str]:
        seen = dict.fromkeys(c.config_name for c in self.cells)
        return list(seen)

    def to_tsv(self) -> str:
        lines = ["config\tseed\tintent_acc\tslot_p\tslot_r\tslot_f1\toov_rate"]
        for c in self.cells:
            r = c.result
            lines.append(
                f"{c.config_name}\t{c.seed}\t{r.intent_accuracy:.6f}\t"
                f"{r.slot_precision:.6f}\t{r.slot_recall:.6f}\t"
                f"{r.slot_f1:.6f}\t{r.oov_rate:.6f}")
        for name in self.config_names():
            lines.append(
                f"{name}/aggregate\t-\t{self.mean(name, 'intent_accuracy'):.6f}"
                f"\t-\t-\t{self.mean(name, 'slot_f1'):.6f}\t-")
        return "\n".join(lines) + "\n"

    def to_summary_json(self) -> str:
        summary = {}
        for name in self.config_names():
            summary[name] = {
                "intent_accuracy_mean": self.mean(name, "intent_accuracy"),
                "intent_accuracy_sd": self.spread(name, "intent_accuracy"),
                "slot_f1_mean": self.mean(name, "slot_f1"),
                "slot_f1_sd": self.spread(name, "slot_f1"),
            }
        return json.dumps(summary, indent=2, sort_keys=True)
