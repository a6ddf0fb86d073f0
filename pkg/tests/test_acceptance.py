"""Acceptance suite: one test per shipping criterion.

Each test prints a single PASS line with the measured quantity so the run
log doubles as an acceptance report. The trend-replication check is a
stochastic-trend audit with pinned seeds: training is bit-deterministic
per seed, so the reported means are reproducible exactly.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest

from xlnlu.corpus import load_corpus
from xlnlu.embeddings import load_embeddings, preprocess
from xlnlu.evaluation import EvalResult, slot_f1
from xlnlu.experiment import (Bundle, ExperimentSettings, run_cycle,
                              write_bundle)
from xlnlu.model import Model
from xlnlu.alignment import RefineConfig, SeedDictionary, refine
from xlnlu.synthetic import SyntheticSpec, generate_synthetic
from xlnlu.training import TrainConfig

from helpers import brute_spans
from test_model import full_model_grad_check, tiny_config
from test_crf import random_instance
from helpers import brute_best_path, brute_log_partition

README = os.path.join(os.path.dirname(__file__), "..", "README.md")


def ok(msg):
    print(f"\nACCEPTANCE PASS: {msg}")


class TestCriterion1RealDataPath:
    """Published absolute scores need external assets; the ingestion path
    for them must exist and the limitation must be documented."""

    def test_readme_states_external_data_requirement(self):
        text = open(README, encoding="utf-8").read().lower()
        assert "external" in text and "fasttext" in text
        ok("README documents that published absolute scores require "
           "external data")

    def test_fasttext_vec_and_conll_ingestion(self, tmp_path):
        vec = tmp_path / "emb.vec"
        vec.write_text("2 3\nhello 0.1 0.2 0.3\nworld 1 2 3\n",
                       encoding="utf-8")
        space = load_embeddings(str(vec), language="en")
        assert space.vocab == ["hello", "world"]
        conll = tmp_path / "c.conll"
        conll.write_text(
            "#language=en\nwake\tO\nme\tO\nat\tO\n7\tB-datetime\n"
            "am\tI-datetime\n#intent=set_alarm\n", encoding="utf-8")
        corpus, catalog = load_corpus(str(conll))
        assert corpus.utterances[0].intent == "set_alarm"
        ok("fastText .vec and token/slot/intent corpus ingestion works")


class TestCriterion2ProcrustesRecovery:
    def test_planted_isometry_recovered(self):
        spec = SyntheticSpec(embedding_dim=20, rotation_angle=1.0,
                             alignment_noise=0.0, n_train=10, n_valid=5,
                             n_test=5, seed=17)
        b = generate_synthetic(spec)
        assert len(b.space_a.vocab) <= 500 and spec.embedding_dim <= 50
        seeds = SeedDictionary(
            [(tb, ta) for ta, tb in b.lexicon[:20]])  # target -> source
        t0 = time.time()
        mapping, report = refine(preprocess(b.space_b),
                                 preprocess(b.space_a), seeds,
                                 RefineConfig())
        elapsed = time.time() - t0
        err = np.abs(mapping.w - b.gold_mapping.w.T).max()
        assert err <= 1e-6
        assert elapsed < 1.0
        ok(f"Procrustes recovery err={err:.2e} (<=1e-6) "
           f"in {elapsed*1000:.0f} ms (<1 s), {len(seeds)} seed pairs")


class TestCriterion3GradientCorrectness:
    def test_twenty_tiny_instances(self):
        t0 = time.time()
        worst = 0.0
        cases = ([("lvm", s) for s in range(7)]
                 + [("mlp", s) for s in range(7, 14)]
                 + [("crf", s) for s in range(14, 20)])
        for head, seed in cases:
            worst = max(worst, full_model_grad_check(
                head, seed=200 + seed, t=2 + seed % 2, tol=1e-4))
        elapsed = time.time() - t0
        assert elapsed < 30.0
        ok(f"full-model gradcheck on 20 instances, worst rel err "
           f"{worst:.2e} (<=1e-4) in {elapsed:.1f} s (<30 s)")


class TestCriterion4CrfOracle:
    def test_two_hundred_instances(self):
        from xlnlu.crf import log_partition, viterbi
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(200):
            em, tr = random_instance(rng)
            worst = max(worst, abs(log_partition(em, tr)
                                   - brute_log_partition(em, tr)))
            assert worst <= 1e-8
            path, _ = viterbi(em, tr)
            assert path == brute_best_path(em, tr)[0]
        ok(f"CRF forward/Viterbi match enumeration on 200 instances, "
           f"worst partition err {worst:.2e} (<=1e-8), exact paths")


class TestCriterion5MetricOracle:
    LABELS = ["O", "B-a", "I-a", "B-b", "I-b"]

    def brute_f1(self, pred_seqs, gold_seqs):
        n_gold = n_pred = n_match = 0
        for p, g in zip(pred_seqs, gold_seqs):
            ps, gs = brute_spans(p), brute_spans(g)
            n_gold += len(gs)
            n_pred += len(ps)
            n_match += len(ps & gs)
        prec = n_match / n_pred if n_pred else 0.0
        rec = n_match / n_gold if n_gold else 0.0
        return (2 * prec * rec / (prec + rec) if prec + rec else 0.0,
                n_gold, n_pred, n_match)

    def test_ten_thousand_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            t = int(rng.integers(1, 9))
            pred = [self.LABELS[i] for i in rng.integers(0, 5, size=t)]
            gold = [self.LABELS[i] for i in rng.integers(0, 5, size=t)]
            r = slot_f1([pred], [gold])
            bf1, g, p, m = self.brute_f1([pred], [gold])
            assert (r.gold_spans, r.predicted_spans, r.matched_spans) == (
                g, p, m)
            assert r.slot_f1 == bf1
        ok("slot_f1 matches brute-force span extractor exactly on "
           "10^4 random BIO pairs")

    def test_hand_worked_conlleval_cases(self):
        # boundary mismatch
        r = slot_f1([["B-a", "I-a", "I-a"]], [["B-a", "I-a", "O"]])
        assert (r.slot_precision, r.slot_recall, r.slot_f1) == (0, 0, 0)
        # type mismatch
        r = slot_f1([["B-b", "I-b"]], [["B-a", "I-a"]])
        assert (r.slot_precision, r.slot_recall, r.slot_f1) == (0, 0, 0)
        # empty prediction
        r = slot_f1([["O", "O"]], [["B-a", "O"]])
        assert (r.slot_precision, r.slot_recall, r.slot_f1) == (0, 0, 0)
        # exact match
        r = slot_f1([["B-a", "I-a", "O", "B-b"]],
                    [["B-a", "I-a", "O", "B-b"]])
        assert (r.slot_precision, r.slot_recall, r.slot_f1) == (1, 1, 1)
        ok("hand-worked conlleval cases (boundary, type, empty, exact) "
           "give the specified P/R/F1")


class TestCriterion6ZeroShotIdentity:
    def test_identity_cipher_bundle(self):
        spec = SyntheticSpec(embedding_dim=10, n_train=300, n_valid=100,
                             n_test=100, alignment_noise=0.0,
                             rotation_angle=0.0, seed=23)
        t0 = time.time()
        bundle = Bundle.from_synthetic(generate_synthetic(spec))
        cfg = TrainConfig(max_epochs=8, patience=8, batch_size=16,
                          learning_rate=0.01, seed=0)
        res = run_cycle(bundle, cfg,
                        ExperimentSettings(hidden_size=12, latent_size=6))
        elapsed = time.time() - t0
        assert res.source.as_dict() == res.target.as_dict()
        assert res.source.slot_f1 == res.target.slot_f1
        assert res.source.intent_accuracy == res.target.intent_accuracy
        assert res.source.slot_precision == res.target.slot_precision
        assert res.source.slot_recall == res.target.slot_recall
        assert elapsed < 120.0
        ok(f"sigma=0 cipher bundle (500 utterances): source and zero-shot "
           f"metrics identical (slot F1 {res.source.slot_f1:.6f}) "
           f"in {elapsed:.1f} s (<2 min)")


TREND_SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture(scope="module")
def means():
    """Mean zero-shot slot F1 per ablation config over the pinned seeds."""
    spec = SyntheticSpec(embedding_dim=10, n_train=40, n_valid=24,
                         n_test=40, alignment_noise=0.2,
                         rotation_angle=0.9, seed=13)
    bundle = Bundle.from_synthetic(generate_synthetic(spec))
    base = TrainConfig(max_epochs=50, patience=12, batch_size=8,
                       learning_rate=0.01)
    settings = ExperimentSettings(hidden_size=12, latent_size=6)
    grid = {
        "vanilla": replace(base, noise=False, refinement=False),
        "noise": replace(base, noise=True, refinement=False),
        "refinement": replace(base, noise=False, refinement=True),
        "noise_refinement": replace(base, noise=True, refinement=True),
        "noise_refinement_mlp": replace(base, noise=True,
                                        refinement=True, head="mlp"),
    }
    out = {}
    for name, cfg in grid.items():
        out[name] = float(np.mean([
            run_cycle(bundle, replace(cfg, seed=s),
                      settings).target.slot_f1 for s in TREND_SEEDS]))
    return out


class TestCriterion7TrendReplication:
    """Direction-of-Table-1 audit on a noisy-alignment bundle with pinned
    seeds. Settings chosen so all configs train to competence: without
    that, the ordering of under-fit models is noise."""

    SEEDS = TREND_SEEDS

    def test_noise_helps(self, means):
        assert means["noise"] >= means["vanilla"]
        ok(f"+noise {means['noise']:.4f} >= vanilla {means['vanilla']:.4f} "
           f"(mean zero-shot slot F1, {len(self.SEEDS)} seeds)")

    def test_refinement_helps(self, means):
        assert means["refinement"] >= means["vanilla"]
        ok(f"+refinement {means['refinement']:.4f} >= vanilla "
           f"{means['vanilla']:.4f}")

    def test_combination_at_least_best_single_minus_one_point(self, means):
        best_single = max(means["noise"], means["refinement"])
        assert means["noise_refinement"] >= best_single - 0.01
        ok(f"+noise&refinement {means['noise_refinement']:.4f} >= "
           f"best single {best_single:.4f} - 1 F1 point")

    def test_lvm_head_at_least_mlp_head(self, means):
        assert (means["noise_refinement"]
                >= means["noise_refinement_mlp"])
        ok(f"LVM head {means['noise_refinement']:.4f} >= MLP head "
           f"{means['noise_refinement_mlp']:.4f} on the zero-shot split")


class TestCriterion8Determinism:
    def run_once(self, noise):
        spec = SyntheticSpec(embedding_dim=8, n_train=24, n_valid=12,
                             n_test=12, seed=31)
        bundle = Bundle.from_synthetic(generate_synthetic(spec))
        cfg = TrainConfig(max_epochs=3, batch_size=8, seed=2, noise=noise)
        res = run_cycle(bundle, cfg,
                        ExperimentSettings(hidden_size=8, latent_size=4))
        return res

    @pytest.mark.parametrize("noise", [False, True])
    def test_fixed_seed_runs_bit_identical(self, noise):
        a, b = self.run_once(noise), self.run_once(noise)
        assert a.report.to_jsonl() == b.report.to_jsonl()
        assert a.target.as_dict() == b.target.as_dict()
        for k in a.model.params:
            assert np.array_equal(a.model.params[k], b.model.params[k])
        ok(f"fixed-seed runs (noise={'on' if noise else 'off'}) reproduce "
           "loss curves, metrics, and parameters bit-exactly")

    def test_checkpoint_round_trip_bit_exact(self, tmp_path):
        model = self.run_once(True).model
        path = str(tmp_path / "ckpt.npz")
        model.save(path)
        again = Model.load(path)
        assert again.config == model.config
        for k in model.params:
            assert np.array_equal(again.params[k], model.params[k])
        ok("checkpoints round-trip bit-exactly through save/load")


class TestCriterion9InferenceMeanSubstitution:
    def test_predictions_invariant_to_rng_state(self):
        model = Model(tiny_config(head="lvm"),
                      rng=np.random.default_rng(3))
        emb = np.random.default_rng(4).standard_normal((5, 4))
        outputs = []
        for post_seed in (111, 222):
            np.random.seed(post_seed)  # perturb global legacy state
            _ = np.random.default_rng(post_seed).standard_normal(100)
            slots, intent, trace = model.predict(emb)
            outputs.append((slots, intent, trace.slot_probs.copy(),
                            trace.intent_probs.copy()))
        (s1, i1, sp1, ip1), (s2, i2, sp2, ip2) = outputs
        assert s1 == s2 and i1 == i2
        assert np.array_equal(sp1, sp2) and np.array_equal(ip1, ip2)
        ok("LVM inference uses the posterior mean: outputs invariant to "
           "rng state across two post-training seeds")
