import numpy as np
import pytest

from xlnlu.corpus import repair_bio
from xlnlu.errors import ConfigError
from xlnlu.experiment import read_bundle, write_bundle
from xlnlu.synthetic import (Element, SyntheticSpec, Template,
                             generate_synthetic)


def small_spec(**kw):
    base = dict(n_train=20, n_valid=8, n_test=8, seed=3)
    base.update(kw)
    return SyntheticSpec(**base)


class TestSpecValidation:
    def test_empty_template_rejected(self):
        with pytest.raises(ConfigError, match="emits no tokens"):
            small_spec(templates=[Template("x", [])])

    def test_unknown_pool_rejected(self):
        with pytest.raises(ConfigError, match="unknown pool"):
            small_spec(templates=[Template("x", [Element("nope")])])

    def test_json_round_trip_rejects_unknown_keys(self):
        spec = small_spec()
        again = SyntheticSpec.from_json(spec.to_json())
        assert again == spec
        with pytest.raises(ConfigError, match="unknown"):
            SyntheticSpec.from_json('{"bogus_key": 1}')


class TestGeneration:
    def test_noiseless_planting_inverts_exactly(self):
        b = generate_synthetic(small_spec(alignment_noise=0.0,
                                          rotation_angle=0.9))
        recovered = b.space_b.vectors @ b.gold_mapping.w.T
        assert np.abs(recovered - b.space_a.vectors).max() <= 1e-9

    def test_seed_determinism(self):
        b1 = generate_synthetic(small_spec())
        b2 = generate_synthetic(small_spec())
        assert np.array_equal(b1.space_a.vectors, b2.space_a.vectors)
        assert np.array_equal(b1.space_b.vectors, b2.space_b.vectors)
        for split in ("train", "valid", "test"):
            assert b1.corpus_a[split] == b2.corpus_a[split]
            assert b1.corpus_b[split] == b2.corpus_b[split]

    def test_cipher_preserves_labels_exactly(self):
        b = generate_synthetic(small_spec())
        for split in ("train", "valid", "test"):
            for ua, ub in zip(b.corpus_a[split], b.corpus_b[split]):
                assert ua.slots == ub.slots
                assert ua.intent == ub.intent
                assert len(ua.tokens) == len(ub.tokens)

    def test_lexicon_is_bijection_covering_vocab(self):
        b = generate_synthetic(small_spec())
        srcs = [a for a, _ in b.lexicon]
        tgts = [t for _, t in b.lexicon]
        assert len(set(srcs)) == len(srcs) == len(b.space_a.vocab)
        assert len(set(tgts)) == len(tgts)
        assert set(tgts) == set(b.space_b.vocab)

    def test_emitted_bio_is_well_formed(self):
        b = generate_synthetic(small_spec(n_train=200))
        for u in b.corpus_a["train"]:
            fixed, n = repair_bio(u.slots)
            assert n == 0 and fixed == u.slots

    def test_corpus_words_are_embedded_or_numeric(self):
        b = generate_synthetic(small_spec())
        for u in b.corpus_a["train"]:
            for tok in u.tokens:
                in_vocab = tok in b.space_a.index
                assert in_vocab or tok.isdigit()


class TestBundleIO:
    def test_round_trip_via_disk(self, tmp_path):
        sb = generate_synthetic(small_spec())
        write_bundle(sb, str(tmp_path))
        bundle = read_bundle(str(tmp_path))
        assert bundle.src_train == sb.corpus_a["train"]
        assert bundle.tgt_test == sb.corpus_b["test"]
        assert np.array_equal(bundle.space_src.vectors, sb.space_a.vectors)
        assert np.array_equal(bundle.space_tgt.vectors, sb.space_b.vectors)
        assert bundle.lexicon == sb.lexicon
        assert bundle.seed_words == sb.seed_words

    def test_byte_identical_for_same_seed(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d in (d1, d2):
            write_bundle(generate_synthetic(small_spec()), str(d))
        for f in d1.iterdir():
            assert f.read_bytes() == (d2 / f.name).read_bytes()

    def test_noise_changes_only_embeddings(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        write_bundle(generate_synthetic(small_spec(alignment_noise=0.0)),
                     str(d1))
        write_bundle(generate_synthetic(small_spec(alignment_noise=0.05)),
                     str(d2))
        differing = {f.name for f in d1.iterdir()
                     if f.read_bytes() != (d2 / f.name).read_bytes()}
        assert differing == {"embeddings.tgt.vec", "spec.json"}
