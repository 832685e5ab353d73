import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trialink.features import (
    ConceptLexicon,
    DocumentFeatures,
    VocabularyError,
    build_vocabulary,
    extract_concept_features,
    extract_term_features,
    project,
    tokenize,
)


class TestTokenize:
    def test_punctuation_becomes_separator(self):
        assert tokenize("Double-Blind, Placebo-Controlled") == [
            "double", "blind", "placebo", "controlled",
        ]

    def test_empty(self):
        assert tokenize("") == []

    def test_digits_retained(self):
        assert tokenize("Phase 3 trial of 20mg/day") == [
            "phase", "3", "trial", "of", "20mg", "day",
        ]

    def test_underscore_is_punctuation(self):
        assert tokenize("alpha_beta") == ["alpha", "beta"]

    def test_accents_preserved(self):
        assert tokenize("Étude contrôlée") == ["étude", "contrôlée"]

    @given(st.text(max_size=200))
    def test_idempotent_on_own_output(self, text):
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens

    @given(st.text(max_size=200))
    def test_tokens_have_no_punctuation(self, text):
        for token in tokenize(text):
            assert token
            assert all(c.isalnum() for c in token)


class TestTermFeatures:
    def test_counts_across_fields(self):
        feats = extract_term_features("d1", ["aspirin trial", "aspirin"])
        assert feats.counts == {"aspirin": 2, "trial": 1}

    def test_all_punctuation_field(self):
        assert extract_term_features("d1", ["!!!"]).counts == {}

    def test_fixture_hand_count(self):
        fields = [
            "A Phase 3 Trial of Aspirin",
            "aspirin, 100mg/day",
            "Headache; headache",
        ]
        feats = extract_term_features("d1", fields)
        assert feats.counts == {
            "a": 1, "phase": 1, "3": 1, "trial": 1, "of": 1,
            "aspirin": 2, "100mg": 1, "day": 1, "headache": 2,
        }

    def test_field_order_irrelevant(self):
        fields = ["alpha beta", "beta gamma", "gamma delta"]
        a = extract_term_features("d", fields)
        b = extract_term_features("d", list(reversed(fields)))
        assert a.counts == b.counts


@pytest.fixture
def lexicon():
    return ConceptLexicon.from_pairs(
        [
            ("myocardial infarction", "C0027051"),
            ("infarction", "C9999999"),
            ("acute myocardial infarction", "C0155626"),
            ("aspirin", "C0004057"),
            ("heart", "C0018787"),
        ]
    )


class TestConceptTagger:
    def test_longest_match_wins(self, lexicon):
        assert lexicon.tag(["myocardial", "infarction"]) == ["C0027051"]

    def test_no_hits(self, lexicon):
        assert extract_concept_features("d", ["placebo group outcomes"], lexicon).counts == {}

    def test_hand_traced_sentence(self, lexicon):
        # acute myocardial infarction -> C0155626 (3-token match), then
        # aspirin -> C0004057, heart -> C0018787, infarction alone -> C9999999.
        text = "Acute myocardial infarction treated with aspirin; heart infarction."
        feats = extract_concept_features("d", [text], lexicon)
        assert feats.counts == {
            "C0155626": 1, "C0004057": 1, "C0018787": 1, "C9999999": 1,
        }

    def test_counts_aggregate_across_fields(self, lexicon):
        feats = extract_concept_features("d", ["aspirin", "aspirin heart"], lexicon)
        assert feats.counts == {"C0004057": 2, "C0018787": 1}

    def test_matches_never_overlap(self, lexicon):
        rng = random.Random(1)
        words = ["myocardial", "infarction", "acute", "aspirin", "heart", "with", "x1"]
        for _ in range(200):
            tokens = [rng.choice(words) for _ in range(rng.randrange(0, 30))]
            consumed = 0
            i = 0
            while i < len(tokens):
                for length in range(min(lexicon.max_phrase_len, len(tokens) - i), 0, -1):
                    if " ".join(tokens[i : i + length]) in lexicon.entries:
                        consumed += length
                        i += length
                        break
                else:
                    consumed += 1
                    i += 1
            assert consumed == len(tokens)

    def test_field_order_irrelevant(self, lexicon):
        fields = ["aspirin heart", "myocardial infarction", "heart"]
        a = extract_concept_features("d", fields, lexicon)
        b = extract_concept_features("d", list(reversed(fields)), lexicon)
        assert a.counts == b.counts

    def test_multi_mapping_keeps_smallest_id(self, caplog):
        lex = ConceptLexicon.from_pairs([("fever", "C0000200"), ("fever", "C0000100")])
        assert lex.entries == {"fever": "C0000100"}

    def test_tsv_loader(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text(
            "# comment line\n"
            "Myocardial Infarction\tC0027051\n"
            "aspirin\tC0004057\n",
            encoding="utf-8",
        )
        lex = ConceptLexicon.from_tsv(path)
        assert lex.entries == {"myocardial infarction": "C0027051", "aspirin": "C0004057"}

    def test_tsv_bad_line(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("no tab here\n", encoding="utf-8")
        with pytest.raises(ValueError):
            ConceptLexicon.from_tsv(path)


def _doc(doc_id, **counts):
    return DocumentFeatures(doc_id, counts)


class TestVocabulary:
    def test_below_threshold_in_one_corpus_excluded(self):
        regs = [_doc("r1", alpha=2, anchor=2)]
        arts = [_doc("a1", alpha=1, anchor=1), _doc("a2", beta=2, anchor=1)]
        vocab = build_vocabulary(regs, arts, "term", min_count=2)
        # alpha: 2 in regs but only 1 in articles; beta: 0 in regs.
        assert vocab.keys == ("anchor",)

    def test_boundary_two_in_each(self):
        regs = [_doc("r1", alpha=2)]
        arts = [_doc("a1", alpha=1), _doc("a2", alpha=1)]
        vocab = build_vocabulary(regs, arts, "term")
        assert vocab.keys == ("alpha",)
        assert vocab.reg_occurrence == (2,)
        assert vocab.art_occurrence == (2,)
        assert vocab.art_doc_frequency == (2,)
        assert vocab.n_articles == 2

    def test_six_document_toy_corpora(self):
        regs = [
            _doc("r1", heart=2, trial=1),
            _doc("r2", heart=1, lung=1),
            _doc("r3", trial=1, lung=1),
        ]
        arts = [
            _doc("a1", heart=1, trial=2, rare=1),
            _doc("a2", heart=2, lung=1),
            _doc("a3", lung=1, rare=1),
        ]
        vocab = build_vocabulary(regs, arts, "term")
        # heart: reg 3 / art 3; trial: reg 2 / art 2; lung: reg 2 / art 2;
        # rare: reg 0 -> out.
        assert vocab.keys == ("heart", "lung", "trial")
        assert vocab.art_doc_frequency == (2, 2, 1)
        assert vocab.n_articles == 3

    def test_empty_vocabulary_is_error(self):
        with pytest.raises(VocabularyError):
            build_vocabulary([_doc("r", a=1)], [_doc("x", b=1)], "term")

    def test_document_frequency_pruning_mode(self):
        # alpha appears 3 times but only in one registration document.
        regs = [_doc("r1", alpha=3), _doc("r2", beta=1), _doc("r3", beta=1)]
        arts = [_doc("a1", alpha=1, beta=1), _doc("a2", alpha=1, beta=1)]
        occurrence = build_vocabulary(regs, arts, "term", pruning="occurrence")
        df_based = build_vocabulary(regs, arts, "term", pruning="document_frequency")
        assert occurrence.keys == ("alpha", "beta")
        assert df_based.keys == ("beta",)

    def test_pruning_rule_recount_randomized(self):
        rng = random.Random(42)
        for _ in range(20):
            words = [f"t{i}" for i in range(30)]
            regs = [
                _doc(f"r{j}", **{w: rng.randrange(1, 4) for w in rng.sample(words, rng.randrange(1, 10))})
                for j in range(8)
            ]
            arts = [
                _doc(f"a{j}", **{w: rng.randrange(1, 4) for w in rng.sample(words, rng.randrange(1, 10))})
                for j in range(8)
            ]
            try:
                vocab = build_vocabulary(regs, arts, "term")
            except VocabularyError:
                continue
            reg_total = {}
            art_total = {}
            for d in regs:
                for k, v in d.counts.items():
                    reg_total[k] = reg_total.get(k, 0) + v
            for d in arts:
                for k, v in d.counts.items():
                    art_total[k] = art_total.get(k, 0) + v
            included = set(vocab.keys)
            for word in words:
                qualifies = reg_total.get(word, 0) >= 2 and art_total.get(word, 0) >= 2
                assert (word in included) == qualifies
            for i, key in enumerate(vocab.keys):
                df = sum(1 for d in arts if key in d.counts)
                assert vocab.art_doc_frequency[i] == df
                assert 1 <= df <= vocab.n_articles


class TestProject:
    def _vocab(self):
        regs = [_doc("r1", a=2, b=2)]
        arts = [_doc("a1", a=2, b=2)]
        return build_vocabulary(regs, arts, "term")

    def test_drops_out_of_vocabulary(self):
        vocab = self._vocab()
        projected = project(_doc("d", a=3, z=1), vocab)
        assert projected == {vocab.index_of["a"]: 3}

    def test_all_oov(self):
        assert project(_doc("d", z=1), self._vocab()) == {}

    def test_counts_unchanged(self):
        vocab = self._vocab()
        projected = project(_doc("d", a=3, b=1), vocab)
        assert projected == {vocab.index_of["a"]: 3, vocab.index_of["b"]: 1}

    def test_projected_features_always_in_vocab(self, small_corpus):
        from trialink.pipeline import LinkageEngine

        engine = LinkageEngine(
            small_corpus.registrations, small_corpus.articles, lexicon=small_corpus.lexicon
        )
        for rep in ("term", "concept"):
            vocab = engine.vocabulary(rep)
            reg_feats, art_feats = engine.features(rep)
            for feats in list(reg_feats) + list(art_feats):
                for idx in project(feats, vocab):
                    assert 0 <= idx < len(vocab)
