import pytest
from hypothesis import given, strategies as st

from kernelsmith.textprep import (
    EmptySentenceError,
    Sentence,
    Vocab,
    filter_corpus,
    normalize_sentence,
    segment_text,
    stopword_ratio,
    tokenize,
)


class TestNormalize:
    def test_quotes_digits_punct(self):
        s = normalize_sentence('He said "Hi" in 1985.')
        assert s.tokens == ("he", "said", "hi", "in", "####", ".")

    def test_already_normal(self):
        assert normalize_sentence("hello").tokens == ("hello",)

    def test_truncation_at_50(self):
        raw = " ".join(f"w{i}" for i in range(60))
        s = normalize_sentence(raw)
        assert len(s) == 50
        assert s.tokens[-1] == "w##"  # w49 with digits masked

    def test_contraction_apostrophe_removed_not_split(self):
        assert tokenize("don't") == ["dont"]

    def test_empty_raises(self):
        with pytest.raises(EmptySentenceError):
            normalize_sentence('"“”"')

    def test_edge_punct_detached(self):
        assert tokenize("(hello), world!") == ["(", "hello", ")", ",", "world", "!"]

    def test_idempotent_on_samples(self):
        for raw in [
            'He said "Hi" in 1985.',
            "well-known... facts?! (see fig. 3)",
            "I don't -- I can't.",
        ]:
            once = normalize_sentence(raw)
            twice = normalize_sentence(" ".join(once.tokens))
            assert once.tokens == twice.tokens

    @given(st.text(min_size=1, max_size=200))
    def test_idempotent_property(self, raw):
        try:
            once = normalize_sentence(raw)
        except EmptySentenceError:
            return
        assert normalize_sentence(" ".join(once.tokens)).tokens == once.tokens

    @given(st.text(min_size=1, max_size=200))
    def test_no_quotes_or_digits_property(self, raw):
        import re

        try:
            s = normalize_sentence(raw)
        except EmptySentenceError:
            return
        for t in s.tokens:
            assert t
            assert not re.search(r"[\"'“”‘’]", t)
            assert not re.search(r"[0-9]", t)
            assert not re.search(r"\s", t)


class TestSegment:
    def test_two_sentences(self):
        out = segment_text("A ran. B walked!")
        assert len(out) == 2
        assert out[0].tokens == ("a", "ran", ".")
        assert out[1].tokens == ("b", "walked", "!")

    def test_abbreviation_not_split(self):
        assert len(segment_text("Mr. Smith ran.")) == 1

    def test_initials_not_split(self):
        assert len(segment_text("J. K. Rowling wrote it.")) == 1

    def test_empty(self):
        assert segment_text("") == []

    def test_unsplittable_single(self):
        assert len(segment_text("no terminal punctuation here")) == 1

    def test_lowercase_continuation_not_split(self):
        assert len(segment_text("it was 3 p.m. when he left.")) == 1

    @given(
        st.lists(
            st.lists(
                st.sampled_from("the a dog cat ran sat and it was big".split()),
                min_size=1,
                max_size=8,
            ),
            min_size=1,
            max_size=5,
        )
    )
    def test_token_multiset_preserved(self, sents):
        raw = " ".join(" ".join(words).capitalize() + "." for words in sents)
        segs = segment_text(raw)
        merged = [t for s in segs for t in s.tokens]
        assert sorted(merged) == sorted(tokenize(raw))


class TestFilter:
    def test_ratio_in_bounds_kept(self):
        s = Sentence(("the", "dog", "ran", "to", "him"))
        assert 0.1 <= stopword_ratio(s) <= 0.8
        assert filter_corpus([s], 1, 50, (0.1, 0.8)) == [s]

    def test_zero_stopwords_dropped(self):
        s = Sentence(("perro", "gato", "corre"))
        assert filter_corpus([s], 1, 50, (0.1, 0.9)) == []

    def test_too_long_dropped(self):
        s = Sentence(tuple(["the"] * 51))
        assert filter_corpus([s], 1, 50, (0.0, 1.0)) == []

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            filter_corpus([], 10, 5, (0.1, 0.9))


class TestVocab:
    def test_bijection_and_reserved(self):
        v = Vocab.build([Sentence(("a", "b", "a"))])
        assert v.tokens[:4] == ["<pad>", "<unk>", "<s>", "</s>"]
        for i, t in enumerate(v.tokens):
            assert v.id(t) == i
            assert v.token(i) == t

    def test_unk_for_oov(self):
        v = Vocab.build([Sentence(("a",))])
        assert v.id("zzz") == 1

    def test_stopword_flags(self):
        v = Vocab.build([Sentence(("the", "dragon"))])
        assert v.is_stopword(v.id("the"))
        assert not v.is_stopword(v.id("dragon"))

    def test_roundtrip(self):
        v = Vocab.build([Sentence(("b", "a", "c"))])
        v2 = Vocab.from_dict(v.to_dict())
        assert v2.tokens == v.tokens

    def test_max_size(self):
        v = Vocab.build([Sentence(("a", "b", "c", "a"))], max_size=6)
        assert len(v) == 6
