import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kernelsmith.ngram_lm import (
    EmptyInputError,
    InsufficientDataError,
    TrigramStepModel,
    build_lm,
    insert_trigram_words,
    next_token_distribution,
    read_arpa,
    score_sequence,
    write_arpa,
)
from kernelsmith.textprep import BOS_ID, EOS_ID, UNK_ID, Sentence, Vocab

# Toy corpus used by the hand-computed oracle below.
TOY = ["a b c", "a b d", "e b c", "a b c"]

# Hand computation (exact fractions, done by direct application of the
# interpolated KN formulas to hand-counted tables):
#   raw trigram counts: BBa:3 Bab:3 abc:2 bcE:3 abd:1 bdE:1 BBe:1 Beb:1 ebc:1
#     -> n1=5, n2=1, D3 = 5/7
#   continuation bigrams N1+(.vw): Ba:1 ab:1 bc:2 cE:1 bd:1 dE:1 Be:1 eb:1
#     -> n1=7, n2=1, D2 = 7/9
#   continuation unigrams N1+(.w): a:1 b:2 c:1 d:1 e:1 E:2
#     -> n1=4, n2=2, D1 = 1/2, total 8, types 6, V_pred 7 (a-e, UNK, EOS)
#   p1(c)    = (1-1/2)/8 + (1/2)(6/8)(1/7)            = 13/112
#   p2(c|b)  = (2-7/9)/3 + (7/9)(2/3)(13/112)         = 101/216
#   p3(c|a,b)= (2-5/7)/3 + (5/7)(2/3)(101/216)        = 211/324
#   p3(d|a,b)= (1-5/7)/3 + (5/7)(2/3)(101/216 -> p2(d|b)=13/168) ... = 361/2268
#   p3(E|b,c): ctx bc tot 3, T 1: (3-5/7)/3 + (5/7)(1/3) p2(E|c)
#     p2(E|c): ctx c tot 1, T 1: (1-7/9)/1 + (7/9)(1)(p1(E)=25/112) = 2599/3024
P_C_AB = 211 / 324
P_D_AB = 361 / 2268
P_EOS_BC = 2599 / 3024


@pytest.fixture(scope="module")
def toy():
    corpus = [Sentence(tuple(s.split())) for s in TOY]
    vocab = Vocab.build(corpus)
    return corpus, vocab, build_lm(corpus, vocab)


@pytest.fixture(scope="module")
def random_corpus():
    from conftest import markov_corpus

    corpus = markov_corpus(350, seed=7)
    vocab = Vocab.build(corpus[:300])
    return corpus, vocab


class TestBuild:
    def test_hand_computed_trigrams(self, toy):
        _, vocab, lm = toy
        a, b, c, d = (vocab.id(t) for t in "abcd")
        assert math.exp(lm.cond_logprob(a, b, c)) == pytest.approx(P_C_AB, abs=1e-12)
        assert math.exp(lm.cond_logprob(a, b, d)) == pytest.approx(P_D_AB, abs=1e-12)
        assert math.exp(lm.cond_logprob(b, c, EOS_ID)) == pytest.approx(P_EOS_BC, abs=1e-12)

    def test_discounts(self, toy):
        _, _, lm = toy
        d1, d2, d3 = lm.discounts
        assert (d1, d2, d3) == pytest.approx((0.5, 7 / 9, 5 / 7))

    def test_normalization_random_contexts(self, toy):
        _, vocab, lm = toy
        rng = np.random.default_rng(1)
        ids = lm.predicted_ids()
        for _ in range(100):
            u, v = (int(x) for x in rng.integers(0, len(vocab), 2))
            total = sum(math.exp(lm.cond_logprob(u, v, w)) for w in ids)
            assert abs(total - 1.0) < 1e-9

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            build_lm([Sentence(("a", "b"))], Vocab.build([Sentence(("a", "b"))]))

    def test_probabilities_positive(self, toy):
        _, vocab, lm = toy
        a, b = vocab.id("a"), vocab.id("b")
        for w in lm.predicted_ids():
            p = math.exp(lm.cond_logprob(a, b, w))
            assert 0 < p <= 1

    def test_backoff_weights_positive(self, toy):
        _, _, lm = toy
        for table in lm.bow.values():
            for lb in table.values():
                assert math.exp(lb) > 0


class TestPruning:
    def test_zero_threshold_removes_nothing(self, random_corpus):
        corpus, vocab = random_corpus
        assert (
            build_lm(corpus, vocab, 0.0).ngram_count()
            == build_lm(corpus, vocab).ngram_count()
        )

    def test_default_threshold_size_and_normalization(self, random_corpus):
        corpus, vocab = random_corpus
        base = build_lm(corpus, vocab)
        pruned = build_lm(corpus, vocab, 1e-7)
        assert pruned.ngram_count() <= base.ngram_count()
        rng = np.random.default_rng(2)
        ids = pruned.predicted_ids()
        for _ in range(50):
            u, v = (int(x) for x in rng.integers(0, len(vocab), 2))
            total = sum(math.exp(pruned.cond_logprob(u, v, w)) for w in ids)
            assert abs(total - 1.0) < 1e-9

    def test_aggressive_pruning_shrinks(self, random_corpus):
        corpus, vocab = random_corpus
        base = build_lm(corpus, vocab)
        pruned = build_lm(corpus, vocab, 1e-4)
        assert pruned.ngram_count() < base.ngram_count()


class TestScore:
    def test_matches_hand_computation(self, toy):
        _, vocab, lm = toy
        a, b, c = (vocab.id(t) for t in "abc")
        expected = (
            lm.cond_logprob(BOS_ID, BOS_ID, a)
            + lm.cond_logprob(BOS_ID, a, b)
            + lm.cond_logprob(a, b, c)
            + lm.cond_logprob(b, c, EOS_ID)
        )
        assert score_sequence(lm, ["a", "b", "c"]) == pytest.approx(expected, abs=1e-12)

    def test_oov_maps_to_unk_and_is_finite(self, toy):
        _, _, lm = toy
        score = score_sequence(lm, ["a", "zzz", "c"])
        assert math.isfinite(score)

    def test_empty_raises(self, toy):
        _, _, lm = toy
        with pytest.raises(EmptyInputError):
            score_sequence(lm, [])

    def test_accepts_sentence(self, toy):
        _, _, lm = toy
        s = Sentence(("a", "b", "c"))
        assert score_sequence(lm, s) == score_sequence(lm, ["a", "b", "c"])

    def test_perplexity_beats_add_one_mle(self, random_corpus):
        # independent add-one trigram oracle on a held-out split
        corpus, vocab = random_corpus
        train, held = corpus[:300], corpus[300:]
        lm = build_lm(train, vocab)

        from collections import Counter

        c3, c2 = Counter(), Counter()
        ids = lambda s: [BOS_ID, BOS_ID] + vocab.ids(s.tokens) + [EOS_ID]
        for s in train:
            seq = ids(s)
            for i in range(2, len(seq)):
                c3[(seq[i - 2], seq[i - 1], seq[i])] += 1
                c2[(seq[i - 2], seq[i - 1])] += 1
        V = len(vocab) - 2  # no PAD/BOS emissions

        def addone_logp(seq):
            return sum(
                math.log(
                    (c3[(seq[i - 2], seq[i - 1], seq[i])] + 1)
                    / (c2[(seq[i - 2], seq[i - 1])] + V)
                )
                for i in range(2, len(seq))
            )

        n_tokens = sum(len(s) + 1 for s in held)
        kn = sum(score_sequence(lm, s) for s in held)
        mle = sum(addone_logp(ids(s)) for s in held)
        ppl_kn = math.exp(-kn / n_tokens)
        ppl_addone = math.exp(-mle / n_tokens)
        assert ppl_kn <= ppl_addone


class TestNextTokenDistribution:
    def test_sums_to_one_and_no_unk(self, toy):
        _, vocab, lm = toy
        rng = np.random.default_rng(3)
        for _ in range(20):
            ctx = tuple(int(x) for x in rng.integers(0, len(vocab), 2))
            dist = next_token_distribution(lm, ctx)
            assert abs(dist.sum() - 1.0) < 1e-9
            assert dist[UNK_ID] == 0.0

    def test_unseen_context_backs_off_to_bigram(self, toy):
        _, vocab, lm = toy
        d, b = vocab.id("d"), vocab.id("b")
        # (d, b) has no trigram entries; distribution must follow p(.|b)
        dist = next_token_distribution(lm, (d, b))
        c = vocab.id("c")
        direct = math.exp(lm.cond_logprob(d, b, c))
        assert dist[c] == pytest.approx(direct / (1 - math.exp(lm.cond_logprob(d, b, UNK_ID))))

    def test_seen_context_matches_hand_value(self, toy):
        _, vocab, lm = toy
        a, b, c = (vocab.id(t) for t in "abc")
        dist = next_token_distribution(lm, (a, b))
        unk = math.exp(lm.cond_logprob(a, b, UNK_ID))
        assert dist[c] == pytest.approx(P_C_AB / (1 - unk), abs=1e-12)


class TestArpa:
    def test_round_trip_exact(self, toy, tmp_path):
        _, vocab, lm = toy
        path = str(tmp_path / "toy.arpa")
        write_arpa(lm, path)
        lm2 = read_arpa(path)
        for n in (1, 2, 3):
            assert len(lm2.logp[n]) == len(lm.logp[n])
            for key, lp in lm.logp[n].items():
                toks = tuple(vocab.token(i) for i in key)
                key2 = tuple(lm2.vocab.id(t) for t in toks)
                assert abs(lp - lm2.logp[n][key2]) < 1e-9
        for n in (1, 2):
            for key, bw in lm.bow[n].items():
                toks = tuple(vocab.token(i) for i in key)
                key2 = tuple(lm2.vocab.id(t) for t in toks)
                assert abs(bw - lm2.bow[n].get(key2, 0.0)) < 1e-9

    def test_round_trip_queries_identical(self, toy, tmp_path):
        _, vocab, lm = toy
        path = str(tmp_path / "toy.arpa")
        write_arpa(lm, path)
        lm2 = read_arpa(path, vocab=vocab)
        rng = np.random.default_rng(4)
        for _ in range(50):
            u, v, w = (int(x) for x in rng.integers(0, len(vocab), 3))
            if w in (0, BOS_ID):
                continue
            assert lm.cond_logprob(u, v, w) == pytest.approx(
                lm2.cond_logprob(u, v, w), abs=1e-9
            )


class TestInsertBaseline:
    def test_rate_one_is_identity(self, toy):
        _, _, lm = toy
        s = Sentence(("a", "b", "c"))
        assert insert_trigram_words(lm, s, 1.0, seed=0).tokens == s.tokens

    def test_expected_insertion_count(self, toy):
        _, _, lm = toy
        s = Sentence(tuple("a b c a b d a b c e".split()))
        out = insert_trigram_words(lm, s, 1.65, seed=1)
        assert len(out) == 17

    def test_deterministic(self, toy):
        _, _, lm = toy
        s = Sentence(tuple("a b c a b d".split()))
        one = insert_trigram_words(lm, s, 1.5, seed=42)
        two = insert_trigram_words(lm, s, 1.5, seed=42)
        assert one.tokens == two.tokens

    def test_is_supersequence(self, toy):
        _, _, lm = toy
        s = Sentence(tuple("a b c a b d".split()))
        out = insert_trigram_words(lm, s, 1.5, seed=5)
        it = iter(out.tokens)
        assert all(t in it for t in s.tokens)


class TestStepModel:
    def test_contract(self, toy):
        _, vocab, lm = toy
        model = TrigramStepModel(lm)
        state = model.start(vocab.ids(["a", "b"]))
        logp, state = model.step(state, BOS_ID)
        probs = np.exp(logp[np.isfinite(logp)])
        assert abs(probs.sum() - 1.0) < 1e-9
        assert logp[UNK_ID] == -np.inf
        # first-step context is (BOS, BOS)
        expected = next_token_distribution(lm, (BOS_ID, BOS_ID))
        a = vocab.id("a")
        assert math.exp(logp[a]) == pytest.approx(expected[a])


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.lists(st.sampled_from("abcdef"), min_size=1, max_size=6),
        min_size=2,
        max_size=12,
    )
)
def test_normalization_property_random_corpora(sent_tokens):
    corpus = [Sentence(tuple(toks)) for toks in sent_tokens]
    if sum(len(s) for s in corpus) < 3:
        return
    vocab = Vocab.build(corpus)
    lm = build_lm(corpus, vocab)
    ids = lm.predicted_ids()
    rng = np.random.default_rng(0)
    for _ in range(10):
        u, v = (int(x) for x in rng.integers(0, len(vocab), 2))
        total = sum(math.exp(lm.cond_logprob(u, v, w)) for w in ids)
        assert abs(total - 1.0) < 1e-9
