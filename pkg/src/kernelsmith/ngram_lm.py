"""Interpolated Kneser-Ney trigram language model.

Estimation (natural log throughout):

  order 3   p(w|u,v) = max(c(uvw)-D3,0)/c(uv.) + D3*T(uv)/c(uv.) * p(w|v)
  order 2   continuation counts N1+(.vw) replace raw counts
  order 1   continuation counts N1+(.w), interpolated with uniform 1/V
            so every vocabulary token keeps nonzero mass

One discount per order, D = n1/(n1+2*n2) from the count-of-counts of the
counts used at that order (guarded to 0.5 on degenerate corpora where
n1 = 0). Sentences are padded with two BOS and one EOS; BOS and PAD are
context-only symbols and never receive probability mass.

The model is stored in backoff form (per-ngram log prob + per-context
backoff weight), which is what the ARPA text format serializes. Pruning
removes stored n-grams whose removal changes the per-token training
log-likelihood by less than the threshold (entropy pruning with empirical
count weights); backoff weights are recomputed afterwards so conditional
distributions still sum to one.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .textprep import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Sentence, Vocab

PLACEHOLDER_LOG10 = -99.0  # ARPA convention for context-only entries
_LN10 = math.log(10.0)


class InsufficientDataError(ValueError):
    """Corpus too small to estimate a trigram model."""


class EmptyInputError(ValueError):
    """Scoring was asked for an empty token sequence."""


def _discount(counts) -> float:
    """Absolute discount n1/(n1+2*n2); 0.5 when the corpus is too degenerate."""
    n1 = sum(1 for c in counts if c == 1)
    n2 = sum(1 for c in counts if c == 2)
    if n1 == 0:
        return 0.5
    return n1 / (n1 + 2 * n2)


@dataclass
class TrigramLM:
    """Backoff-form trigram model over a fixed vocabulary.

    logp[n] maps n-gram id tuples to ln prob; bow[n] maps context id tuples
    to ln backoff weight. `placeholders` are context-only entries (BOS and
    the BOS BOS bigram) whose stored probability is never a real estimate.
    """

    vocab: Vocab
    logp: dict[int, dict[tuple[int, ...], float]]
    bow: dict[int, dict[tuple[int, ...], float]]
    placeholders: set[tuple[int, ...]] = field(default_factory=set)
    discounts: tuple[float, float, float] = (0.0, 0.0, 0.0)
    prune_threshold: float = 0.0

    def predicted_ids(self) -> list[int]:
        """Ids that may carry probability mass (everything but PAD/BOS)."""
        return [i for i in range(len(self.vocab)) if i not in (PAD_ID, BOS_ID)]

    def cond_logprob(self, u: int, v: int, w: int) -> float:
        """ln p(w | u, v) via backoff."""
        p3 = self.logp[3].get((u, v, w))
        if p3 is not None:
            return p3
        b2 = self.bow[2].get((u, v), 0.0)
        if (v, w) in self.logp[2] and (v, w) not in self.placeholders:
            return b2 + self.logp[2][(v, w)]
        b1 = self.bow[1].get((v,), 0.0)
        return b2 + b1 + self.logp[1][(w,)]

    def ngram_count(self) -> int:
        return sum(len(t) for t in self.logp.values())


def _count_tables(corpus: list[Sentence], vocab: Vocab):
    """Raw unigram/bigram/trigram counts over BOS BOS ... EOS padded ids.

    BOS and PAD never count as predicted tokens (no n-gram ends in them).
    """
    c1 = Counter()
    c2 = Counter()
    c3 = Counter()
    for s in corpus:
        seq = [BOS_ID, BOS_ID] + vocab.ids(s.tokens) + [EOS_ID]
        for i, w in enumerate(seq):
            c1[w] += 1
            if w in (BOS_ID, PAD_ID):
                continue
            if i >= 1:
                c2[(seq[i - 1], w)] += 1
            if i >= 2:
                c3[(seq[i - 2], seq[i - 1], w)] += 1
    return c1, c2, c3


def build_lm(corpus: list[Sentence], vocab: Vocab, prune_threshold: float = 0.0) -> TrigramLM:
    """Estimate an interpolated KN trigram model, then prune.

    prune_threshold is the per-token training log-likelihood change below
    which a stored n-gram is discarded (0 disables pruning).
    """
    if prune_threshold < 0:
        raise ValueError("prune_threshold must be >= 0")
    total = sum(len(s) for s in corpus)
    if total < 3:
        raise InsufficientDataError(f"corpus has {total} tokens, need at least 3")

    c1raw, c2raw, c3 = _count_tables(corpus, vocab)

    # continuation counts
    cc2 = Counter()
    for (u, v, w) in c3:
        cc2[(v, w)] += 1
    cc1 = Counter()
    for (v, w) in c2raw:
        cc1[w] += 1

    d3 = _discount(c3.values())
    d2 = _discount(cc2.values())
    d1 = _discount(cc1.values())

    pred = [i for i in range(len(vocab)) if i not in (PAD_ID, BOS_ID)]
    n_pred = len(pred)

    # unigrams: continuation estimate interpolated with uniform
    s1 = sum(cc1.values())
    t1 = len(cc1)
    gamma1 = d1 * t1 / s1
    uni = {}
    for w in pred:
        p = max(cc1.get(w, 0) - d1, 0.0) / s1 + gamma1 / n_pred
        uni[(w,)] = math.log(p)

    # bigrams from continuation counts, grouped by context
    succ2: dict[int, list[tuple[int, int]]] = {}
    for (v, w), c in cc2.items():
        succ2.setdefault(v, []).append((w, c))
    bi = {}
    bow1 = {}
    for v, items in succ2.items():
        tot = sum(c for _, c in items)
        gamma = d2 * len(items) / tot
        bow1[(v,)] = math.log(gamma)
        for w, c in items:
            p = max(c - d2, 0.0) / tot + gamma * math.exp(uni[(w,)])
            bi[(v, w)] = math.log(p)

    # trigrams from raw counts, grouped by context
    succ3: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for (u, v, w), c in c3.items():
        succ3.setdefault((u, v), []).append((w, c))
    tri = {}
    bow2 = {}
    placeholders: set[tuple[int, ...]] = {(BOS_ID,)}
    for (u, v), items in succ3.items():
        tot = sum(c for _, c in items)
        gamma = d3 * len(items) / tot
        bow2[(u, v)] = math.log(gamma)
        for w, c in items:
            p = max(c - d3, 0.0) / tot + gamma * math.exp(bi[(v, w)])
            tri[(u, v, w)] = math.log(p)

    # context-only bigram entries (BOS BOS and any other context without
    # continuation support) so their backoff weights survive ARPA round trips
    uni[(BOS_ID,)] = PLACEHOLDER_LOG10 * _LN10
    for ctx in bow2:
        if ctx not in bi:
            bi[ctx] = PLACEHOLDER_LOG10 * _LN10
            placeholders.add(ctx)

    lm = TrigramLM(
        vocab=vocab,
        logp={1: uni, 2: bi, 3: tri},
        bow={1: bow1, 2: bow2},
        placeholders=placeholders,
        discounts=(d1, d2, d3),
        prune_threshold=prune_threshold,
    )
    if prune_threshold > 0:
        _prune(lm, c2raw, c3, prune_threshold)
    return lm


def _prune(lm: TrigramLM, c2raw: Counter, c3: Counter, threshold: float) -> None:
    """Entropy-prune stored 3-grams then 2-grams, in place.

    The score of a candidate is the empirical-count-weighted change in
    training log-likelihood caused by routing the n-gram through backoff,
    normalized per predicted token. Candidates are scored against the
    unpruned model (one pass per order); cross-order ripple through
    recomputed backoff weights is ignored, as is standard. Entries that
    serve as contexts of surviving higher-order n-grams are kept.
    """
    n_events = sum(c3.values())
    tri, bi, uni = lm.logp[3], lm.logp[2], lm.logp[1]
    bow2, bow1 = lm.bow[2], lm.bow[1]

    # order 3
    by_ctx: dict[tuple[int, int], list[int]] = {}
    for (u, v, w) in tri:
        by_ctx.setdefault((u, v), []).append(w)
    def p2_backoff(v: int, w: int) -> float:
        if (v, w) in bi and (v, w) not in lm.placeholders:
            return math.exp(bi[(v, w)])
        return math.exp(bow1.get((v,), 0.0) + uni[(w,)])

    doomed3 = []
    for ctx, words in by_ctx.items():
        p_stored = {w: math.exp(tri[ctx + (w,)]) for w in words}
        lower = {w: p2_backoff(ctx[1], w) for w in words}
        sum_p = sum(p_stored.values())
        sum_lower = sum(lower.values())
        for w in words:
            num = 1.0 - (sum_p - p_stored[w])
            den = 1.0 - (sum_lower - lower[w])
            if abs(den) < 1e-12:
                continue
            new_lp = math.log(num / den) + math.log(lower[w])
            delta = c3[ctx + (w,)] * (new_lp - tri[ctx + (w,)])
            if abs(delta) / n_events < threshold:
                doomed3.append(ctx + (w,))
    for key in doomed3:
        del tri[key]

    # order 2: keep contexts of surviving trigrams and placeholders
    needed = {(u, v) for (u, v, _) in tri} | lm.placeholders
    by_v: dict[int, list[int]] = {}
    for (v, w) in bi:
        if (v, w) not in lm.placeholders:
            by_v.setdefault(v, []).append(w)
    doomed2 = []
    for v, words in by_v.items():
        p_stored = {w: math.exp(bi[(v, w)]) for w in words}
        lower = {w: math.exp(uni[(w,)]) for w in words}
        sum_p = sum(p_stored.values())
        sum_lower = sum(lower.values())
        for w in words:
            if (v, w) in needed:
                continue
            num = 1.0 - (sum_p - p_stored[w])
            den = 1.0 - (sum_lower - lower[w])
            if abs(den) < 1e-12:
                continue
            new_lp = math.log(num / den) + uni[(w,)]
            delta = c2raw.get((v, w), 0) * (new_lp - bi[(v, w)])
            if abs(delta) / n_events < threshold:
                doomed2.append((v, w))
    for key in doomed2:
        del bi[key]

    _recompute_bows(lm)


def _recompute_bows(lm: TrigramLM) -> None:
    """Rebuild backoff weights from leftover probability mass, bottom-up."""
    tri, bi, uni = lm.logp[3], lm.logp[2], lm.logp[1]

    by_v: dict[int, list[int]] = {}
    for (v, w) in bi:
        if (v, w) not in lm.placeholders:
            by_v.setdefault(v, []).append(w)
    new_bow1 = {}
    for v, words in by_v.items():
        num = 1.0 - sum(math.exp(bi[(v, w)]) for w in words)
        den = 1.0 - sum(math.exp(uni[(w,)]) for w in words)
        new_bow1[(v,)] = 0.0 if abs(den) < 1e-12 else math.log(num / den)
    lm.bow[1] = new_bow1

    def p2(v: int, w: int) -> float:
        if (v, w) in bi and (v, w) not in lm.placeholders:
            return math.exp(bi[(v, w)])
        return math.exp(new_bow1.get((v,), 0.0) + uni[(w,)])

    by_ctx: dict[tuple[int, int], list[int]] = {}
    for (u, v, w) in tri:
        by_ctx.setdefault((u, v), []).append(w)
    new_bow2 = {}
    for ctx, words in by_ctx.items():
        num = 1.0 - sum(math.exp(tri[ctx + (w,)]) for w in words)
        den = 1.0 - sum(p2(ctx[1], w) for w in words)
        new_bow2[ctx] = 0.0 if abs(den) < 1e-12 else math.log(num / den)
    lm.bow[2] = new_bow2


# --- scoring and sampling ----------------------------------------------------


def score_sequence(lm: TrigramLM, tokens) -> float:
    """ln p of a token sequence, BOS BOS prefixed and EOS suffixed.

    Accepts a Sentence, surface strings, or token ids; OOV maps to UNK.
    """
    if isinstance(tokens, Sentence):
        tokens = tokens.tokens
    if len(tokens) == 0:
        raise EmptyInputError("cannot score an empty sequence")
    ids = [t if isinstance(t, int) else lm.vocab.id(t) for t in tokens]
    seq = [BOS_ID, BOS_ID] + ids + [EOS_ID]
    return sum(lm.cond_logprob(seq[i - 2], seq[i - 1], seq[i]) for i in range(2, len(seq)))


def next_token_distribution(lm: TrigramLM, context: tuple[int, int]) -> np.ndarray:
    """p(. | context) over the full vocabulary, with UNK mass redistributed.

    UNK is never emitted, so its probability is zeroed and the vector
    renormalized; PAD and BOS are structurally zero.
    """
    u, v = context
    probs = np.zeros(len(lm.vocab))
    for w in lm.predicted_ids():
        probs[w] = math.exp(lm.cond_logprob(u, v, w))
    probs[UNK_ID] = 0.0
    probs /= probs.sum()
    return probs


def insert_trigram_words(
    lm: TrigramLM, sentence: Sentence, expansion_rate: float, seed: int = 0
) -> Sentence:
    """Baseline expander: insert LM-sampled words at uniformly chosen gaps.

    Inserts ceil((rate-1)*len) tokens one at a time, each sampled from the
    trigram distribution conditioned on the two tokens left of its gap
    (BOS-padded at the sentence start). EOS is masked while inserting.
    """
    if expansion_rate < 1:
        raise ValueError("expansion_rate must be >= 1")
    rng = np.random.default_rng(seed)
    tokens = list(sentence.tokens)
    n_insert = math.ceil((expansion_rate - 1) * len(tokens))
    for _ in range(n_insert):
        gap = int(rng.integers(0, len(tokens) + 1))
        left = [BOS_ID, BOS_ID] + lm.vocab.ids(tokens[:gap])
        probs = next_token_distribution(lm, (left[-2], left[-1]))
        probs[EOS_ID] = 0.0
        total = probs.sum()
        if total <= 0:  # all mass was on EOS; fall back to a uniform choice
            probs = np.zeros(len(lm.vocab))
            for w in lm.predicted_ids():
                probs[w] = 1.0
            probs[UNK_ID] = probs[EOS_ID] = 0.0
            total = probs.sum()
        probs /= total
        w = int(rng.choice(len(probs), p=probs))
        tokens.insert(gap, lm.vocab.token(w))
    return Sentence(tuple(tokens), sentence.source_id)


# --- ARPA serialization -------------------------------------------------------


def write_arpa(lm: TrigramLM, path: str) -> None:
    """Write the model in ARPA text format (log10 in the file)."""
    vocab = lm.vocab

    def name(ids: tuple[int, ...]) -> str:
        return " ".join(vocab.token(i) for i in ids)

    with open(path, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        for n in (1, 2, 3):
            f.write(f"ngram {n}={len(lm.logp[n])}\n")
        for n in (1, 2, 3):
            f.write(f"\n\\{n}-grams:\n")
            for key in sorted(lm.logp[n], key=name):
                if key in lm.placeholders:
                    lp10 = PLACEHOLDER_LOG10
                else:
                    lp10 = lm.logp[n][key] / _LN10
                line = f"{lp10:.12g}\t{name(key)}"
                if n < 3:
                    line += f"\t{lm.bow[n].get(key, 0.0) / _LN10:.12g}"
                f.write(line + "\n")
        f.write("\n\\end\\\n")


def read_arpa(path: str, vocab: Vocab | None = None) -> TrigramLM:
    """Load an ARPA file; builds a vocabulary from the unigram section if none given."""
    sections: dict[int, list[tuple[float, list[str], float]]] = {1: [], 2: [], 3: []}
    order = 0
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("\\data\\") or line.startswith("ngram "):
                continue
            if line == "\\end\\":
                break
            m = line.startswith("\\") and line.endswith("-grams:")
            if m:
                order = int(line[1])
                continue
            parts = line.split("\t")
            lp = float(parts[0])
            toks = parts[1].split(" ")
            bw = float(parts[2]) if len(parts) > 2 else 0.0
            sections[order].append((lp, toks, bw))

    if vocab is None:
        from .textprep import RESERVED

        unigrams = [t[0] for _, t, _ in sections[1]]
        vocab = Vocab.from_tokens([t for t in unigrams if t not in RESERVED])

    logp: dict[int, dict[tuple[int, ...], float]] = {1: {}, 2: {}, 3: {}}
    bow: dict[int, dict[tuple[int, ...], float]] = {1: {}, 2: {}}
    placeholders: set[tuple[int, ...]] = set()
    for n in (1, 2, 3):
        for lp10, toks, bw10 in sections[n]:
            key = tuple(vocab.id(t) for t in toks)
            if lp10 <= PLACEHOLDER_LOG10:
                logp[n][key] = PLACEHOLDER_LOG10 * _LN10
                placeholders.add(key)
            else:
                logp[n][key] = lp10 * _LN10
            if n < 3 and bw10 != 0.0:
                bow[n][key] = bw10 * _LN10
    return TrigramLM(vocab=vocab, logp=logp, bow=bow, placeholders=placeholders)


# --- step-model contract -------------------------------------------------------


class TrigramStepModel:
    """Step-model adapter so decoders can drive the trigram LM.

    The state is the last two consumed token ids; the encoder input only
    sizes the expected output length, it does not condition the LM.
    """

    def __init__(self, lm: TrigramLM):
        self.lm = lm
        self.vocab = lm.vocab

    def start(self, input_ids) -> tuple[int, int]:
        return (BOS_ID, BOS_ID)

    def step(self, state: tuple[int, int], prev_id: int):
        ctx = (state[1], prev_id)
        probs = next_token_distribution(self.lm, ctx)
        with np.errstate(divide="ignore"):
            logp = np.log(probs)
        return logp, ctx
