"""Deletion-based sentence compression scored by the trigram LM.

The kernel of a sentence is the kept-token subsequence of a fixed target
length that maximizes the LM score of the kept sequence (BOS-prefixed,
EOS-suffixed), found by exact dynamic programming over states
(kept so far, positions of the last two kept tokens). Sentence-final
punctuation is forced into every kernel.

Also builds the (kernel, original) parallel corpus used for expansion
training: compress everything, keep pairs with enough reduction, shuffle,
split off a development set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ngram_lm import TrigramLM
from .textprep import BOS_ID, EOS_ID, Sentence

FINAL_PUNCT = {".", "!", "?"}


class TooShortError(ValueError):
    """Sentence has fewer than 2 tokens."""


class NoPairsError(ValueError):
    """No sentence compressed enough to enter the dataset."""


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class CompressionConfig:
    target_rate: float = 0.4  # fraction of tokens kept
    rate_tolerance: int = 1  # slack, in tokens, accepted around the target
    min_reduction_for_dataset: float = 0.3

    def __post_init__(self):
        if not 0 < self.target_rate <= 1:
            raise ValueError("target_rate must be in (0, 1]")
        if not 0 <= self.min_reduction_for_dataset < 1:
            raise ValueError("min_reduction_for_dataset must be in [0, 1)")
        if self.rate_tolerance < 0:
            raise ValueError("rate_tolerance must be >= 0")


@dataclass(frozen=True)
class SentencePair:
    kernel: Sentence
    original: Sentence

    def __post_init__(self):
        if not is_subsequence(self.kernel.tokens, self.original.tokens):
            raise ValueError("kernel must be a subsequence of the original")


def is_subsequence(short, long) -> bool:
    it = iter(long)
    return all(t in it for t in short)


def compress(lm: TrigramLM, sentence: Sentence, config: CompressionConfig) -> Sentence:
    """Best keep-subsequence of length round(target_rate * len).

    Exact optimum of the LM score over all subsequences of that length
    (the DP enumerates every (prev, last) kept-position pair). The target
    length is always feasible, so rate_tolerance only matters to callers
    checking achieved rates.
    """
    n = len(sentence)
    if n < 2:
        raise TooShortError(f"need at least 2 tokens, got {n}")
    keep = min(max(round_half_up(config.target_rate * n), 1), n)
    if keep == n:
        return Sentence(sentence.tokens, sentence.source_id)

    ids = lm.vocab.ids(sentence.tokens)
    force_last = sentence.tokens[-1] in FINAL_PUNCT

    # Shifted position space: index 0 is BOS, index i>0 is token position i-1.
    # trig[j, l, m] = ln p(token m-1 | ctx j, ctx l) for j < l < m.
    ctx = [BOS_ID] + ids
    neg = -np.inf

    def context_pairs():
        yield 0, 0
        for last in range(1, n + 1):
            for prev in range(last):
                yield prev, last

    trig = np.full((n + 1, n + 1, n + 1), neg)
    eos = np.full((n + 1, n + 1), neg)
    for j, l in context_pairs():
        for m in range(l + 1, n + 1):
            trig[j, l, m] = lm.cond_logprob(ctx[j], ctx[l], ids[m - 1])
        eos[j, l] = lm.cond_logprob(ctx[j], ctx[l], EOS_ID)

    # dp[j, l]: best score with current kept count, last two kept = (j, l)
    dp = np.full((n + 1, n + 1), neg)
    dp[0, 0] = 0.0
    back = np.zeros((keep + 1, n + 1, n + 1), dtype=np.int32)
    for k in range(1, keep + 1):
        nxt = np.full((n + 1, n + 1), neg)
        for l in range(n + 1):
            col = dp[:, l]
            if not np.isfinite(col).any():
                continue
            scores = col[:, None] + trig[:, l, :]  # (j, m)
            j_best = np.argmax(scores, axis=0)
            nxt[l, :] = scores[j_best, np.arange(n + 1)]
            back[k, l, :] = j_best
        dp = nxt

    final = dp + eos
    if force_last:
        mask = np.full_like(final, neg)
        mask[:, n] = final[:, n]
        final = mask
    j_end, l_end = np.unravel_index(np.argmax(final), final.shape)
    if not np.isfinite(final[j_end, l_end]):
        raise TooShortError("no feasible kernel")  # unreachable for n >= 2

    positions = []
    j, l = int(j_end), int(l_end)
    for k in range(keep, 0, -1):
        positions.append(l)
        j, l = int(back[k, j, l]), j
    positions.reverse()
    kept = tuple(sentence.tokens[p - 1] for p in positions)
    return Sentence(kept, sentence.source_id)


def compression_rate(pair: SentencePair) -> float:
    return len(pair.kernel) / len(pair.original)


def mean_compression_rate(pairs: list[SentencePair]) -> float:
    """Plain average of per-pair kept fractions (the reported corpus rate)."""
    if not pairs:
        raise ValueError("no pairs")
    return sum(compression_rate(p) for p in pairs) / len(pairs)


def build_parallel_corpus(
    corpus: list[Sentence],
    lm: TrigramLM,
    config: CompressionConfig,
    dev_holdout: int,
    seed: int = 0,
) -> tuple[list[SentencePair], list[SentencePair]]:
    """Compress every sentence and split surviving pairs into train/dev.

    Pairs survive when the kernel removes at least min_reduction_for_dataset
    of the tokens. The shuffle and split are deterministic per seed.
    """
    if dev_holdout < 0 or dev_holdout >= len(corpus):
        raise ValueError("dev_holdout must be in [0, corpus size)")
    pairs = []
    for s in corpus:
        if len(s) < 2:
            continue
        kernel = compress(lm, s, config)
        reduction = 1 - len(kernel) / len(s)
        if reduction >= config.min_reduction_for_dataset:
            pairs.append(SentencePair(kernel, s))
    if not pairs:
        raise NoPairsError("no sentence compressed enough for the dataset")
    order = np.random.default_rng(seed).permutation(len(pairs))
    shuffled = [pairs[i] for i in order]
    dev = shuffled[:dev_holdout]
    train = shuffled[dev_holdout:]
    return train, dev


def save_pairs(pairs: list[SentencePair], path: str) -> None:
    """One pair per line: kernel TAB original, tokens space-joined."""
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(f"{' '.join(p.kernel.tokens)}\t{' '.join(p.original.tokens)}\n")


def load_pairs(path: str) -> list[SentencePair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            line = line.rstrip("\n")
            if not line:
                continue
            kernel, original = line.split("\t")
            pairs.append(
                SentencePair(
                    Sentence(tuple(kernel.split(" ")), f"line{i}"),
                    Sentence(tuple(original.split(" ")), f"line{i}"),
                )
            )
    return pairs
