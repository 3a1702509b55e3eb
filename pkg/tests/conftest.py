import numpy as np

from kernelsmith.compressor import SentencePair
from kernelsmith.textprep import Sentence


def markov_corpus(n_sent: int, seed: int, vocab_size: int = 40, branch: int = 4,
                  min_len: int = 4, max_len: int = 12) -> list[Sentence]:
    """Synthetic sentences from a skewed word-to-word Markov chain.

    Gives n-gram statistics with realistic sparsity, unlike i.i.d. uniform
    token soup, so smoothing quality is actually observable.
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab_size)]
    succ = {i: rng.choice(vocab_size, size=branch, replace=False) for i in range(vocab_size)}
    pvals = np.linspace(2.0, 1.0, branch)
    pvals = pvals / pvals.sum()
    out = []
    for _ in range(n_sent):
        n = int(rng.integers(min_len, max_len))
        w = int(rng.integers(0, vocab_size))
        toks = [words[w]]
        for _ in range(n - 1):
            w = int(rng.choice(succ[w], p=pvals))
            toks.append(words[w])
        out.append(Sentence(tuple(toks)))
    return out


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def stage_name(i: int) -> str:
    """Digit-free stage token (digits would be masked by normalization)."""
    return "s" + _LETTERS[i // 26] + _LETTERS[i % 26]


def staged_corpus(n_sent: int, seed: int, hop_max: int = 3, end_at: int = 33) -> list[Sentence]:
    """Forward-progress token chains ending in '.'; every path terminates.

    Gives a trigram LM whose decodes finish structurally (the chain always
    reaches the end stage), which the novelty-rationing statistics need.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_sent):
        i = int(rng.integers(0, 4))
        toks = []
        while i < end_at:
            toks.append(stage_name(i))
            i += int(rng.integers(1, hop_max + 1))
        toks.append(".")
        out.append(Sentence(tuple(toks)))
    return out


def insert_task_pairs(n_pairs: int, seed: int, insert_prob: float = 0.3,
                      n_kernels: int = 10) -> list[SentencePair]:
    """Copy+insert pairs where adjective insertion is genuinely stochastic.

    Each distinct kernel recurs with independently sampled insertions, so a
    model cannot memorize one target per kernel: plain likelihood prefers
    copying (insert_prob < 0.5) while a 10x novel-token weight flips the
    preference toward inserting.
    """
    rng = np.random.default_rng(seed)
    nouns = [f"n{i}" for i in range(20)]
    kernels = []
    for _ in range(n_kernels):
        k = int(rng.integers(4, 7))
        chosen = rng.choice(20, size=k, replace=False)
        kernels.append([nouns[i] for i in chosen])
    pairs = []
    for j in range(n_pairs):
        base = kernels[j % n_kernels]
        original = []
        for noun in base:
            if rng.random() < insert_prob:
                original.append("adj" + noun[1:])
            original.append(noun)
        pairs.append(
            SentencePair(
                Sentence(tuple(base + ["."])),
                Sentence(tuple(original + ["."])),
            )
        )
    return pairs
