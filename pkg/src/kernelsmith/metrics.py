"""Automatic evaluation metrics for expansion outputs.

N-gram overlap (ROUGE-n recall, BLEU-n with epsilon smoothing), diversity
(Dist-n of added n-grams, expansion ratio, added words), embedding-sequence
distances (discrete Frechet, cosine of sequence means), and Pearson /
Spearman correlation. The embedder is pluggable; a deterministic
random-projection bag-of-words embedder ships for tests and the service.
"""

from __future__ import annotations

import csv
import hashlib
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from .textprep import Sentence

BLEU_EPSILON = 1e-9


class EmptySequenceError(ValueError):
    """Metric input was empty."""


class ShapeError(ValueError):
    """Embedding sequences disagree in dimension."""


class DegenerateDataError(ValueError):
    """Correlation of a zero-variance sample is undefined."""


@dataclass
class MetricReport:
    rouge1: float
    rouge2: float
    bleu2: float
    bleu4: float
    dist1: float
    dist2: float
    expansion_ratio: float
    added_words: int
    input_len: int
    output_len: int
    frechet: float
    cosine_dist: float

    def to_dict(self) -> dict:
        return asdict(self)


def _tokens(x) -> list[str]:
    if isinstance(x, Sentence):
        return list(x.tokens)
    return list(x)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def ngram_overlap_metrics(candidate, reference) -> tuple[float, float, float, float]:
    """(ROUGE-1, ROUGE-2, BLEU-2, BLEU-4) of candidate against reference.

    ROUGE-n is clipped n-gram recall. BLEU-n is the brevity-penalized
    geometric mean of clipped 1..n-gram precisions, with zero counts
    replaced by 1e-9 so short sentences stay finite.
    """
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        raise EmptySequenceError("overlap metrics need non-empty sequences")

    def rouge(n: int) -> float:
        ref_n = _ngrams(ref, n)
        if not ref_n:
            return 0.0
        cand_n = _ngrams(cand, n)
        clipped = sum(min(c, ref_n[g]) for g, c in cand_n.items())
        return clipped / sum(ref_n.values())

    def precision(n: int) -> float:
        cand_n = _ngrams(cand, n)
        total = sum(cand_n.values())
        if total == 0:
            return BLEU_EPSILON
        ref_n = _ngrams(ref, n)
        clipped = sum(min(c, ref_n[g]) for g, c in cand_n.items())
        return clipped / total if clipped else BLEU_EPSILON

    brevity = min(1.0, float(np.exp(1 - len(ref) / len(cand))))

    def bleu(n: int) -> float:
        logs = [np.log(precision(i)) for i in range(1, n + 1)]
        return brevity * float(np.exp(np.mean(logs)))

    return rouge(1), rouge(2), bleu(2), bleu(4)


def diversity_metrics(input_tokens, output_tokens) -> tuple[float, float, float, int]:
    """(dist1, dist2, expansion_ratio, added_words) of output vs input.

    dist-n counts unique output n-grams absent from the input, divided by
    the output length; added_words is the multiset difference size.
    """
    inp, out = _tokens(input_tokens), _tokens(output_tokens)
    if not inp:
        raise EmptySequenceError("diversity metrics need a non-empty input")
    out_len = len(out)

    def dist(n: int) -> float:
        if out_len == 0:
            return 0.0
        in_n = set(_ngrams(inp, n))
        new = {g for g in _ngrams(out, n) if g not in in_n}
        return len(new) / out_len

    added = sum((Counter(out) - Counter(inp)).values())
    return dist(1), dist(2), out_len / len(inp), added


def embedding_distances(seq_a, seq_b) -> tuple[float, float]:
    """(discrete Frechet, cosine distance of sequence means).

    Ground distance is Euclidean; cosine distance is 1 - cos of the two
    mean vectors (1.0 when exactly one mean is a zero vector).
    """
    a = np.asarray(seq_a, dtype=np.float64)
    b = np.asarray(seq_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySequenceError("need non-empty 2-D vector sequences")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")

    # discrete Frechet coupling DP (Eiter & Mannila)
    m, n = a.shape[0], b.shape[0]
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    table = np.empty((m, n))
    table[0, 0] = d[0, 0]
    for i in range(1, m):
        table[i, 0] = max(table[i - 1, 0], d[i, 0])
    for j in range(1, n):
        table[0, j] = max(table[0, j - 1], d[0, j])
    for i in range(1, m):
        for j in range(1, n):
            table[i, j] = max(
                min(table[i - 1, j], table[i - 1, j - 1], table[i, j - 1]), d[i, j]
            )
    frechet = float(table[-1, -1])

    ma, mb = a.mean(axis=0), b.mean(axis=0)
    na, nb = np.linalg.norm(ma), np.linalg.norm(mb)
    if na < 1e-12 or nb < 1e-12:
        cosine = 0.0 if na < 1e-12 and nb < 1e-12 else 1.0
    else:
        cosine = 1.0 - float(ma @ mb / (na * nb))
    return frechet, cosine


def _ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their midpoint."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def correlation(x, y) -> tuple[float, float]:
    """(Pearson r, Spearman rho with average ranks for ties)."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1 or len(xa) < 3:
        raise ValueError("need two equal-length 1-D samples of size >= 3")

    def pearson(u: np.ndarray, v: np.ndarray) -> float:
        du, dv = u - u.mean(), v - v.mean()
        su, sv = np.sqrt((du * du).sum()), np.sqrt((dv * dv).sum())
        if su == 0 or sv == 0:
            raise DegenerateDataError("zero variance sample")
        return float((du * dv).sum() / (su * sv))

    return pearson(xa, ya), pearson(_ranks(xa), _ranks(ya))


# --- pluggable embedder ----------------------------------------------------------


class RandomProjectionEmbedder:
    """Deterministic per-token random vectors (seeded by a token digest).

    A stand-in for heavyweight sentence encoders: stable across runs and
    platforms, which is all the distance metrics need for testing and for
    the service's relative comparisons.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            vec = rng.standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def embed(self, tokens) -> np.ndarray:
        toks = _tokens(tokens)
        if not toks:
            raise EmptySequenceError("cannot embed an empty sequence")
        return np.stack([self.token_vector(t) for t in toks])


def build_report(
    input_tokens,
    output_tokens,
    reference_tokens=None,
    embedder: RandomProjectionEmbedder | None = None,
) -> MetricReport:
    """Full MetricReport of an output against its input (or a reference).

    Overlap metrics compare against the reference when one is given,
    otherwise against the input (measuring copying).
    """
    inp, out = _tokens(input_tokens), _tokens(output_tokens)
    ref = _tokens(reference_tokens) if reference_tokens is not None else inp
    if out:
        r1, r2, b2, b4 = ngram_overlap_metrics(out, ref)
    else:
        r1 = r2 = b2 = b4 = 0.0
    d1, d2, ratio, added = diversity_metrics(inp, out)
    embedder = embedder or RandomProjectionEmbedder()
    if out:
        frechet, cosine = embedding_distances(embedder.embed(inp), embedder.embed(out))
    else:
        frechet, cosine = float("nan"), float("nan")
    return MetricReport(
        rouge1=r1,
        rouge2=r2,
        bleu2=b2,
        bleu4=b4,
        dist1=d1,
        dist2=d2,
        expansion_ratio=ratio,
        added_words=added,
        input_len=len(inp),
        output_len=len(out),
        frechet=frechet,
        cosine_dist=cosine,
    )


FIELDS = list(MetricReport.__dataclass_fields__)


def evaluate_file(tsv_path: str, csv_path: str) -> dict[str, float]:
    """Score a TSV of input TAB output [TAB reference] rows.

    Writes one CSV row per line plus returns (and appends) aggregate means.
    """
    reports = []
    embedder = RandomProjectionEmbedder()
    with open(tsv_path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"need input TAB output, got: {line!r}")
            inp, out = parts[0].split(), parts[1].split()
            ref = parts[2].split() if len(parts) > 2 and parts[2] else None
            reports.append(build_report(inp, out, ref, embedder))

    aggregates = {
        field: float(np.mean([getattr(r, field) for r in reports])) if reports else 0.0
        for field in FIELDS
    }
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(FIELDS)
        for r in reports:
            writer.writerow([getattr(r, field) for field in FIELDS])
        writer.writerow([aggregates[field] for field in FIELDS])
    return aggregates
