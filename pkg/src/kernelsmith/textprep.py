"""Corpus ingestion: sentence segmentation, normalization, filtering.

Normalization rules (exact, in order):
  1. lowercase
  2. every decimal digit becomes '#'
  3. quote characters (straight, curly, guillemets, backtick) are deleted;
     a contraction apostrophe does not split its word, so "don't" -> "dont"
  4. whitespace split, then punctuation runs are detached from token edges;
     internal punctuation (hyphens, abbreviation dots) stays inside the token
  5. tokens beyond 50 are dropped

Sentence segmentation splits on sentence-final .!? followed by whitespace
and a capital (or end of text), with an abbreviation list and a
single-initial rule to suppress false splits. The rules are a documented
reconstruction; see README.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ._stopwords import STOPWORDS

MAX_TOKENS = 50

QUOTE_CHARS = "\"'“”‘’«»`´‟„"
_QUOTE_RE = re.compile("[" + re.escape(QUOTE_CHARS) + "]")
_DIGIT_RE = re.compile(r"\d")

# words after which a '.' is not sentence-final
ABBREVIATIONS = frozenset(
    """mr mrs ms dr prof st mt etc vs eg ie e.g i.e jr sr gen col lt sgt
    capt rev fig no vol inc ltd co corp ave blvd approx dept est min max
    sec hr vv pp""".split()
)


class EmptySentenceError(ValueError):
    """Raised when normalization leaves no tokens."""


@dataclass(frozen=True)
class Sentence:
    """A normalized token sequence with a provenance tag."""

    tokens: tuple[str, ...]
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)


def _is_word_char(c: str) -> bool:
    # '#' is the digit placeholder and counts as part of a word
    return c.isalpha() or c == "#"


def _punct_runs(s: str) -> list[str]:
    """Split a punctuation string into runs of the same character."""
    runs: list[str] = []
    for c in s:
        if runs and runs[-1][0] == c:
            runs[-1] += c
        else:
            runs.append(c)
    return runs


def _split_chunk(chunk: str) -> list[str]:
    """Detach edge punctuation from one whitespace-delimited chunk."""
    i, j = 0, len(chunk)
    while i < j and not _is_word_char(chunk[i]):
        i += 1
    while j > i and not _is_word_char(chunk[j - 1]):
        j -= 1
    if i == j:  # all punctuation
        return _punct_runs(chunk)
    return _punct_runs(chunk[:i]) + [chunk[i:j]] + _punct_runs(chunk[j:])


def tokenize(raw: str) -> list[str]:
    """Apply the normalization rules and return the token list (no length cap)."""
    text = raw.lower()
    text = _DIGIT_RE.sub("#", text)
    text = _QUOTE_RE.sub("", text)
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(t for t in _split_chunk(chunk) if t)
    return tokens


def normalize_sentence(raw: str, source_id: str = "") -> Sentence:
    """Normalize one raw sentence; raises EmptySentenceError if nothing is left."""
    tokens = tokenize(raw)[:MAX_TOKENS]
    if not tokens:
        raise EmptySentenceError(f"no tokens after normalization: {raw!r}")
    return Sentence(tuple(tokens), source_id)


def _last_word_before(text: str, pos: int) -> str:
    m = re.search(r"(\S+)\s*$", text[:pos])
    if not m:
        return ""
    return m.group(1).strip(QUOTE_CHARS + "([{").lower()


def segment_text(raw: str, source_id: str = "") -> list[Sentence]:
    """Split raw text into normalized sentences.

    Unsplittable text yields a single sentence; text that normalizes to
    nothing yields an empty list.
    """
    boundaries: list[int] = []
    for m in re.finditer(r"[.!?]+", raw):
        end = m.end()
        rest = raw[end:]
        nxt = rest.lstrip()
        if nxt:
            if not rest[0].isspace():
                continue  # mid-token punctuation, e.g. "3.5" or "a.m."
            first = nxt[0]
            if first in QUOTE_CHARS and len(nxt) > 1:
                first = nxt[1]
            if not first.isupper():
                continue
        if m.group().startswith("."):
            word = _last_word_before(raw, m.start())
            if word in ABBREVIATIONS or (len(word) == 1 and word.isalpha()):
                continue
        boundaries.append(end)

    pieces: list[str] = []
    start = 0
    for b in boundaries:
        pieces.append(raw[start:b])
        start = b
    pieces.append(raw[start:])

    sentences: list[Sentence] = []
    for piece in pieces:
        try:
            sentences.append(normalize_sentence(piece, source_id))
        except EmptySentenceError:
            continue
    return sentences


def stopword_ratio(sentence: Sentence) -> float:
    hits = sum(1 for t in sentence.tokens if t in STOPWORDS)
    return hits / len(sentence.tokens)


def filter_corpus(
    sentences: list[Sentence],
    min_len: int = 1,
    max_len: int = MAX_TOKENS,
    stopword_ratio_bounds: tuple[float, float] = (0.1, 0.9),
) -> list[Sentence]:
    """Keep sentences with length and stopword ratio in bounds.

    The stopword ratio is a cheap proxy for dropping non-English and
    degenerate lines.
    """
    if min_len > max_len:
        raise ValueError(f"min_len {min_len} > max_len {max_len}")
    lo, hi = stopword_ratio_bounds
    if lo > hi:
        raise ValueError(f"bad stopword ratio bounds: {stopword_ratio_bounds}")
    kept = []
    for s in sentences:
        if not (min_len <= len(s) <= max_len):
            continue
        if not (lo <= stopword_ratio(s) <= hi):
            continue
        kept.append(s)
    return kept


# --- vocabulary -------------------------------------------------------------

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3


@dataclass
class Vocab:
    """Token/id bijection with reserved symbols and per-token stopword flags."""

    tokens: list[str]
    index: dict[str, int] = field(repr=False)
    stopword: list[bool] = field(repr=False)

    @classmethod
    def build(cls, corpus: list[Sentence], max_size: int | None = None) -> "Vocab":
        """Frequency-ranked vocabulary over a corpus (ties broken lexically)."""
        counts: dict[str, int] = {}
        for s in corpus:
            for t in s.tokens:
                counts[t] = counts.get(t, 0) + 1
        ranked = sorted(counts, key=lambda t: (-counts[t], t))
        if max_size is not None:
            ranked = ranked[: max(0, max_size - len(RESERVED))]
        return cls.from_tokens(ranked)

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Vocab":
        all_tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        index = {t: i for i, t in enumerate(all_tokens)}
        if len(index) != len(all_tokens):
            raise ValueError("duplicate tokens in vocabulary")
        stop = [t in STOPWORDS for t in all_tokens]
        return cls(all_tokens, index, stop)

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def token(self, tid: int) -> str:
        return self.tokens[tid]

    def ids(self, tokens) -> list[int]:
        return [self.id(t) for t in tokens]

    def is_stopword(self, tid: int) -> bool:
        return self.stopword[tid]

    def to_dict(self) -> dict:
        return {"tokens": self.tokens}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        tokens = d["tokens"]
        if tokens[: len(RESERVED)] != list(RESERVED):
            raise ValueError("vocabulary missing reserved symbols")
        return cls.from_tokens(tokens[len(RESERVED) :])
