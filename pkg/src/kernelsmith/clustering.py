"""Corpus topic clustering: vectorize, reduce, cluster, score cohesion.

Pipeline pieces, each usable alone:
  * suffix stemming + TF-IDF or signed-hashing vectorization with document
    frequency bounds (rows L2-normalized)
  * latent semantic analysis via randomized-power-iteration truncated SVD
  * k-means (k-means++ seeding, Lloyd iterations, empty-cluster re-seeding)
  * silhouette coefficient of cluster cohesion

The study configuration sweeps cluster counts and LSA dimensions (the
reference experiment used 50/100/200/300 components, 10k features, and
document frequencies between 0.001% and 1%).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .textprep import Sentence


class EmptyVocabularyError(ValueError):
    """Every feature was filtered out by the document-frequency bounds."""


class RankError(ValueError):
    """Requested more LSA dimensions than the matrix supports."""


class UndefinedSilhouetteError(ValueError):
    """Silhouette needs at least two non-empty clusters."""


@dataclass(frozen=True)
class ClusterConfig:
    k: int = 10
    vectorizer: str = "tfidf"  # or "hashing"
    max_features: int = 10_000
    df_bounds: tuple[float, float] = (1e-5, 1e-2)
    lsa_dims: int | None = 200
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        lo, hi = self.df_bounds
        if not (0 <= lo < hi <= 1):
            raise ValueError("need 0 <= df_min < df_max <= 1")
        if self.vectorizer not in ("tfidf", "hashing"):
            raise ValueError(f"unknown vectorizer {self.vectorizer!r}")


# --- stemming ---------------------------------------------------------------------

_SUFFIXES = ("ational", "fulness", "ousness", "iveness", "ization", "ement",
             "ments", "ation", "ness", "ment", "tion", "sses", "ing", "ies",
             "ful", "est", "ous", "ed", "ly", "es", "s")


def stem(token: str) -> str:
    """Light Porter-style suffix stripper (longest matching suffix once)."""
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            if suffix == "sses":
                return token[:-2]
            if suffix == "ies":
                return token[:-3] + "i"
            return token[: -len(suffix)]
    return token


# --- vectorization ----------------------------------------------------------------


def _stem_counts(sentences: list[Sentence]) -> list[dict[str, int]]:
    rows = []
    for s in sentences:
        counts: dict[str, int] = {}
        for t in s.tokens:
            st = stem(t)
            counts[st] = counts.get(st, 0) + 1
        rows.append(counts)
    return rows


def vectorize(sentences: list[Sentence], config: ClusterConfig):
    """Sparse (n_sentences, n_features) matrix with L2-normalized rows.

    TF-IDF uses idf = ln((1+N)/(1+df)) + 1 (smoothed); hashing maps stems
    to signed buckets. Features outside the df bounds are dropped; TF-IDF
    keeps at most max_features by total count.

    Returns (matrix, feature_names); hashing buckets are named "h<index>".
    """
    if not sentences:
        raise ValueError("corpus is empty")
    rows = _stem_counts(sentences)
    n = len(sentences)
    lo, hi = config.df_bounds

    if config.vectorizer == "hashing":
        dim = config.max_features
        df: dict[int, int] = {}
        for counts in rows:
            for st in counts:
                b = _bucket(st, dim)[0]
                df[b] = df.get(b, 0) + 1
        keep = {b for b, d in df.items() if lo <= d / n <= hi}
        if not keep:
            raise EmptyVocabularyError("df bounds removed every hashing bucket")
        mat = sparse.lil_matrix((n, dim))
        for i, counts in enumerate(rows):
            for st, c in counts.items():
                b, sign = _bucket(st, dim)
                if b in keep:
                    mat[i, b] += sign * c
        return _l2_rows(mat.tocsr()), [f"h{i}" for i in range(dim)]

    df_counts: dict[str, int] = {}
    totals: dict[str, int] = {}
    for counts in rows:
        for st, c in counts.items():
            df_counts[st] = df_counts.get(st, 0) + 1
            totals[st] = totals.get(st, 0) + c
    terms = [t for t, d in df_counts.items() if lo <= d / n <= hi]
    if not terms:
        raise EmptyVocabularyError("df bounds removed every term")
    terms.sort(key=lambda t: (-totals[t], t))
    terms = terms[: config.max_features]
    index = {t: j for j, t in enumerate(terms)}
    idf = np.array([np.log((1 + n) / (1 + df_counts[t])) + 1.0 for t in terms])
    mat = sparse.lil_matrix((n, len(terms)))
    for i, counts in enumerate(rows):
        for st, c in counts.items():
            j = index.get(st)
            if j is not None:
                mat[i, j] = c * idf[j]
    return _l2_rows(mat.tocsr()), terms


def _bucket(term: str, dim: int) -> tuple[int, int]:
    digest = hashlib.md5(term.encode()).digest()
    value = int.from_bytes(digest[:8], "little")
    return value % dim, 1 if digest[8] & 1 else -1


def _l2_rows(mat: sparse.csr_matrix) -> sparse.csr_matrix:
    norms = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    inv = sparse.diags(1.0 / norms)
    return (inv @ mat).tocsr()


# --- latent semantic analysis ------------------------------------------------------


def lsa_reduce(matrix, dims: int, seed: int = 0, power_iters: int = 7) -> np.ndarray:
    """Truncated SVD document coordinates (U_k * S_k) via randomized range
    finding with power iterations; near-exact on desk-scale matrices."""
    n, m = matrix.shape
    if dims < 1 or dims > min(n, m):
        raise RankError(f"dims {dims} out of range for {n}x{m}")
    rng = np.random.default_rng(seed)
    oversample = min(10, max(0, min(n, m) - dims))
    probe = rng.standard_normal((m, dims + oversample))
    y = matrix @ probe
    for _ in range(power_iters):
        y, _ = np.linalg.qr(y)
        y = matrix @ (matrix.T @ y)
    q, _ = np.linalg.qr(y)
    b = q.T @ matrix
    b = np.asarray(b.todense()) if sparse.issparse(b) else np.asarray(b)
    ub, s, _ = np.linalg.svd(b, full_matrices=False)
    u = q @ ub
    return u[:, :dims] * s[:dims]


def lsa_singular_values(matrix, dims: int, seed: int = 0) -> np.ndarray:
    """Leading singular values (column norms of the reduced coordinates)."""
    reduced = lsa_reduce(matrix, dims, seed)
    return np.sqrt((reduced**2).sum(axis=0))


# --- k-means ------------------------------------------------------------------------


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iters: int = 100):
    """(labels, centroids, inertia) via k-means++ and Lloyd iterations.

    Stops when the centroid shift drops below 1e-6; empty clusters are
    re-seeded from the point farthest from its assigned centroid.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[rng.integers(n)]
    d2 = ((pts - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[j] = pts[rng.integers(n)]
        else:
            centroids[j] = pts[_weighted_pick(rng, d2 / total)]
        d2 = np.minimum(d2, ((pts - centroids[j]) ** 2).sum(axis=1))

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        dists = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = dists.argmin(axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = pts[labels == j]
            if len(members) == 0:
                worst = int(dists[np.arange(n), labels].argmax())
                new_centroids[j] = pts[worst]
                labels[worst] = j
            else:
                new_centroids[j] = members.mean(axis=0)
        shift = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        if shift < 1e-6:
            break
    dists = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = dists.argmin(axis=1)
    inertia = float(dists[np.arange(n), labels].sum())
    return labels, centroids, inertia


def _weighted_pick(rng: np.random.Generator, probs: np.ndarray) -> int:
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


# --- silhouette ---------------------------------------------------------------------


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean of (b-a)/max(a,b): a = mean intra-cluster distance, b = mean
    distance to the nearest other cluster. Singletons score 0, as does the
    a = b = 0 degenerate case."""
    pts = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise UndefinedSilhouetteError("need at least two clusters")
    dists = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    scores = np.zeros(len(pts))
    for i in range(len(pts)):
        same = labels == labels[i]
        n_same = same.sum() - 1
        if n_same == 0:
            scores[i] = 0.0
            continue
        a = dists[i][same].sum() / n_same
        b = min(dists[i][labels == other].mean() for other in uniq if other != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


# --- study orchestration -------------------------------------------------------------


def cluster_report(sentences: list[Sentence], config: ClusterConfig, top_terms: int = 8) -> dict:
    """Cluster a corpus and report sizes, top stems, and cohesion."""
    matrix, names = vectorize(sentences, config)
    if config.lsa_dims:
        points = lsa_reduce(matrix, min(config.lsa_dims, min(matrix.shape)), config.seed)
    else:
        points = np.asarray(matrix.todense())
    labels, centroids, inertia = kmeans(points, config.k, config.seed)
    score = silhouette(points, labels)
    clusters = []
    for j in range(config.k):
        members = np.flatnonzero(labels == j)
        mean_row = np.asarray(matrix[members].mean(axis=0)).ravel() if len(members) else np.zeros(matrix.shape[1])
        top = np.argsort(-mean_row)[:top_terms]
        clusters.append(
            {
                "size": int(len(members)),
                "top_stems": [names[t] for t in top if mean_row[t] > 0],
            }
        )
    return {
        "k": config.k,
        "vectorizer": config.vectorizer,
        "lsa_dims": config.lsa_dims,
        "silhouette": score,
        "inertia": inertia,
        "clusters": sorted(clusters, key=lambda c: -c["size"]),
    }
