"""Binary and tf-idf sparse vectors over the pruned vocabulary.

Document frequency always comes from the article corpus (the search side),
so registration queries and article candidates are weighted on the same
scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .features import Vocabulary

SCHEMES = ("binary", "tfidf")


@dataclass(frozen=True)
class WeightedVector:
    """Sparse vector: strictly index-sorted (index, weight) entries."""

    doc_id: str
    indices: tuple[int, ...]
    weights: tuple[float, ...]
    scheme: str
    norm: float

    def __post_init__(self):
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights length mismatch")
        if any(a >= b for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")

    @property
    def n_features_present(self) -> int:
        return len(self.indices)

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "scheme": self.scheme,
            "entries": [[i, w] for i, w in zip(self.indices, self.weights)],
        }


def _make_vector(doc_id: str, entries: list[tuple[int, float]], scheme: str) -> WeightedVector:
    entries.sort()
    indices = tuple(i for i, _ in entries)
    weights = tuple(w for _, w in entries)
    norm = math.sqrt(sum(w * w for w in weights))
    return WeightedVector(doc_id, indices, weights, scheme, norm)


def binary_vector(doc_id: str, projected: Mapping[int, int]) -> WeightedVector:
    """Presence/absence vector: weight 1 per distinct feature."""
    return _make_vector(doc_id, [(i, 1.0) for i in projected], "binary")


def tfidf_weight(tf: int, df: int, n_articles: int) -> float:
    """(1 + ln tf) * ln(n_articles / df), natural logarithms."""
    if df <= 0:
        raise ValueError("df must be positive: feature absent from the article corpus")
    if tf < 1:
        raise ValueError("tf must be >= 1")
    if df > n_articles:
        raise ValueError(f"df {df} exceeds corpus size {n_articles}")
    return (1.0 + math.log(tf)) * math.log(n_articles / df)


def tfidf_vector(doc_id: str, projected: Mapping[int, int], vocabulary: Vocabulary) -> WeightedVector:
    """tf-idf vector; entries whose weight is exactly zero are dropped."""
    df = vocabulary.art_doc_frequency
    n = vocabulary.n_articles
    entries = []
    for index, count in projected.items():
        w = tfidf_weight(count, df[index], n)
        if w > 0.0:
            entries.append((index, w))
    return _make_vector(doc_id, entries, "tfidf")


def weight_vector(
    doc_id: str, projected: Mapping[int, int], vocabulary: Vocabulary, scheme: str
) -> WeightedVector:
    if scheme == "binary":
        return binary_vector(doc_id, projected)
    if scheme == "tfidf":
        return tfidf_vector(doc_id, projected, vocabulary)
    raise ValueError(f"unknown weighting scheme: {scheme!r}")


def write_vector_dump(vectors, path) -> None:
    """Debug dump: one `{doc_id, scheme, entries}` object per line."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for vec in vectors:
            fh.write(json.dumps(vec.to_record(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")
