"""Pairwise similarity/distance measures and indexed ranking.

Ranking traverses an inverted index over the article vectors instead of
scanning every pair. For the normalized Euclidean distance the shared-feature
traversal is combined with cached norms via
``|q - a|^2 = |q|^2 + |a|^2 - 2 * dot(q, a)``, which is exact over all
coordinates, so indexed rankings match exhaustive pairwise scoring.

Candidates that share no feature with the query are still ranked: they score
0 under cosine and 1 under Jaccard, and their Euclidean distance follows from
the cached norms. Ties are broken by ascending numeric article id, which
makes every ranking fully deterministic.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .features import REPRESENTATIONS, Vocabulary
from .weighting import SCHEMES, WeightedVector

logger = logging.getLogger(__name__)

MEASURES = ("cosine", "jaccard", "euclidean_normalized")
_MEASURE_ALIASES = {"euclidean": "euclidean_normalized"}

_INDEX_MAGIC = b"TLNK"
_INDEX_VERSION = 1


class UnrankableRegistrationError(ValueError):
    """The query vector is empty; no ranking is defined."""


class IndexConfigMismatchError(ValueError):
    """A persisted index was loaded under a different method configuration."""


def normalize_measure(name: str) -> str:
    name = name.strip().casefold()
    name = _MEASURE_ALIASES.get(name, name)
    if name not in MEASURES:
        raise ValueError(f"unknown measure: {name!r}")
    return name


@dataclass(frozen=True)
class MethodConfig:
    """One representation/weighting/measure combination."""

    representation: str
    scheme: str
    measure: str

    def __post_init__(self):
        object.__setattr__(self, "measure", normalize_measure(self.measure))
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation: {self.representation!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme: {self.scheme!r}")
        if self.measure == "jaccard" and self.scheme != "binary":
            raise ValueError("jaccard is defined on binary vectors only")

    @property
    def is_distance(self) -> bool:
        """True when lower scores are better."""
        return self.measure != "cosine"

    def label(self) -> str:
        return f"{self.representation}/{self.scheme}/{self.measure}"

    def to_dict(self) -> dict:
        return {
            "representation": self.representation,
            "scheme": self.scheme,
            "measure": self.measure,
        }


def legal_configs(representations: Iterable[str] = REPRESENTATIONS) -> list[MethodConfig]:
    """All evaluated combinations, in report row order."""
    configs = []
    for rep in representations:
        for scheme, measure in (
            ("binary", "euclidean_normalized"),
            ("binary", "jaccard"),
            ("binary", "cosine"),
            ("tfidf", "euclidean_normalized"),
            ("tfidf", "cosine"),
        ):
            configs.append(MethodConfig(rep, scheme, measure))
    return configs


@dataclass(frozen=True)
class RankedCandidates:
    """Best-first candidate ordering for one registration."""

    nct_id: str
    config: MethodConfig
    ranking: tuple[tuple[str, float], ...]  # (pmid, score)
    truncated_at: int | None = None
    excluded_pmids: tuple[str, ...] = ()  # zero-feature candidates under euclidean

    def rank_of(self, pmid: str) -> int | None:
        """1-based rank, or None if the article is not in the ranking."""
        for pos, (candidate, _) in enumerate(self.ranking, start=1):
            if candidate == pmid:
                return pos
        return None


# ---------------------------------------------------------------------------
# Pairwise measures


def _dot(a: WeightedVector, b: WeightedVector) -> float:
    total = 0.0
    i = j = 0
    ai, aw, bi, bw = a.indices, a.weights, b.indices, b.weights
    while i < len(ai) and j < len(bi):
        if ai[i] == bi[j]:
            total += aw[i] * bw[j]
            i += 1
            j += 1
        elif ai[i] < bi[j]:
            i += 1
        else:
            j += 1
    return total


def cosine_similarity(query: WeightedVector, candidate: WeightedVector) -> float:
    """dot / (|q| * |a|); zero-norm vectors score 0."""
    if query.norm == 0.0 or candidate.norm == 0.0:
        return 0.0
    return _dot(query, candidate) / (query.norm * candidate.norm)


def jaccard_distance(query: WeightedVector, candidate: WeightedVector) -> float:
    """1 - |support intersection| / |support union|, on binary vectors."""
    if query.scheme != "binary" or candidate.scheme != "binary":
        raise ValueError("jaccard distance requires binary vectors")
    a, b = set(query.indices), set(candidate.indices)
    union = len(a | b)
    if union == 0:
        return 1.0
    return 1.0 - len(a & b) / union


def euclidean_normalized(query: WeightedVector, candidate: WeightedVector) -> float:
    """|q - a| divided by the candidate's present-feature count."""
    if candidate.n_features_present == 0:
        raise ValueError("candidate has no present features")
    total = 0.0
    i = j = 0
    ai, aw, bi, bw = query.indices, query.weights, candidate.indices, candidate.weights
    while i < len(ai) and j < len(bi):
        if ai[i] == bi[j]:
            d = aw[i] - bw[j]
            total += d * d
            i += 1
            j += 1
        elif ai[i] < bi[j]:
            total += aw[i] * aw[i]
            i += 1
        else:
            total += bw[j] * bw[j]
            j += 1
    total += sum(w * w for w in aw[i:])
    total += sum(w * w for w in bw[j:])
    return total**0.5 / candidate.n_features_present


# ---------------------------------------------------------------------------
# Inverted index


@dataclass
class ArticleIndex:
    """Immutable postings over one corpus of article vectors."""

    representation: str
    scheme: str
    vocabulary: Vocabulary
    pmids: tuple[str, ...]
    pmid_numeric: np.ndarray  # int64, tie-break key
    norms: np.ndarray  # float64 per article
    norms_sq: np.ndarray  # exact sum of squared weights (not norms**2)
    n_present: np.ndarray  # int64 per article
    postings: dict[int, tuple[np.ndarray, np.ndarray]] = field(repr=False)
    vectors: tuple[WeightedVector, ...] = field(repr=False, default=())

    @property
    def n_articles(self) -> int:
        return len(self.pmids)

    def matches(self, config: MethodConfig) -> bool:
        return (
            config.representation == self.representation and config.scheme == self.scheme
        )


def build_index(article_vectors: Sequence[WeightedVector], vocabulary: Vocabulary) -> ArticleIndex:
    """Group article vectors into postings keyed by feature index."""
    if not article_vectors:
        raise ValueError("empty corpus")
    schemes = {v.scheme for v in article_vectors}
    if len(schemes) != 1:
        raise ValueError(f"mixed weighting schemes in one index: {sorted(schemes)}")

    rows: dict[int, list[int]] = {}
    weights: dict[int, list[float]] = {}
    for row, vec in enumerate(article_vectors):
        for idx, w in zip(vec.indices, vec.weights):
            rows.setdefault(idx, []).append(row)
            weights.setdefault(idx, []).append(w)
    postings = {
        idx: (np.asarray(rows[idx], dtype=np.int64), np.asarray(weights[idx], dtype=np.float64))
        for idx in sorted(rows)
    }
    return ArticleIndex(
        representation=vocabulary.representation,
        scheme=schemes.pop(),
        vocabulary=vocabulary,
        pmids=tuple(v.doc_id for v in article_vectors),
        pmid_numeric=np.asarray([int(v.doc_id) for v in article_vectors], dtype=np.int64),
        norms=np.asarray([v.norm for v in article_vectors], dtype=np.float64),
        norms_sq=np.asarray(
            [sum(w * w for w in v.weights) for v in article_vectors], dtype=np.float64
        ),
        n_present=np.asarray([v.n_features_present for v in article_vectors], dtype=np.int64),
        postings=postings,
        vectors=tuple(article_vectors),
    )


def _accumulate_dot(query: WeightedVector, index: ArticleIndex) -> np.ndarray:
    scores = np.zeros(index.n_articles, dtype=np.float64)
    for idx, w in zip(query.indices, query.weights):
        posting = index.postings.get(idx)
        if posting is not None:
            rows, weights = posting
            scores[rows] += w * weights
    return scores


def _accumulate_overlap(query: WeightedVector, index: ArticleIndex) -> np.ndarray:
    overlap = np.zeros(index.n_articles, dtype=np.int64)
    for idx in query.indices:
        posting = index.postings.get(idx)
        if posting is not None:
            overlap[posting[0]] += 1
    return overlap


def rank(
    query: WeightedVector,
    index: ArticleIndex,
    config: MethodConfig,
    k: int | None = None,
) -> RankedCandidates:
    """Order every article in the index against one registration query."""
    if not index.matches(config):
        raise IndexConfigMismatchError(
            f"index is {index.representation}/{index.scheme}, requested {config.label()}"
        )
    if query.n_features_present == 0:
        raise UnrankableRegistrationError(
            f"unrankable registration {query.doc_id}: empty feature vector"
        )

    excluded: tuple[str, ...] = ()
    if config.measure == "cosine":
        dots = _accumulate_dot(query, index)
        scores = np.zeros_like(dots)
        nonzero = index.norms > 0.0
        scores[nonzero] = dots[nonzero] / (query.norm * index.norms[nonzero])
        order_key = -scores
        keep = np.ones(index.n_articles, dtype=bool)
    elif config.measure == "jaccard":
        overlap = _accumulate_overlap(query, index)
        union = query.n_features_present + index.n_present - overlap
        scores = 1.0 - overlap / union
        order_key = scores
        keep = np.ones(index.n_articles, dtype=bool)
    else:  # euclidean_normalized
        dots = _accumulate_dot(query, index)
        # Exact squared norms keep binary-vector distances in integer
        # arithmetic; squaring the cached sqrt norms would lose a ulp.
        query_sq = sum(w * w for w in query.weights)
        sq = query_sq + index.norms_sq - 2.0 * dots
        np.maximum(sq, 0.0, out=sq)
        keep = index.n_present > 0
        scores = np.full(index.n_articles, np.inf)
        scores[keep] = np.sqrt(sq[keep]) / index.n_present[keep]
        order_key = scores
        if not keep.all():
            excluded = tuple(index.pmids[i] for i in np.flatnonzero(~keep))
            logger.info(
                "%s: excluded %d zero-feature candidates from euclidean ranking",
                query.doc_id, len(excluded),
            )

    order = np.lexsort((index.pmid_numeric, order_key))
    order = order[keep[order]]
    if k is not None:
        order = order[:k]
    ranking = tuple((index.pmids[i], float(scores[i])) for i in order)
    return RankedCandidates(
        nct_id=query.doc_id,
        config=config,
        ranking=ranking,
        truncated_at=k,
        excluded_pmids=excluded,
    )


# ---------------------------------------------------------------------------
# Persistence: versioned binary container with a config fingerprint


def save_index(index: ArticleIndex, path) -> None:
    """Write the index (vectors + vocabulary) to a deterministic binary file."""
    header = {
        "format_version": _INDEX_VERSION,
        "representation": index.representation,
        "scheme": index.scheme,
        "n_articles": index.n_articles,
        "pmids": list(index.pmids),
        "vocabulary": index.vocabulary.to_dict(),
        "entry_counts": [v.n_features_present for v in index.vectors],
    }
    payload = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_INDEX_MAGIC)
        fh.write(struct.pack("<I", _INDEX_VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for vec in index.vectors:
            fh.write(np.asarray(vec.indices, dtype="<u4").tobytes())
            fh.write(np.asarray(vec.weights, dtype="<f8").tobytes())


def load_index(path, expected: MethodConfig | None = None) -> ArticleIndex:
    """Load a persisted index, checking the embedded config fingerprint."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _INDEX_MAGIC:
            raise ValueError(f"{path}: not an index file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _INDEX_VERSION:
            raise ValueError(f"{path}: unsupported index version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if expected is not None and (
            header["representation"] != expected.representation
            or header["scheme"] != expected.scheme
        ):
            raise IndexConfigMismatchError(
                f"{path}: index is {header['representation']}/{header['scheme']}, "
                f"requested {expected.label()}"
            )
        vocabulary = Vocabulary.from_dict(header["vocabulary"])
        vectors = []
        for pmid, n in zip(header["pmids"], header["entry_counts"]):
            indices = np.frombuffer(fh.read(4 * n), dtype="<u4")
            weights = tuple(float(w) for w in np.frombuffer(fh.read(8 * n), dtype="<f8"))
            # Same sequential reduction as vector construction, so loaded
            # vectors are bit-identical to freshly built ones.
            norm = float(sum(w * w for w in weights)) ** 0.5
            vectors.append(
                WeightedVector(
                    doc_id=pmid,
                    indices=tuple(int(i) for i in indices),
                    weights=weights,
                    scheme=header["scheme"],
                    norm=norm,
                )
            )
    return build_index(vectors, vocabulary)


# ---------------------------------------------------------------------------
# Ranking output


def write_ranking_tsv(ranked: RankedCandidates, fh) -> None:
    """Tab-separated `nct_id, rank, pmid, score`; scores round-trip exactly."""
    for pos, (pmid, score) in enumerate(ranked.ranking, start=1):
        fh.write(f"{ranked.nct_id}\t{pos}\t{pmid}\t{score!r}\n")


def write_ranking_jsonl(ranked: RankedCandidates, fh) -> None:
    for pos, (pmid, score) in enumerate(ranked.ranking, start=1):
        fh.write(
            json.dumps(
                {
                    "nct_id": ranked.nct_id,
                    "rank": pos,
                    "pmid": pmid,
                    "score": score,
                    "config": ranked.config.to_dict(),
                },
                sort_keys=True,
            )
        )
        fh.write("\n")
