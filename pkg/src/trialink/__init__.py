"""trialink: rank bibliographic articles against clinical-trial registrations.

The pipeline ingests registration and article corpora, extracts term or
dictionary-concept features, prunes a shared vocabulary, weights documents
as binary or tf-idf sparse vectors, and ranks candidate articles per
registration through an inverted index. An evaluation harness reports rank
statistics over link benchmarks, and an HTTP service supports human
screening of ranked candidates.
"""

from .evaluation import Benchmark, EvalReport, evaluate, select_target
from .features import ConceptLexicon, Vocabulary, build_vocabulary, project, tokenize
from .ingest import (
    Article,
    CorpusFilterConfig,
    Registration,
    ReportedLink,
    corpus_stats,
    extract_reported_links,
    parse_articles,
    parse_registrations,
)
from .pipeline import LinkageEngine
from .similarity import (
    ArticleIndex,
    MethodConfig,
    RankedCandidates,
    build_index,
    cosine_similarity,
    euclidean_normalized,
    jaccard_distance,
    legal_configs,
    load_index,
    rank,
    save_index,
)
from .weighting import WeightedVector, binary_vector, tfidf_vector, tfidf_weight

__version__ = "0.1.0"

__all__ = [
    "Article",
    "ArticleIndex",
    "Benchmark",
    "ConceptLexicon",
    "CorpusFilterConfig",
    "EvalReport",
    "LinkageEngine",
    "MethodConfig",
    "RankedCandidates",
    "Registration",
    "ReportedLink",
    "Vocabulary",
    "WeightedVector",
    "binary_vector",
    "build_index",
    "build_vocabulary",
    "corpus_stats",
    "cosine_similarity",
    "euclidean_normalized",
    "evaluate",
    "extract_reported_links",
    "jaccard_distance",
    "legal_configs",
    "load_index",
    "parse_articles",
    "parse_registrations",
    "project",
    "rank",
    "save_index",
    "select_target",
    "tfidf_vector",
    "tfidf_weight",
    "tokenize",
]
