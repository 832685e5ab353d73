"""Ties ingested corpora to vocabularies, vectors, and indexes.

The engine owns the per-representation feature caches so the CLI, the
evaluation harness, and the HTTP service all rank through the same path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .features import (
    ConceptLexicon,
    DocumentFeatures,
    Vocabulary,
    build_vocabulary,
    extract_features,
    project,
)
from .ingest import Article, Registration
from .similarity import ArticleIndex, MethodConfig, RankedCandidates, build_index, rank
from .weighting import WeightedVector, weight_vector


@dataclass
class LinkageEngine:
    registrations: Sequence[Registration]
    articles: Sequence[Article]
    lexicon: ConceptLexicon | None = None
    pruning: str = "occurrence"

    _reg_by_id: dict = field(init=False, repr=False)
    _art_by_id: dict = field(init=False, repr=False)
    _features: dict = field(init=False, default_factory=dict, repr=False)
    _reg_feature_maps: dict = field(init=False, default_factory=dict, repr=False)
    _vocabularies: dict = field(init=False, default_factory=dict, repr=False)
    _indexes: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        self._reg_by_id = {r.nct_id: r for r in self.registrations}
        self._art_by_id = {a.pmid: a for a in self.articles}
        if len(self._reg_by_id) != len(self.registrations):
            raise ValueError("duplicate nct_id in registration corpus")
        if len(self._art_by_id) != len(self.articles):
            raise ValueError("duplicate pmid in article corpus")

    def registration(self, nct_id: str) -> Registration:
        return self._reg_by_id[nct_id]

    def article(self, pmid: str) -> Article:
        return self._art_by_id[pmid]

    def has_registration(self, nct_id: str) -> bool:
        return nct_id in self._reg_by_id

    def features(self, representation: str) -> tuple[list[DocumentFeatures], list[DocumentFeatures]]:
        """(registration features, article features), cached per representation."""
        if representation not in self._features:
            reg = [
                extract_features(r.nct_id, r.text_fields(), representation, self.lexicon)
                for r in self.registrations
            ]
            art = [
                extract_features(a.pmid, a.text_fields(), representation, self.lexicon)
                for a in self.articles
            ]
            self._features[representation] = (reg, art)
        return self._features[representation]

    def vocabulary(self, representation: str) -> Vocabulary:
        if representation not in self._vocabularies:
            reg, art = self.features(representation)
            self._vocabularies[representation] = build_vocabulary(
                reg, art, representation, pruning=self.pruning
            )
        return self._vocabularies[representation]

    def index(self, representation: str, scheme: str) -> ArticleIndex:
        key = (representation, scheme)
        if key not in self._indexes:
            vocab = self.vocabulary(representation)
            _, art_features = self.features(representation)
            vectors = [
                weight_vector(f.doc_id, project(f, vocab), vocab, scheme)
                for f in art_features
            ]
            self._indexes[key] = build_index(vectors, vocab)
        return self._indexes[key]

    def attach_index(self, index: ArticleIndex) -> None:
        """Adopt a persisted index (and its vocabulary) instead of rebuilding."""
        self._indexes[(index.representation, index.scheme)] = index
        self._vocabularies.setdefault(index.representation, index.vocabulary)

    def query_vector(self, nct_id: str, representation: str, scheme: str) -> WeightedVector:
        reg = self._reg_by_id[nct_id]
        vocab = self.vocabulary(representation)
        if representation not in self._reg_feature_maps:
            if representation in self._features:
                reg_features, _ = self._features[representation]
            else:
                # Prebuilt-index path: only registration features are needed.
                reg_features = [
                    extract_features(r.nct_id, r.text_fields(), representation, self.lexicon)
                    for r in self.registrations
                ]
            self._reg_feature_maps[representation] = {f.doc_id: f for f in reg_features}
        feats = self._reg_feature_maps[representation][nct_id]
        return weight_vector(nct_id, project(feats, vocab), vocab, scheme)

    def rank(self, nct_id: str, config: MethodConfig, k: int | None = None) -> RankedCandidates:
        if nct_id not in self._reg_by_id:
            raise KeyError(f"unknown registration: {nct_id}")
        query = self.query_vector(nct_id, config.representation, config.scheme)
        return rank(query, self.index(config.representation, config.scheme), config, k=k)
