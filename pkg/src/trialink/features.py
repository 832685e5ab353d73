"""Feature extraction: normalized terms, dictionary concepts, and the
shared pruned vocabulary.

A document becomes a multiset of features under one of two representations:
`term` (normalized word tokens) or `concept` (controlled-vocabulary ids
assigned by a greedy longest-match dictionary tagger). The vocabulary keeps
only features seen at least twice in each corpus and fixes a dense,
lexicographic index used by every downstream vector.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

REPRESENTATIONS = ("term", "concept")

# A token is a maximal run of word characters, underscore excluded; every
# other character is treated as punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+")


class VocabularyError(Exception):
    """Raised when the pruning rule leaves nothing to index."""


def tokenize(text: str) -> list[str]:
    """Case-folded tokens with punctuation stripped; digits are retained."""
    return _TOKEN_RE.findall(text.casefold())


@dataclass(frozen=True)
class DocumentFeatures:
    """Feature occurrence counts for one document under one representation."""

    doc_id: str
    counts: dict[str, int]

    def __post_init__(self):
        bad = {k: v for k, v in self.counts.items() if v < 1}
        if bad:
            raise ValueError(f"{self.doc_id}: non-positive feature counts {bad}")


def extract_term_features(doc_id: str, fields: Sequence[str]) -> DocumentFeatures:
    """Multiset union of tokens over all text fields."""
    counts: Counter = Counter()
    for text in fields:
        counts.update(tokenize(text))
    return DocumentFeatures(doc_id, dict(counts))


@dataclass
class ConceptLexicon:
    """Surface-phrase dictionary mapping normalized phrases to concept ids."""

    entries: dict[str, str] = field(default_factory=dict)
    max_phrase_len: int = 5

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], max_phrase_len: int = 5) -> "ConceptLexicon":
        """Build from (surface_phrase, concept_id) pairs.

        Phrases are normalized with the shared tokenizer. If one phrase maps
        to several concepts, the lexicographically smallest id wins.
        """
        entries: dict[str, str] = {}
        for phrase, concept_id in pairs:
            tokens = tokenize(phrase)
            if not tokens:
                continue
            if len(tokens) > max_phrase_len:
                logger.warning(
                    "lexicon phrase longer than max_phrase_len=%d, skipping: %r",
                    max_phrase_len, phrase,
                )
                continue
            key = " ".join(tokens)
            concept_id = concept_id.strip()
            if not concept_id:
                continue
            if key in entries and entries[key] != concept_id:
                keep = min(entries[key], concept_id)
                logger.warning(
                    "phrase %r maps to multiple concepts (%s, %s); keeping %s",
                    key, entries[key], concept_id, keep,
                )
                entries[key] = keep
            else:
                entries[key] = concept_id
        return cls(entries=entries, max_phrase_len=max_phrase_len)

    @classmethod
    def from_tsv(cls, path, max_phrase_len: int = 5) -> "ConceptLexicon":
        """Load `surface_phrase<TAB>concept_id` lines; `#` starts a comment."""
        pairs = []
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 2 tab-separated fields")
            pairs.append((parts[0], parts[1]))
        return cls.from_pairs(pairs, max_phrase_len=max_phrase_len)

    def tag(self, tokens: Sequence[str]) -> list[str]:
        """Greedy left-to-right longest-match; unmatched tokens emit nothing."""
        concepts: list[str] = []
        i = 0
        n = len(tokens)
        while i < n:
            for length in range(min(self.max_phrase_len, n - i), 0, -1):
                concept = self.entries.get(" ".join(tokens[i : i + length]))
                if concept is not None:
                    concepts.append(concept)
                    i += length
                    break
            else:
                i += 1
        return concepts


def extract_concept_features(
    doc_id: str, fields: Sequence[str], lexicon: ConceptLexicon
) -> DocumentFeatures:
    """Concept multiset from greedy dictionary tagging of each field."""
    counts: Counter = Counter()
    for text in fields:
        counts.update(lexicon.tag(tokenize(text)))
    return DocumentFeatures(doc_id, dict(counts))


def extract_features(doc_id, fields, representation: str, lexicon: ConceptLexicon | None = None):
    if representation == "term":
        return extract_term_features(doc_id, fields)
    if representation == "concept":
        if lexicon is None:
            raise ValueError("concept representation requires a lexicon")
        return extract_concept_features(doc_id, fields, lexicon)
    raise ValueError(f"unknown representation: {representation!r}")


@dataclass(frozen=True)
class Vocabulary:
    """Dense feature index over the pruned shared vocabulary.

    Document frequency and corpus size come from the article corpus only;
    they weight registration and article vectors alike.
    """

    representation: str
    keys: tuple[str, ...]  # lexicographically sorted; position = dense index
    reg_occurrence: tuple[int, ...]
    art_occurrence: tuple[int, ...]
    art_doc_frequency: tuple[int, ...]
    n_articles: int
    pruning: str = "occurrence"  # occurrence | document_frequency
    index_of: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index_of", {k: i for i, k in enumerate(self.keys)})

    def __len__(self) -> int:
        return len(self.keys)

    def to_dict(self) -> dict:
        return {
            "representation": self.representation,
            "pruning": self.pruning,
            "n_articles": self.n_articles,
            "keys": list(self.keys),
            "reg_occurrence": list(self.reg_occurrence),
            "art_occurrence": list(self.art_occurrence),
            "art_doc_frequency": list(self.art_doc_frequency),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Vocabulary":
        return cls(
            representation=d["representation"],
            keys=tuple(d["keys"]),
            reg_occurrence=tuple(d["reg_occurrence"]),
            art_occurrence=tuple(d["art_occurrence"]),
            art_doc_frequency=tuple(d["art_doc_frequency"]),
            n_articles=d["n_articles"],
            pruning=d.get("pruning", "occurrence"),
        )


def build_vocabulary(
    registration_features: Sequence[DocumentFeatures],
    article_features: Sequence[DocumentFeatures],
    representation: str,
    min_count: int = 2,
    pruning: str = "occurrence",
) -> Vocabulary:
    """Index features found at least `min_count` times in both corpora.

    `pruning` selects what is counted: total occurrences (default) or the
    number of documents containing the feature.
    """
    if pruning not in ("occurrence", "document_frequency"):
        raise ValueError(f"unknown pruning mode: {pruning!r}")

    def corpus_counts(docs: Sequence[DocumentFeatures]) -> Counter:
        totals: Counter = Counter()
        for doc in docs:
            if pruning == "occurrence":
                totals.update(doc.counts)
            else:
                totals.update(doc.counts.keys())
        return totals

    reg_counts = corpus_counts(registration_features)
    art_counts = corpus_counts(article_features)
    keys = sorted(
        key
        for key, count in reg_counts.items()
        if count >= min_count and art_counts.get(key, 0) >= min_count
    )
    if not keys:
        raise VocabularyError("pruning left an empty vocabulary; corpora are degenerate")

    doc_freq: Counter = Counter()
    kept = set(keys)
    for doc in article_features:
        doc_freq.update(k for k in doc.counts if k in kept)

    # Occurrence totals are reported for both pruning modes.
    if pruning == "occurrence":
        reg_occ, art_occ = reg_counts, art_counts
    else:
        reg_occ = _occurrences(registration_features, kept)
        art_occ = _occurrences(article_features, kept)

    return Vocabulary(
        representation=representation,
        keys=tuple(keys),
        reg_occurrence=tuple(reg_occ[k] for k in keys),
        art_occurrence=tuple(art_occ[k] for k in keys),
        art_doc_frequency=tuple(doc_freq[k] for k in keys),
        n_articles=len(article_features),
        pruning=pruning,
    )


def _occurrences(docs: Sequence[DocumentFeatures], kept: set[str]) -> Counter:
    totals: Counter = Counter()
    for doc in docs:
        totals.update({k: v for k, v in doc.counts.items() if k in kept})
    return totals


def project(features: DocumentFeatures, vocabulary: Vocabulary) -> dict[int, int]:
    """Counts re-keyed by dense index; out-of-vocabulary features dropped."""
    index_of = vocabulary.index_of
    return {
        index_of[key]: count
        for key, count in features.counts.items()
        if key in index_of
    }


def write_feature_dump(docs: Iterable[DocumentFeatures], representation: str, path) -> None:
    """Debug dump: one `{doc_id, representation, features}` object per line."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc.doc_id,
                        "representation": representation,
                        "features": dict(sorted(doc.counts.items())),
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            fh.write("\n")
