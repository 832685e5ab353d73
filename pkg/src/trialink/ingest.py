"""Ingestion of trial registrations and bibliographic articles.

Two source formats are accepted for each corpus: the canonical line-delimited
JSON format (one record object per line) and an XML export (registry-style for
registrations, bibliographic-style for articles). XML is normalized into the
canonical form before filtering, so the rest of the pipeline sees one input
path.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence
from xml.etree import ElementTree

logger = logging.getLogger(__name__)

NCT_ID_RE = re.compile(r"NCT\d{8}$")
PMID_RE = re.compile(r"\d+$")

_MONTHS = {
    name: i + 1
    for i, name in enumerate(
        ["january", "february", "march", "april", "may", "june",
         "july", "august", "september", "october", "november", "december"]
    )
}
_MONTHS.update({name[:3]: num for name, num in _MONTHS.items()})


class IngestError(Exception):
    """Hard ingestion failure that aborts the run."""


class DuplicateIdError(IngestError):
    """The same record identifier appeared twice in one corpus."""


class Rejection(NamedTuple):
    id: str
    reason: str


@dataclass(frozen=True)
class Registration:
    """One trial registry entry in canonical form."""

    nct_id: str
    brief_title: str = ""
    official_title: str = ""
    brief_summary: str = ""
    detailed_description: str = ""
    conditions: tuple[str, ...] = ()
    received_date: date | None = None
    completion_date: date | None = None
    overall_status: str = "other"  # completed | other
    study_type: str = "other"  # interventional | observational | other
    phase: str | None = None
    enrollment: int | None = None
    funding_class: str | None = None  # industry | mixed | no-industry

    def text_fields(self) -> list[str]:
        """The fields used for feature extraction, conditions included."""
        return [
            self.brief_title,
            self.official_title,
            self.brief_summary,
            self.detailed_description,
            *self.conditions,
        ]

    def to_record(self) -> dict:
        return {
            "nct_id": self.nct_id,
            "brief_title": self.brief_title,
            "official_title": self.official_title,
            "brief_summary": self.brief_summary,
            "detailed_description": self.detailed_description,
            "conditions": list(self.conditions),
            "received_date": _date_str(self.received_date),
            "completion_date": _date_str(self.completion_date),
            "overall_status": self.overall_status,
            "study_type": self.study_type,
            "phase": self.phase,
            "enrollment": self.enrollment,
            "funding_class": self.funding_class,
        }


@dataclass(frozen=True)
class Article:
    """One bibliographic record in canonical form."""

    pmid: str
    title: str
    abstract: str = ""
    publication_date: date | None = None
    publication_types: frozenset[str] = frozenset()
    linked_nct_ids: frozenset[str] = frozenset()

    def text_fields(self) -> list[str]:
        return [self.title, self.abstract]

    def to_record(self) -> dict:
        return {
            "pmid": self.pmid,
            "title": self.title,
            "abstract": self.abstract,
            "publication_date": _date_str(self.publication_date),
            "publication_types": sorted(self.publication_types),
            "linked_nct_ids": sorted(self.linked_nct_ids),
        }


class ReportedLink(NamedTuple):
    nct_id: str
    pmid: str


@dataclass(frozen=True)
class CorpusFilterConfig:
    """Inclusion filters applied at ingestion time.

    Defaults correspond to completed interventional registrations received on
    or after 2007-10-01 and trial-report articles published in the same
    period.
    """

    min_received_date: date | None = date(2007, 10, 1)
    require_completed: bool = True
    require_interventional: bool = True
    min_publication_date: date | None = date(2007, 10, 1)
    required_publication_types: frozenset[str] = frozenset(
        {"clinical trial", "controlled clinical trial", "randomized controlled trial"}
    )
    excluded_publication_types: frozenset[str] = frozenset({"meta-analysis", "review"})

    def __post_init__(self):
        required = {t.casefold() for t in self.required_publication_types}
        excluded = {t.casefold() for t in self.excluded_publication_types}
        if required & excluded:
            raise ValueError(
                "required and excluded publication types overlap: %s" % sorted(required & excluded)
            )

    @classmethod
    def permissive(cls) -> "CorpusFilterConfig":
        """A config with every filter disabled (useful for fixtures)."""
        return cls(
            min_received_date=None,
            require_completed=False,
            require_interventional=False,
            min_publication_date=None,
            required_publication_types=frozenset(),
            excluded_publication_types=frozenset(),
        )


@dataclass
class IngestResult:
    """Included records plus an auditable account of everything excluded."""

    records: list = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)  # failed a filter
    errors: list[Rejection] = field(default_factory=list)  # malformed, skipped
    warnings: list[str] = field(default_factory=list)

    @property
    def n_input(self) -> int:
        return len(self.records) + len(self.rejections) + len(self.errors)

    def log_entries(self) -> list[Rejection]:
        return self.rejections + self.errors


def _date_str(d: date | None) -> str | None:
    return d.isoformat() if d is not None else None


def parse_partial_date(text: str | None) -> date | None:
    """Parse a date that may lack a day or month component.

    Missing day completes to the first of the month; missing month to
    January 1. Accepts ISO forms (2008-04, 2008) and registry/bibliographic
    prose forms ("April 14, 2017", "Jun 2010", "2008 Jan-Feb").
    """
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    m = re.match(r"^(\d{4})(?:-(\d{1,2}))?(?:-(\d{1,2}))?$", text)
    if m:
        year, month, day = int(m.group(1)), int(m.group(2) or 1), int(m.group(3) or 1)
        return date(year, month, day)
    # Prose forms: tokenize into words/numbers and pick year, month name, day.
    tokens = re.findall(r"[A-Za-z]+|\d+", text)
    year = month = day = None
    for tok in tokens:
        if tok.isdigit():
            if len(tok) == 4 and year is None:
                year = int(tok)
            elif day is None and 1 <= int(tok) <= 31:
                day = int(tok)
        elif month is None:
            month = _MONTHS.get(tok.casefold())
    if year is None:
        raise ValueError(f"unparseable date: {text!r}")
    return date(year, month or 1, day or 1)


# ---------------------------------------------------------------------------
# Canonical record construction


def registration_from_record(rec: Mapping) -> Registration:
    nct_id = str(rec.get("nct_id") or "").strip()
    if not NCT_ID_RE.match(nct_id):
        raise ValueError(f"invalid nct_id: {nct_id!r}")
    received = parse_partial_date(rec.get("received_date"))
    if received is None:
        raise ValueError(f"{nct_id}: missing received_date")
    enrollment = rec.get("enrollment")
    if enrollment is not None:
        enrollment = int(enrollment)
        if enrollment < 0:
            raise ValueError(f"{nct_id}: negative enrollment")
    reg = Registration(
        nct_id=nct_id,
        brief_title=str(rec.get("brief_title") or ""),
        official_title=str(rec.get("official_title") or ""),
        brief_summary=str(rec.get("brief_summary") or ""),
        detailed_description=str(rec.get("detailed_description") or ""),
        conditions=tuple(str(c) for c in rec.get("conditions") or ()),
        received_date=received,
        completion_date=parse_partial_date(rec.get("completion_date")),
        overall_status=_normalize_status(rec.get("overall_status")),
        study_type=_normalize_study_type(rec.get("study_type")),
        phase=rec.get("phase") or None,
        enrollment=enrollment,
        funding_class=rec.get("funding_class") or None,
    )
    if not any(f.strip() for f in reg.text_fields()):
        raise ValueError(f"{nct_id}: all text fields empty")
    return reg


def article_from_record(rec: Mapping) -> Article:
    pmid = str(rec.get("pmid") or "").strip()
    if not PMID_RE.match(pmid):
        raise ValueError(f"invalid pmid: {pmid!r}")
    title = str(rec.get("title") or "")
    if not title.strip():
        raise ValueError(f"pmid {pmid}: empty title")
    linked = frozenset(str(n).strip() for n in rec.get("linked_nct_ids") or ())
    bad = [n for n in linked if not NCT_ID_RE.match(n)]
    if bad:
        raise ValueError(f"pmid {pmid}: invalid linked nct ids {bad}")
    return Article(
        pmid=pmid,
        title=title,
        abstract=str(rec.get("abstract") or ""),
        publication_date=parse_partial_date(rec.get("publication_date")),
        publication_types=frozenset(str(t) for t in rec.get("publication_types") or ()),
        linked_nct_ids=linked,
    )


def _normalize_status(value) -> str:
    return "completed" if str(value or "").strip().casefold() == "completed" else "other"


def _normalize_study_type(value) -> str:
    v = str(value or "").strip().casefold()
    if v.startswith("intervention"):
        return "interventional"
    if v.startswith("observation"):
        return "observational"
    return "other"


# ---------------------------------------------------------------------------
# Filters


def registration_filter_reason(reg: Registration, config: CorpusFilterConfig) -> str | None:
    """First failed filter for a registration, or None if it passes."""
    if config.min_received_date is not None:
        if reg.received_date is None or reg.received_date < config.min_received_date:
            return "received_date"
    if config.require_completed and reg.overall_status != "completed":
        return "overall_status"
    if config.require_interventional and reg.study_type != "interventional":
        return "study_type"
    return None


def article_filter_reason(art: Article, config: CorpusFilterConfig) -> str | None:
    """First failed filter for an article, or None if it passes.

    Articles without a publication date pass the date filter (they stay in
    the candidate pool) and are only excluded later at target selection.
    """
    types = {t.casefold() for t in art.publication_types}
    required = {t.casefold() for t in config.required_publication_types}
    excluded = {t.casefold() for t in config.excluded_publication_types}
    if not art.linked_nct_ids and required and not (types & required):
        return "publication_type"
    if types & excluded:
        return "excluded publication type"
    if config.min_publication_date is not None and art.publication_date is not None:
        if art.publication_date < config.min_publication_date:
            return "publication_date"
    return None


# ---------------------------------------------------------------------------
# Source handling


def _read_text(source) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, str):
        # A str is a path when it names an existing file; otherwise it must
        # itself look like record content.
        try:
            if Path(source).is_file():
                return Path(source).read_text(encoding="utf-8")
        except OSError:
            pass
        if "\n" in source or source.lstrip()[:1] in ("<", "{"):
            return source
        raise FileNotFoundError(source)
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    return "\n".join(source)  # iterable of lines


def _iter_json_records(text: str) -> Iterator[tuple[int, dict | None, str | None]]:
    """Yield (line_no, record, error) triples for line-delimited JSON."""
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not an object")
            yield line_no, rec, None
        except ValueError as exc:
            yield line_no, None, str(exc)


def _looks_like_xml(text: str) -> bool:
    return text.lstrip()[:1] == "<"


def _ingest(
    text: str,
    build,
    filter_reason,
    id_of,
    xml_records,
) -> IngestResult:
    result = IngestResult()
    seen: set[str] = set()
    if _looks_like_xml(text):
        records: Iterable[tuple[int, dict | None, str | None]] = (
            (i, rec, None) for i, rec in enumerate(xml_records(text), start=1)
        )
    else:
        records = _iter_json_records(text)
    for line_no, rec, error in records:
        if error is not None:
            result.errors.append(Rejection("?", f"malformed record at line {line_no}: {error}"))
            logger.warning("skipping malformed record at line %d: %s", line_no, error)
            continue
        try:
            obj = build(rec)
        except ValueError as exc:
            result.errors.append(Rejection(str(rec.get(id_of) or "?"), f"malformed record: {exc}"))
            logger.warning("skipping malformed record at line %d: %s", line_no, exc)
            continue
        rid = getattr(obj, id_of)
        if rid in seen:
            raise DuplicateIdError(f"duplicate {id_of} {rid}")
        seen.add(rid)
        reason = filter_reason(obj)
        if reason is None:
            result.records.append(obj)
        else:
            result.rejections.append(Rejection(rid, reason))
    return result


def parse_registrations(source, config: CorpusFilterConfig | None = None) -> IngestResult:
    """Ingest a registration corpus, applying the registration filters.

    `source` may be a path, an open file, or an iterable of canonical JSON
    lines; XML exports are detected by content.
    """
    config = config or CorpusFilterConfig()
    return _ingest(
        _read_text(source),
        registration_from_record,
        lambda reg: registration_filter_reason(reg, config),
        "nct_id",
        _registry_xml_records,
    )


def parse_articles(source, config: CorpusFilterConfig | None = None) -> IngestResult:
    """Ingest an article corpus, applying the article filters."""
    config = config or CorpusFilterConfig()
    result = _ingest(
        _read_text(source),
        article_from_record,
        lambda art: article_filter_reason(art, config),
        "pmid",
        _bibliographic_xml_records,
    )
    for art in result.records:
        if art.publication_date is None:
            result.warnings.append(f"pmid {art.pmid}: missing publication_date")
    return result


# ---------------------------------------------------------------------------
# XML converters (normalize exports into canonical record dicts)


def _registry_xml_records(text: str) -> Iterator[dict]:
    root = ElementTree.fromstring(text)
    studies = [root] if root.tag == "clinical_study" else root.iter("clinical_study")
    for study in studies:
        yield registry_xml_to_record(study)


def registry_xml_to_record(study: ElementTree.Element) -> dict:
    """Map one registry-export ``<clinical_study>`` element to a canonical dict."""

    def text_of(*paths: str) -> str | None:
        for path in paths:
            el = study.find(path)
            if el is not None and el.text and el.text.strip():
                return re.sub(r"\s+", " ", el.text).strip()
        return None

    sponsors = study.find("sponsors")
    funding = None
    if sponsors is not None:
        classes = {
            re.sub(r"\s+", " ", el.text or "").strip().casefold()
            for el in sponsors.iter("agency_class")
            if el.text and el.text.strip()
        }
        if classes:
            if classes == {"industry"}:
                funding = "industry"
            elif "industry" in classes:
                funding = "mixed"
            else:
                funding = "no-industry"
    return {
        "nct_id": text_of("id_info/nct_id", "nct_id"),
        "brief_title": text_of("brief_title") or "",
        "official_title": text_of("official_title") or "",
        "brief_summary": text_of("brief_summary/textblock", "brief_summary") or "",
        "detailed_description": text_of("detailed_description/textblock", "detailed_description") or "",
        "conditions": [
            re.sub(r"\s+", " ", el.text).strip()
            for el in study.findall("condition")
            if el.text and el.text.strip()
        ],
        "received_date": text_of("study_first_submitted", "firstreceived_date", "received_date"),
        "completion_date": text_of("completion_date", "primary_completion_date"),
        "overall_status": text_of("overall_status"),
        "study_type": text_of("study_type"),
        "phase": text_of("phase"),
        "enrollment": text_of("enrollment"),
        "funding_class": None if funding is None else funding,
    }


def _bibliographic_xml_records(text: str) -> Iterator[dict]:
    root = ElementTree.fromstring(text)
    articles = [root] if root.tag == "PubmedArticle" else root.iter("PubmedArticle")
    for article in articles:
        yield bibliographic_xml_to_record(article)


def bibliographic_xml_to_record(entry: ElementTree.Element) -> dict:
    """Map one ``<PubmedArticle>`` element to a canonical dict."""
    citation = entry.find("MedlineCitation")
    if citation is None:
        citation = entry
    article = citation.find("Article")
    pmid = citation.findtext("PMID", default="").strip()

    title = ""
    abstract = ""
    pub_types: list[str] = []
    pub_date = None
    if article is not None:
        title = re.sub(r"\s+", " ", article.findtext("ArticleTitle", default="")).strip()
        abstract_el = article.find("Abstract")
        if abstract_el is not None:
            parts = [
                re.sub(r"\s+", " ", el.text or "").strip()
                for el in abstract_el.findall("AbstractText")
            ]
            abstract = " ".join(p for p in parts if p)
        pub_types = [
            re.sub(r"\s+", " ", el.text or "").strip()
            for el in article.findall("PublicationTypeList/PublicationType")
            if el.text and el.text.strip()
        ]
        pub_date = _bibliographic_date(article)

    # NCT numbers live in data-bank accessions or OtherID entries.
    accessions: set[str] = set()
    if article is not None:
        for acc in article.findall("DataBankList/DataBank/AccessionNumberList/AccessionNumber"):
            if acc.text:
                accessions.add(acc.text.strip())
    for other in citation.findall("OtherID"):
        if other.text:
            accessions.add(other.text.strip())
    linked = sorted(a for a in accessions if NCT_ID_RE.match(a))

    return {
        "pmid": pmid,
        "title": title,
        "abstract": abstract,
        "publication_date": pub_date,
        "publication_types": pub_types,
        "linked_nct_ids": linked,
    }


def _bibliographic_date(article: ElementTree.Element) -> str | None:
    for el in (article.find("ArticleDate"), article.find("Journal/JournalIssue/PubDate")):
        if el is None:
            continue
        year = el.findtext("Year")
        if year:
            parts = [year.strip()]
            month = (el.findtext("Month") or "").strip()
            if month:
                num = _MONTHS.get(month.casefold()) if not month.isdigit() else int(month)
                if num:
                    parts.append(f"{num:02d}")
                    day = (el.findtext("Day") or "").strip()
                    if day.isdigit():
                        parts.append(f"{int(day):02d}")
            return "-".join(parts)
        medline = el.findtext("MedlineDate")
        if medline:
            m = re.search(r"\d{4}", medline)
            if m:
                month = next(
                    (num for tok in re.findall(r"[A-Za-z]+", medline)
                     if (num := _MONTHS.get(tok.casefold()))),
                    None,
                )
                return f"{m.group(0)}-{month:02d}" if month else m.group(0)
    return None


# ---------------------------------------------------------------------------
# Reported links and corpus statistics


def extract_reported_links(
    registrations: Sequence[Registration], articles: Sequence[Article]
) -> tuple[list[ReportedLink], list[ReportedLink]]:
    """Collect (nct_id, pmid) pairs from article metadata.

    Returns (links, dangling): links whose registration is absent from the
    ingested corpus are dropped into `dangling` and logged.
    """
    known = {reg.nct_id for reg in registrations}
    links: set[ReportedLink] = set()
    dangling: list[ReportedLink] = []
    for art in articles:
        for nct_id in sorted(art.linked_nct_ids):
            link = ReportedLink(nct_id, art.pmid)
            if nct_id in known:
                links.add(link)
            else:
                dangling.append(link)
                logger.info("dropping link to non-ingested registration: %s -> %s", nct_id, art.pmid)
    return sorted(links), sorted(dangling)


@dataclass
class FrequencyTable:
    """Feature occurrence distribution for one corpus."""

    corpus: str
    n_unique: int
    n_at_or_above_threshold: int
    histogram: dict[int, int]  # occurrence count -> number of features

    def rows(self) -> list[tuple[int, int]]:
        return sorted(self.histogram.items())


@dataclass
class CorpusStats:
    representation: str
    threshold: int
    registrations: FrequencyTable
    articles: FrequencyTable
    n_unique_union: int
    n_shared_at_or_above_threshold: int  # pruned-vocabulary size

    def to_dict(self) -> dict:
        return {
            "representation": self.representation,
            "threshold": self.threshold,
            "n_unique_union": self.n_unique_union,
            "n_shared_at_or_above_threshold": self.n_shared_at_or_above_threshold,
            "corpora": {
                t.corpus: {
                    "n_unique": t.n_unique,
                    "n_at_or_above_threshold": t.n_at_or_above_threshold,
                    "histogram": {str(k): v for k, v in t.rows()},
                }
                for t in (self.registrations, self.articles)
            },
        }


def _occurrence_totals(features_per_doc: Iterable[Mapping[str, int]]) -> Counter:
    totals: Counter = Counter()
    for counts in features_per_doc:
        totals.update(counts)
    return totals


def corpus_stats(
    registration_features: Iterable[Mapping[str, int]],
    article_features: Iterable[Mapping[str, int]],
    representation: str,
    threshold: int = 2,
) -> CorpusStats:
    """Occurrence histograms per corpus plus pruning-rule counts."""
    reg_totals = _occurrence_totals(registration_features)
    art_totals = _occurrence_totals(article_features)
    tables = []
    for corpus, totals in (("registrations", reg_totals), ("articles", art_totals)):
        hist = Counter(totals.values())
        tables.append(
            FrequencyTable(
                corpus=corpus,
                n_unique=len(totals),
                n_at_or_above_threshold=sum(1 for c in totals.values() if c >= threshold),
                histogram=dict(hist),
            )
        )
    shared = sum(
        1
        for key, count in reg_totals.items()
        if count >= threshold and art_totals.get(key, 0) >= threshold
    )
    return CorpusStats(
        representation=representation,
        threshold=threshold,
        registrations=tables[0],
        articles=tables[1],
        n_unique_union=len(set(reg_totals) | set(art_totals)),
        n_shared_at_or_above_threshold=shared,
    )


# ---------------------------------------------------------------------------
# Canonical serialization


def write_canonical(records: Iterable[Registration | Article], path) -> None:
    """Write records in the canonical line-delimited format."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_record(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def write_rejection_log(entries: Iterable[Rejection], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps({"id": entry.id, "reason": entry.reason}, ensure_ascii=False))
            fh.write("\n")
