import sys
from datetime import date
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trialink.ingest import Article, Registration, ReportedLink

from gen import make_corpus


def _reg(nct_id: str, summary: str) -> Registration:
    return Registration(
        nct_id=nct_id,
        brief_summary=summary,
        received_date=date(2008, 1, 1),
        completion_date=date(2010, 1, 1),
        overall_status="completed",
        study_type="interventional",
    )


def _art(pmid: str, text: str) -> Article:
    return Article(pmid=pmid, title=text, publication_date=date(2010, 6, 1))


@pytest.fixture(scope="session")
def golden_corpus():
    """Engineered corpus whose benchmark target ranks are exactly [1, 1, 3, 60].

    Each registration's query is a single repeated token; the articles that
    contain the token form an exact score tie, so the target's rank is its
    position in ascending-pmid order among them. Every token occurs at least
    twice per corpus, so nothing is pruned away.
    """
    registrations = [
        _reg("NCT00000001", "apple apple"),
        _reg("NCT00000002", "grape grape"),
        _reg("NCT00000003", "melon melon"),
        _reg("NCT00000004", "zebra zebra"),
    ]
    articles = [
        _art("200001", "apple apple"),
        _art("200002", "grape grape"),
        _art("200003", "melon melon"),
        _art("200004", "melon melon"),
        _art("200005", "melon melon"),
    ]
    articles += [_art(str(300000 + i), "zebra zebra") for i in range(1, 61)]
    links = [
        ReportedLink("NCT00000001", "200001"),
        ReportedLink("NCT00000002", "200002"),
        ReportedLink("NCT00000003", "200005"),
        ReportedLink("NCT00000004", "300060"),
    ]
    return registrations, articles, links


@pytest.fixture(scope="session")
def small_corpus():
    return make_corpus(seed=7, n_articles=60, n_registrations=12, vocab_size=300)
