import random
import statistics
from datetime import date

import numpy as np
import pytest

from trialink.evaluation import (
    Benchmark,
    default_curve_grid,
    evaluate,
    format_results_table,
    recall_curve_rows,
    select_target,
)
from trialink.ingest import Article, Registration, ReportedLink
from trialink.pipeline import LinkageEngine
from trialink.similarity import MethodConfig, legal_configs

from gen import make_corpus
from oracle import brute_force_rank, dense_matrix, dense_row


def _reg(completion=None):
    return Registration(
        nct_id="NCT00000001",
        brief_summary="text",
        received_date=date(2008, 1, 1),
        completion_date=completion,
    )


def _art(pmid, pub):
    return Article(pmid=pmid, title="t", publication_date=pub)


class TestSelectTarget:
    def test_first_post_completion_link(self):
        reg = _reg(date(2010, 6, 30))
        arts = [_art("2", date(2011, 1, 1)), _art("1", date(2010, 1, 1))]
        pmid, reason = select_target(reg, arts)
        assert pmid == "2"
        assert reason is None

    def test_only_pre_completion_link_excludes(self):
        reg = _reg(date(2010, 6, 30))
        pmid, reason = select_target(reg, [_art("1", date(2010, 1, 1))])
        assert pmid is None
        assert reason == "no post-completion link"

    def test_same_date_tie_smaller_pmid(self):
        reg = _reg(date(2010, 6, 30))
        arts = [_art("30", date(2011, 1, 1)), _art("4", date(2011, 1, 1))]
        pmid, _ = select_target(reg, arts)
        assert pmid == "4"

    def test_missing_completion_date(self):
        pmid, reason = select_target(_reg(None), [_art("1", date(2011, 1, 1))])
        assert pmid is None
        assert reason == "missing completion_date"

    def test_undated_links_ignored(self):
        reg = _reg(date(2010, 6, 30))
        arts = [_art("1", None), _art("2", date(2011, 1, 1))]
        pmid, _ = select_target(reg, arts)
        assert pmid == "2"

    def test_strictly_after_completion(self):
        reg = _reg(date(2010, 6, 30))
        pmid, reason = select_target(reg, [_art("1", date(2010, 6, 30))])
        assert pmid is None


@pytest.fixture
def golden_engine(golden_corpus):
    registrations, articles, links = golden_corpus
    engine = LinkageEngine(registrations, articles)
    benchmark = Benchmark("golden", tuple(links), kind="curated")
    return engine, benchmark


class TestEvaluate:
    def test_golden_ranks_1_1_3_60(self, golden_engine):
        engine, benchmark = golden_engine
        config = MethodConfig("term", "tfidf", "cosine")
        report = evaluate(benchmark, engine, config)
        assert sorted(report.ranks.values()) == [1, 1, 3, 60]
        assert report.median_rank == 2.0
        assert report.first_ranked_pct == 50.0
        assert report.recall_at_50_pct == 75.0
        assert report.iqr == (1.0, 17.25)
        assert report.n_registrations == 4
        assert report.excluded == []

    def test_recall_curve_monotone_ending_at_one(self, golden_engine):
        engine, benchmark = golden_engine
        report = evaluate(benchmark, engine, MethodConfig("term", "tfidf", "cosine"))
        recalls = [r for _, r in report.recall_curve]
        assert all(a <= b for a, b in zip(recalls, recalls[1:]))
        assert report.recall_curve[-1] == (report.n_candidates, 1.0)

    def test_byte_identical_reports(self, golden_engine):
        engine, benchmark = golden_engine
        config = MethodConfig("term", "binary", "jaccard")
        a = evaluate(benchmark, engine, config).to_json()
        b = evaluate(benchmark, engine, config).to_json()
        assert a.encode() == b.encode()

    def test_all_rank_one(self):
        regs = [
            Registration(
                nct_id=f"NCT0000000{i}",
                brief_summary=f"tok{i} tok{i}",
                received_date=date(2008, 1, 1),
                completion_date=date(2010, 1, 1),
            )
            for i in range(1, 4)
        ]
        arts = [
            Article(pmid=str(100 + i), title=f"tok{i} tok{i}", publication_date=date(2011, 1, 1))
            for i in range(1, 4)
        ]
        links = [ReportedLink(r.nct_id, str(100 + i)) for i, r in enumerate(regs, start=1)]
        engine = LinkageEngine(regs, arts)
        report = evaluate(Benchmark("b", tuple(links)), engine, MethodConfig("term", "binary", "cosine"))
        assert report.median_rank == 1.0
        assert report.iqr == (1.0, 1.0)
        assert report.first_ranked_pct == 100.0
        assert report.recall_at_50_pct == 100.0

    def test_empty_after_exclusions_raises(self):
        regs = [
            Registration(
                nct_id="NCT00000001",
                brief_summary="alpha alpha",
                received_date=date(2008, 1, 1),
                completion_date=None,  # excluded at target selection
            )
        ]
        arts = [
            Article(pmid="101", title="alpha alpha", publication_date=date(2011, 1, 1)),
            Article(pmid="102", title="alpha alpha", publication_date=date(2011, 1, 1)),
        ]
        engine = LinkageEngine(regs, arts)
        benchmark = Benchmark("b", (ReportedLink("NCT00000001", "101"),))
        with pytest.raises(ValueError, match="empty after exclusions"):
            evaluate(benchmark, engine, MethodConfig("term", "binary", "cosine"))

    def test_excluded_registrations_listed(self, golden_corpus):
        registrations, articles, links = golden_corpus
        extra = Registration(
            nct_id="NCT00000099",
            brief_summary="apple apple",
            received_date=date(2008, 1, 1),
            completion_date=None,
        )
        engine = LinkageEngine(registrations + [extra], articles)
        benchmark = Benchmark(
            "b", tuple(links) + (ReportedLink("NCT00000099", "200001"),)
        )
        report = evaluate(benchmark, engine, MethodConfig("term", "binary", "cosine"))
        assert ("NCT00000099", "missing completion_date") in report.excluded
        assert report.n_registrations == 4


class TestRecallCurve:
    def test_cumulative_counts(self):
        """Ranks [1, 2, 3] -> curve (1, 1/3), (2, 2/3), (3, 1)."""
        regs = []
        arts = []
        links = []
        # melonN articles tie; targets placed at positions 1, 2, 3.
        for i, token in enumerate(("ape", "bee", "cat"), start=1):
            regs.append(
                Registration(
                    nct_id=f"NCT0000000{i}",
                    brief_summary=f"{token} {token}",
                    received_date=date(2008, 1, 1),
                    completion_date=date(2010, 1, 1),
                )
            )
            for j in range(i):
                arts.append(
                    Article(
                        pmid=f"{i}0{j}", title=f"{token} {token}",
                        publication_date=date(2011, 1, 1),
                    )
                )
            links.append(ReportedLink(f"NCT0000000{i}", f"{i}0{i - 1}"))
        engine = LinkageEngine(regs, arts)
        report = evaluate(
            Benchmark("b", tuple(links)), engine, MethodConfig("term", "binary", "cosine"),
            grid=[1, 2, 3],
        )
        assert report.recall_curve == [
            (1, pytest.approx(1 / 3)),
            (2, pytest.approx(2 / 3)),
            (3, 1.0),
        ]

    def test_single_rank_one_constant(self, golden_engine):
        engine, _ = golden_engine
        benchmark = Benchmark("one", (ReportedLink("NCT00000001", "200001"),))
        report = evaluate(benchmark, engine, MethodConfig("term", "binary", "cosine"), grid=[1, 5, 10])
        assert [r for _, r in report.recall_curve] == [1.0, 1.0, 1.0]

    def test_recall_at_zero_is_zero(self, golden_engine):
        engine, benchmark = golden_engine
        report = evaluate(
            benchmark, engine, MethodConfig("term", "binary", "cosine"), grid=[0, 1]
        )
        assert report.recall_curve[0] == (0, 0.0)

    def test_markers(self, golden_engine):
        engine, benchmark = golden_engine
        report = evaluate(benchmark, engine, MethodConfig("term", "tfidf", "cosine"))
        rows = recall_curve_rows(report)
        markers = {n: m for n, _, m in rows if m}
        assert markers[1] == "recall@1"
        assert markers[50] == "recall@50"

    def test_default_grid_shape(self):
        grid = default_curve_grid(5000)
        assert grid[:100] == list(range(1, 101))
        assert grid[-1] == 5000
        assert all(a < b for a, b in zip(grid, grid[1:]))
        small = default_curve_grid(30)
        assert small == list(range(1, 31))


class TestQuartiles:
    def test_matches_reference_order_statistics(self):
        rng = random.Random(31)
        for _ in range(50):
            ranks = [rng.randrange(1, 1000) for _ in range(rng.randrange(2, 40))]
            q1, med, q3 = np.percentile(np.asarray(ranks, float), [25, 50, 75], method="linear")
            ref_q1, ref_med, ref_q3 = statistics.quantiles(ranks, n=4, method="inclusive")
            assert q1 == pytest.approx(ref_q1, rel=1e-12)
            assert med == pytest.approx(ref_med, rel=1e-12)
            assert q3 == pytest.approx(ref_q3, rel=1e-12)


class TestResultsTable:
    def test_row_order_and_shape(self, small_corpus):
        engine = LinkageEngine(
            small_corpus.registrations, small_corpus.articles, lexicon=small_corpus.lexicon
        )
        links = tuple(
            ReportedLink(nct, pmid) for nct, pmid in sorted(small_corpus.planted.items())
        )
        benchmark = Benchmark("planted", links)
        reports = [evaluate(benchmark, engine, c) for c in legal_configs()]
        table = format_results_table(reports)
        lines = table.strip().splitlines()
        assert len(lines) == 11  # header + 10 rows
        first = lines[1].split("\t")
        assert first[:3] == ["term", "binary", "euclidean_normalized"]
        last = lines[-1].split("\t")
        assert last[:3] == ["concept", "tfidf", "cosine"]


class TestTargetRankOracleEquality:
    def test_small_corpus_indexed_equals_brute_force(self):
        corpus = make_corpus(seed=41, n_articles=80, n_registrations=10, vocab_size=200)
        engine = LinkageEngine(corpus.registrations, corpus.articles, lexicon=corpus.lexicon)
        pmids = [a.pmid for a in corpus.articles]
        for config in (
            MethodConfig("term", "tfidf", "cosine"),
            MethodConfig("concept", "binary", "jaccard"),
            MethodConfig("term", "binary", "euclidean_normalized"),
        ):
            vocab = engine.vocabulary(config.representation)
            reg_feats, art_feats = engine.features(config.representation)
            dense = dense_matrix(art_feats, vocab, config.scheme)
            for reg in corpus.registrations:
                target = corpus.planted[reg.nct_id]
                feats = next(f for f in reg_feats if f.doc_id == reg.nct_id)
                expected = brute_force_rank(
                    dense_row(feats, vocab, config.scheme), dense, pmids, config.measure
                )
                if expected is None:
                    continue
                want = next(
                    i for i, (p, _) in enumerate(expected, start=1) if p == target
                )
                got = engine.rank(reg.nct_id, config).rank_of(target)
                assert got == want
