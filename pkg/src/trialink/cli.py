"""Command-line pipeline: ingest, index, rank, evaluate, stats, serve.

Every command is batch-oriented and re-runnable: identical inputs produce
byte-identical outputs. Options may come from a JSON config file
(``--config``); explicit flags win over file values.

Exit codes: 0 success, 2 usage error, 3 input error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluation, ingest, similarity
from .features import REPRESENTATIONS, ConceptLexicon, VocabularyError
from .ingest import CorpusFilterConfig, IngestError, parse_partial_date
from .pipeline import LinkageEngine
from .similarity import MethodConfig, legal_configs, load_index, save_index
from .weighting import SCHEMES

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4


class InputError(Exception):
    """User-supplied data or arguments are unusable."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialink",
        description="Rank article candidates for trial registrations and evaluate link recovery.",
    )
    parser.add_argument("--config", help="JSON file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, corpora=True, lexicon=True, method=False, k=False):
        p.add_argument("--output-dir", help="directory for all outputs")
        if corpora:
            p.add_argument("--registrations", help="canonical registrations (JSONL) or XML export")
            p.add_argument("--articles", help="canonical articles (JSONL) or XML export")
        if lexicon:
            p.add_argument("--lexicon", help="concept lexicon TSV (enables concept representation)")
        if method:
            p.add_argument("--representation", choices=(*REPRESENTATIONS, "all"))
            p.add_argument("--scheme", choices=(*SCHEMES, "all"))
            p.add_argument("--measure", help="cosine | jaccard | euclidean_normalized")
        if k:
            p.add_argument("--k", type=int, help="truncate rankings after K candidates")

    p = sub.add_parser("ingest", help="parse, filter, and normalize corpora")
    add_common(p, lexicon=False)
    p.add_argument("--no-filters", action="store_true", help="disable all inclusion filters")
    p.add_argument("--min-received-date")
    p.add_argument("--min-publication-date")
    p.add_argument("--no-require-completed", action="store_true")
    p.add_argument("--no-require-interventional", action="store_true")
    p.add_argument("--required-publication-types", help="comma-separated labels")
    p.add_argument("--excluded-publication-types", help="comma-separated labels")

    p = sub.add_parser("index", help="build and persist inverted indexes")
    add_common(p, method=True)
    p.add_argument("--dump-vectors", action="store_true",
                   help="also write line-delimited weighted-vector dumps")

    p = sub.add_parser("rank", help="rank articles for one or more registrations")
    add_common(p, method=True, k=True)
    p.add_argument("--index", help="persisted index file (skips rebuilding)")
    p.add_argument("--nct-id", help="single registration id")
    p.add_argument("--nct-ids", help="file with one registration id per line")
    p.add_argument("--jsonl", action="store_true", help="also write line-delimited JSON rankings")

    p = sub.add_parser("evaluate", help="compute rank statistics over a link benchmark")
    add_common(p, method=True)
    p.add_argument("--benchmark", required=True, help="line-delimited {nct_id, pmid} links")
    p.add_argument("--kind", choices=("reported", "curated"), default="reported")
    p.add_argument("--all-configs", action="store_true", help="every legal combination")

    p = sub.add_parser("stats", help="feature occurrence histograms per corpus")
    add_common(p)
    p.add_argument("--dump-features", action="store_true",
                   help="also write line-delimited per-document feature dumps")

    p = sub.add_parser("serve", help="run the screening HTTP service")
    add_common(p, method=True, k=True)
    p.add_argument("--index-dir", help="directory of persisted indexes to load")
    p.add_argument("--log", help="screening decision log path", default="screening_log.jsonl")
    p.add_argument("--static-dir", help="frontend assets to serve at /")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset options from the JSON config file; flags take precedence."""
    if not args.config:
        return
    try:
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config file {args.config}: {exc}")
    for key, value in values.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) in (None, False):
            setattr(args, attr, value)


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise InputError(f"--{name.replace('_', '-')} is required for this command")


def _outdir(args) -> Path:
    _require(args, "output_dir")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _filter_config(args) -> CorpusFilterConfig:
    if args.no_filters:
        return CorpusFilterConfig.permissive()
    base = CorpusFilterConfig()
    kwargs = {}
    if args.min_received_date:
        kwargs["min_received_date"] = parse_partial_date(args.min_received_date)
    if args.min_publication_date:
        kwargs["min_publication_date"] = parse_partial_date(args.min_publication_date)
    if args.no_require_completed:
        kwargs["require_completed"] = False
    if args.no_require_interventional:
        kwargs["require_interventional"] = False
    if args.required_publication_types is not None:
        kwargs["required_publication_types"] = frozenset(
            t.strip() for t in args.required_publication_types.split(",") if t.strip()
        )
    if args.excluded_publication_types is not None:
        kwargs["excluded_publication_types"] = frozenset(
            t.strip() for t in args.excluded_publication_types.split(",") if t.strip()
        )
    from dataclasses import replace

    return replace(base, **kwargs)


def _load_corpora(args, config: CorpusFilterConfig | None = None):
    _require(args, "registrations", "articles")
    config = config or CorpusFilterConfig.permissive()
    regs = ingest.parse_registrations(args.registrations, config)
    arts = ingest.parse_articles(args.articles, config)
    return regs, arts


def _load_lexicon(args) -> ConceptLexicon | None:
    if getattr(args, "lexicon", None):
        return ConceptLexicon.from_tsv(args.lexicon)
    return None


def _method_configs(args, lexicon) -> list[MethodConfig]:
    representations = (
        list(REPRESENTATIONS) if lexicon is not None else ["term"]
    )
    if getattr(args, "all_configs", False):
        return legal_configs(representations)
    rep = args.representation or "term"
    scheme = args.scheme or "tfidf"
    measure = args.measure or "cosine"
    if rep == "all" or scheme == "all":
        reps = representations if rep == "all" else [rep]
        schemes = list(SCHEMES) if scheme == "all" else [scheme]
        return [
            MethodConfig(r, s, measure if not (s != "binary" and measure == "jaccard") else "cosine")
            for r in reps
            for s in schemes
        ]
    return [MethodConfig(rep, scheme, measure)]


def _index_name(representation: str, scheme: str) -> str:
    return f"index_{representation}_{scheme}.bin"


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args) -> int:
    out = _outdir(args)
    config = _filter_config(args)
    regs, arts = _load_corpora(args, config)
    ingest.write_canonical(regs.records, out / "registrations.jsonl")
    ingest.write_canonical(arts.records, out / "articles.jsonl")
    ingest.write_rejection_log(regs.log_entries(), out / "registrations.rejections.jsonl")
    ingest.write_rejection_log(arts.log_entries(), out / "articles.rejections.jsonl")
    links, dangling = ingest.extract_reported_links(regs.records, arts.records)
    with open(out / "reported_links.jsonl", "w", encoding="utf-8") as fh:
        for link in links:
            fh.write(json.dumps({"nct_id": link.nct_id, "pmid": link.pmid}) + "\n")
    if dangling:
        with open(out / "dangling_links.jsonl", "w", encoding="utf-8") as fh:
            for link in dangling:
                fh.write(json.dumps({"nct_id": link.nct_id, "pmid": link.pmid}) + "\n")
    print(
        f"registrations: {len(regs.records)} included, {len(regs.rejections)} rejected, "
        f"{len(regs.errors)} malformed"
    )
    print(
        f"articles: {len(arts.records)} included, {len(arts.rejections)} rejected, "
        f"{len(arts.errors)} malformed"
    )
    print(f"reported links: {len(links)} ({len(dangling)} dangling dropped)")
    return EXIT_OK


def cmd_index(args) -> int:
    out = _outdir(args)
    regs, arts = _load_corpora(args)
    lexicon = _load_lexicon(args)
    engine = LinkageEngine(regs.records, arts.records, lexicon=lexicon)
    reps = (
        [args.representation]
        if args.representation and args.representation != "all"
        else (list(REPRESENTATIONS) if lexicon is not None else ["term"])
    )
    schemes = (
        [args.scheme] if args.scheme and args.scheme != "all" else list(SCHEMES)
    )
    for rep in reps:
        for scheme in schemes:
            index = engine.index(rep, scheme)
            path = out / _index_name(rep, scheme)
            save_index(index, path)
            if args.dump_vectors:
                from .weighting import write_vector_dump

                write_vector_dump(index.vectors, out / f"vectors_{rep}_{scheme}.jsonl")
            print(f"wrote {path} ({index.n_articles} articles, {len(index.vocabulary)} features)")
    return EXIT_OK


def cmd_rank(args) -> int:
    out = _outdir(args)
    _require(args, "registrations")
    if not args.nct_id and not args.nct_ids:
        raise InputError("provide --nct-id or --nct-ids")
    nct_ids = [args.nct_id] if args.nct_id else [
        line.strip() for line in Path(args.nct_ids).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    regs = ingest.parse_registrations(args.registrations, CorpusFilterConfig.permissive())
    lexicon = _load_lexicon(args)
    measure = similarity.normalize_measure(args.measure or "cosine")

    if args.index:
        index = load_index(args.index)
        engine = LinkageEngine(regs.records, [], lexicon=lexicon)
        engine.attach_index(index)
        config = MethodConfig(index.representation, index.scheme, measure)
    else:
        _require(args, "articles")
        arts = ingest.parse_articles(args.articles, CorpusFilterConfig.permissive())
        engine = LinkageEngine(regs.records, arts.records, lexicon=lexicon)
        config = MethodConfig(args.representation or "term", args.scheme or "tfidf", measure)

    unknown = [n for n in nct_ids if not engine.has_registration(n)]
    if unknown:
        raise InputError(f"unknown registration ids: {', '.join(unknown)}")

    tsv_path = out / "rankings.tsv"
    with open(tsv_path, "w", encoding="utf-8") as fh:
        jsonl_fh = open(out / "rankings.jsonl", "w", encoding="utf-8") if args.jsonl else None
        try:
            for nct_id in nct_ids:
                ranked = engine.rank(nct_id, config, k=args.k)
                similarity.write_ranking_tsv(ranked, fh)
                if jsonl_fh is not None:
                    similarity.write_ranking_jsonl(ranked, jsonl_fh)
        finally:
            if jsonl_fh is not None:
                jsonl_fh.close()
    print(f"wrote {tsv_path} ({len(nct_ids)} registrations, config {config.label()})")
    return EXIT_OK


def _load_benchmark(path, kind: str) -> evaluation.Benchmark:
    links = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        links.append(ingest.ReportedLink(rec["nct_id"], str(rec["pmid"])))
    if not links:
        raise InputError(f"benchmark {path} contains no links")
    return evaluation.Benchmark(name=Path(path).stem, links=tuple(links), kind=kind)


def cmd_evaluate(args) -> int:
    out = _outdir(args)
    regs, arts = _load_corpora(args)
    lexicon = _load_lexicon(args)
    benchmark = _load_benchmark(args.benchmark, args.kind)
    engine = LinkageEngine(regs.records, arts.records, lexicon=lexicon)
    configs = _method_configs(args, lexicon)
    reports = []
    for config in configs:
        report = evaluation.evaluate(benchmark, engine, config)
        reports.append(report)
        stem = f"{config.representation}_{config.scheme}_{config.measure}"
        (out / f"report_{stem}.json").write_text(report.to_json(), encoding="utf-8")
        with open(out / f"recall_{stem}.csv", "w", encoding="utf-8") as fh:
            evaluation.write_recall_curve_csv(report, fh)
        print(
            f"{config.label()}: median {report.median_rank:g} "
            f"(IQR {report.iqr[0]:g}-{report.iqr[1]:g}), "
            f"first-ranked {report.first_ranked_pct:.1f}%, "
            f"recall@50 {report.recall_at_50_pct:.1f}%"
        )
    (out / "results_table.tsv").write_text(
        evaluation.format_results_table(reports), encoding="utf-8"
    )
    return EXIT_OK


def cmd_stats(args) -> int:
    out = _outdir(args)
    regs, arts = _load_corpora(args)
    lexicon = _load_lexicon(args)
    engine = LinkageEngine(regs.records, arts.records, lexicon=lexicon)
    reps = list(REPRESENTATIONS) if lexicon is not None else ["term"]
    for rep in reps:
        reg_feats, art_feats = engine.features(rep)
        if args.dump_features:
            from .features import write_feature_dump

            write_feature_dump(reg_feats, rep, out / f"features_{rep}_registrations.jsonl")
            write_feature_dump(art_feats, rep, out / f"features_{rep}_articles.jsonl")
        stats = ingest.corpus_stats(
            (f.counts for f in reg_feats), (f.counts for f in art_feats), rep
        )
        (out / f"stats_{rep}.json").write_text(
            json.dumps(stats.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        for table in (stats.registrations, stats.articles):
            with open(out / f"stats_{rep}_{table.corpus}.csv", "w", encoding="utf-8") as fh:
                fh.write("occurrences,n_features\n")
                for count, n in table.rows():
                    fh.write(f"{count},{n}\n")
        print(
            f"{rep}: {stats.n_unique_union} unique features, "
            f"{stats.n_shared_at_or_above_threshold} past the pruning rule"
        )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .screening import SessionStore
    from .service import create_app

    regs, arts = _load_corpora(args)
    lexicon = _load_lexicon(args)
    engine = LinkageEngine(regs.records, arts.records, lexicon=lexicon)
    if args.index_dir:
        for path in sorted(Path(args.index_dir).glob("index_*.bin")):
            engine.attach_index(load_index(path))
    default_config = MethodConfig(
        args.representation or "term",
        args.scheme or "tfidf",
        similarity.normalize_measure(args.measure or "cosine"),
    )
    store = SessionStore(args.log)
    app = create_app(
        engine,
        store,
        default_config=default_config,
        default_k=args.k or 50,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "rank": cmd_rank,
    "evaluate": cmd_evaluate,
    "stats": cmd_stats,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_config_file(args)
        return COMMANDS[args.command](args)
    except (InputError, IngestError, VocabularyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
