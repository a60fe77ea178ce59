"""Command-line interface.

Subcommands: ingest (validate corpora), index (build and persist vector
indexes), retrieve (ad-hoc query), run (execute the configured
experiment), grade (re-grade persisted responses), report (emit report
tables and figures), reproduce (recompute the reported fitness
comparison). Global flags: --config, --out, --seed, --threshold.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..clinical import DEFAULT_THRESHOLD, load_answer_keys, load_scenarios
from ..corpus import build_tree, load_corpus
from ..embedding import EmbedderConfig, HashEmbedder
from ..generation import KnowledgeBase
from ..retrieval import index_build, run_query, save_index
from .config import ConfigError, RunConfig, load_config
from .report import (
    build_report,
    load_human_answers,
    load_score_sheets,
    render_text,
    write_report,
)
from .reproduction import RECONSTRUCTION_NOTES, reproduction_table
from .runner import (
    RECORDS_FILENAME,
    load_records,
    regrade_records,
    run_experiment,
    save_records,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preop-rag",
        description="Guideline retrieval engine and evaluation harness for "
        "preoperative-assessment LLM systems.",
    )
    parser.add_argument("--config", default="config.yaml", help="run configuration YAML")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the embedder seed")
    parser.add_argument(
        "--threshold",
        type=float,
        default=DEFAULT_THRESHOLD,
        help="grading threshold used by report tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="validate the configured guideline corpora")
    sub.add_parser("index", help="build and persist the vector indexes")

    retrieve = sub.add_parser("retrieve", help="run an ad-hoc retrieval query")
    retrieve.add_argument("--query", required=True, help="query text")
    retrieve.add_argument(
        "--kb",
        choices=("local", "international"),
        default="international",
        help="knowledge base to query",
    )
    retrieve.add_argument("--k", type=int, default=None, help="override top_k")

    sub.add_parser("run", help="execute the configured experiment")
    sub.add_parser("grade", help="re-extract and re-grade persisted responses")

    report = sub.add_parser("report", help="emit report tables and figures")
    report.add_argument(
        "--no-figures", action="store_true", help="skip PNG figure rendering"
    )

    sub.add_parser(
        "reproduce", help="recompute the reported fitness comparison table"
    )
    return parser


def _load(args: argparse.Namespace) -> RunConfig:
    return load_config(args.config, out_override=args.out, seed_override=args.seed)


def _cmd_ingest(config: RunConfig) -> int:
    total = 0
    for label, directory in (
        ("local", config.corpus_local),
        ("international", config.corpus_international),
    ):
        if directory is None:
            continue
        docs = load_corpus(directory)
        total += len(docs)
        print(f"{label}: {len(docs)} documents from {directory}")
        for doc in docs:
            print(f"  {doc.id}: {doc.word_count} words — {doc.title}")
    if total == 0:
        print("no corpus directories configured", file=sys.stderr)
        return 1
    print(f"ok: {total} documents")
    return 0


def _cmd_index(config: RunConfig) -> int:
    embedder = HashEmbedder(EmbedderConfig(dims=config.embedder_dims, seed=config.seed))
    config.out.mkdir(parents=True, exist_ok=True)
    wrote_any = False
    for label, directory in (
        ("local", config.corpus_local),
        ("international", config.corpus_international),
    ):
        if directory is None:
            continue
        docs = load_corpus(directory)
        if not docs:
            continue
        trees = [build_tree(doc, config.tree_levels) for doc in docs]
        index = index_build(trees, embedder)
        path = config.out / f"index_{label}.jsonl"
        save_index(index, path)
        print(f"{label}: {len(index)} leaf vectors -> {path}")
        wrote_any = True
    if not wrote_any:
        print("no corpus directories configured", file=sys.stderr)
        return 1
    return 0


def _cmd_retrieve(config: RunConfig, args: argparse.Namespace) -> int:
    directory = (
        config.corpus_local if args.kb == "local" else config.corpus_international
    )
    if directory is None:
        print(f"no {args.kb} corpus configured", file=sys.stderr)
        return 1
    embedder = HashEmbedder(EmbedderConfig(dims=config.embedder_dims, seed=config.seed))
    docs = load_corpus(directory)
    trees = [build_tree(doc, config.tree_levels) for doc in docs]
    index = index_build(trees, embedder)
    retriever = config.retriever
    if args.k is not None:
        from ..retrieval import RetrieverConfig

        retriever = RetrieverConfig(
            top_k=args.k,
            merge_threshold=retriever.merge_threshold,
            max_context_nodes=(
                None
                if retriever.max_context_nodes is None
                else min(retriever.max_context_nodes, args.k)
            ),
        )
    contexts = run_query(index, trees, embedder.embed(args.query), retriever)
    print(f"{len(contexts)} context(s) for {args.kb!r} query")
    for i, context in enumerate(contexts, 1):
        print(f"[{i}] node={context.node_id} score={context.score:.4f} "
              f"source={context.doc_id} leaves={len(context.provenance)}")
        text = context.text if len(context.text) <= 240 else context.text[:237] + "..."
        print(f"    {text}")
    return 0


def _cmd_run(config: RunConfig) -> int:
    summary = run_experiment(config)
    print(
        f"generated {summary.generated} record(s), skipped {summary.skipped} "
        f"existing, {len(summary.failures)} failure(s)"
    )
    print(f"records: {config.out / RECORDS_FILENAME}")
    for key, message in summary.failures:
        print(f"  FAILED {key}: {message}", file=sys.stderr)
    return 2 if summary.failures else 0


def _cmd_grade(config: RunConfig, threshold: float) -> int:
    records_path = config.out / RECORDS_FILENAME
    if not records_path.is_file():
        print(f"no records at {records_path}", file=sys.stderr)
        return 1
    records = load_records(records_path)
    keys = load_answer_keys(config.keys)
    thresholds = config.thresholds if threshold in config.thresholds else (
        *config.thresholds,
        threshold,
    )
    regraded = regrade_records(records, keys, thresholds)
    save_records(regraded, records_path)
    print(f"re-graded {len(regraded)} record(s) at thresholds {list(thresholds)}")
    return 0


def _cmd_report(config: RunConfig, args: argparse.Namespace) -> int:
    records_path = config.out / RECORDS_FILENAME
    if not records_path.is_file():
        print(f"no records at {records_path}; run the experiment first", file=sys.stderr)
        return 1
    records = load_records(records_path)
    keys = load_answer_keys(config.keys)
    scenarios = load_scenarios(config.scenarios)
    humans = (
        load_human_answers(config.human_answers)
        if config.human_answers is not None and config.human_answers.is_file()
        else ()
    )
    sheets = (
        load_score_sheets(config.score_sheets)
        if config.score_sheets is not None and config.score_sheets.is_file()
        else ()
    )
    report = build_report(
        records,
        keys,
        scenarios,
        reference_system=config.reference_system,
        threshold=args.threshold,
        thresholds=config.thresholds,
        human_answers=humans,
        score_sheets=sheets,
    )
    written = write_report(report, config.out, figures=not args.no_figures)
    print(render_text(report))
    print(f"wrote {len(written)} artifact(s) under {config.out}")
    return 0


def _cmd_reproduce(config: RunConfig) -> int:
    table = reproduction_table()
    config.out.mkdir(parents=True, exist_ok=True)
    tables_dir = config.out / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)
    path = tables_dir / f"{table.name}.tsv"
    with path.open("w", encoding="utf-8") as fh:
        fh.write("\t".join(table.columns) + "\n")
        for row in table.rows:
            fh.write("\t".join(row) + "\n")
    widths = [
        max(len(str(cell)) for cell in column)
        for column in zip(table.columns, *table.rows)
    ]
    print(f"== {table.title} ==")
    print("  ".join(c.ljust(w) for c, w in zip(table.columns, widths)))
    for row in table.rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    for note in RECONSTRUCTION_NOTES:
        print(f"# {note}")
    print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load(args)
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "ingest":
            return _cmd_ingest(config)
        if args.command == "index":
            return _cmd_index(config)
        if args.command == "retrieve":
            return _cmd_retrieve(config, args)
        if args.command == "run":
            return _cmd_run(config)
        if args.command == "grade":
            return _cmd_grade(config, args.threshold)
        if args.command == "report":
            return _cmd_report(config, args)
        if args.command == "reproduce":
            return _cmd_reproduce(config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
