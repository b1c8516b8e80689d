"""Command-line entry points: index, search, evaluate, bias-report,
timing-report, mix-triples.

Exit codes: 0 success, 1 completed with warnings, 2 input/configuration
error. A --config JSON file supplies defaults for any long option
(keys use underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import warnings
from pathlib import Path

from . import dense, formats, mixing, sparse, stats, text, timing
from .errors import EmptyQueryError, MlirkitError
from .evaluation import MergedQrels, Run, bias_report, evaluate_run, merge_qrels

_MODES = ("bm25", "maxsim", "single-vector")


def _parse_pairs(items: list[str], what: str) -> dict[str, str]:
    """Parse repeated KEY=VALUE options, preserving order."""
    out: dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key or not value:
            raise MlirkitError(f"{what} must look like KEY=VALUE, got {item!r}")
        if key in out:
            raise MlirkitError(f"duplicate {what} key {key!r}")
        out[key] = value
    return out


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file with default option values")
    parser.add_argument("--seed", type=int, help="deterministic seed (default 0)")
    parser.add_argument("--threads", type=int, help="worker threads for indexing (default 1)")
    parser.add_argument("--output", type=Path, help="output directory (default .)")


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the --config JSON file, then defaults."""
    values = {}
    if args.config:
        values = formats.read_json(args.config)
        if not isinstance(values, dict):
            raise MlirkitError(f"{args.config}: config must be a JSON object")
    for key, value in values.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, value)
    if args.seed is None:
        args.seed = 0
    if args.threads is None:
        args.threads = 1
    args.output = Path(args.output) if args.output else Path(".")
    return args


def _analyzer_from_args(args) -> text.AnalyzerConfig:
    stopwords = None
    if args.stopwords:
        _, stopwords = text.load_stop_structure(args.stopwords)
        stopwords = frozenset(stopwords)
    return text.AnalyzerConfig(
        lowercase=not args.no_lowercase,
        nfkc=not args.no_nfkc,
        stem_languages=frozenset(args.stem_langs.split(",")) if args.stem_langs else frozenset(),
        stopwords=stopwords,
    )


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise MlirkitError(f"missing required option --{name.replace('_', '-')}")


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------


def cmd_index(args) -> None:
    _require(args, "corpus", "mode")
    out = args.output
    out.mkdir(parents=True, exist_ok=True)
    docs = formats.read_corpus(args.corpus)
    analyzer = _analyzer_from_args(args)
    ledger = timing.TimingLedger(
        doc_count=len(docs),
        stages={"translation": float(args.translation_seconds or 0.0)},
    )
    meta = {
        "mode": args.mode,
        "analyzer": analyzer.to_dict(),
        "seed": args.seed,
        "dim": args.dim,
        "window": args.window,
        "stride": args.stride,
    }
    if args.mode == "bm25":
        params = sparse.BM25Params(k1=args.k1, b=args.b)
        with ledger.time_stage("text_processing"):
            doc_terms = [(d.id, text.analyze(d.text, d.lang, analyzer)) for d in docs]
        with ledger.time_stage("index_build"):
            index = sparse.build_index_from_terms(doc_terms, params)
            formats.write_json(sparse.index_to_dict(index, analyzer), out / "sparse_index.json")
    else:
        kind = dense.ScorerKind.MAXSIM if args.mode == "maxsim" else dense.ScorerKind.SINGLE_VECTOR
        with ledger.time_stage("text_processing"):
            passages = [
                p
                for d in docs
                for p in text.split_passages(d, window=args.window, stride=args.stride, config=analyzer)
            ]
        with ledger.time_stage("representation"):
            store = dense.store_from_passages(passages, kind, args.dim, args.seed, threads=args.threads)
        with ledger.time_stage("index_build"):
            dense.save_store(store, out / "embeddings.mlke")
    formats.write_json(meta, out / "index_meta.json")
    formats.write_json(ledger.to_dict(), out / "ledger.json")
    per_doc = ledger.per_doc
    print(f"indexed {len(docs)} documents in {ledger.total:.3f}s "
          f"({per_doc:.6f}s/doc)" if per_doc is not None else
          f"indexed {len(docs)} documents in {ledger.total:.3f}s")


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def _load_stop_lists(spec_value):
    if spec_value in (None, ""):
        return None
    if spec_value == "builtin":
        return text.default_stop_structure()
    return text.load_stop_structure(spec_value)


def cmd_search(args) -> None:
    _require(args, "index", "topics")
    index_dir = Path(args.index)
    meta = formats.read_json(index_dir / "index_meta.json")
    analyzer = text.AnalyzerConfig.from_dict(meta["analyzer"])
    topics = formats.read_topics(args.topics)
    stop_lists = _load_stop_lists(args.stop_structure)
    tag = args.tag or f"mlirkit-{meta['mode']}"

    if meta["mode"] == "bm25":
        index, _ = sparse.index_from_dict(formats.read_json(index_dir / "sparse_index.json"))
        searcher = lambda q: sparse.sparse_search(
            q, index, args.k, analyzer, use_description=args.use_description
        )
    else:
        store = dense.load_store(index_dir / "embeddings.mlke")
        kind = store.mode

        def searcher(q):
            tokens = text.analyze(q.text(args.use_description), q.lang, analyzer)
            if not tokens:
                raise EmptyQueryError(f"query {q.id} analyzed to an empty term sequence")
            if kind is dense.ScorerKind.MAXSIM:
                emb = dense.toy_embed(tokens, meta["dim"], meta["seed"], id=f"q:{q.id}")
            else:
                emb = dense.toy_embed_single(tokens, meta["dim"], meta["seed"], id=f"q:{q.id}")
            return dense.dense_search(emb, store, kind, args.k)

    rankings = {}
    for topic in topics:
        try:
            if stop_lists is not None:
                topic = text.strip_stop_structure(topic, *stop_lists)
            rankings[topic.id] = searcher(topic)
        except EmptyQueryError as exc:
            warnings.warn(f"skipping topic {topic.id}: {exc}", RuntimeWarning)
    run = Run(tag=tag, rankings=rankings)
    args.output.mkdir(parents=True, exist_ok=True)
    run_path = args.output / "run.trec"
    formats.write_run(run, run_path)
    print(f"wrote {sum(len(r) for r in rankings.values())} result lines "
          f"for {len(rankings)}/{len(topics)} topics to {run_path}")


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _read_merged_qrels(qrels_args: list[str], doc_langs_path) -> MergedQrels:
    pairs = [q for q in qrels_args if "=" in q]
    plain = [q for q in qrels_args if "=" not in q]
    doc_langs = formats.read_doc_langs(doc_langs_path) if doc_langs_path else None
    if pairs and plain:
        raise MlirkitError("mix of LANG=PATH and plain qrels paths; use one style")
    if pairs:
        by_lang = {
            lang: formats.read_qrels(path) for lang, path in _parse_pairs(pairs, "--qrels").items()
        }
        return merge_qrels(by_lang, doc_langs)
    if len(plain) != 1:
        raise MlirkitError("plain qrels style takes exactly one file; tag files as LANG=PATH to merge")
    # single pre-merged file: language attribution comes only from --doc-langs
    judgments = {qid: dict(docs) for qid, docs in formats.read_qrels(plain[0]).items()}
    return MergedQrels(judgments=judgments, doc_lang=dict(doc_langs or {}))


def cmd_evaluate(args) -> None:
    _require(args, "run", "qrels")
    run = formats.read_run(args.run)
    qrels = _read_merged_qrels(args.qrels, args.doc_langs)
    evaluated_queries = [q for q in qrels.query_ids() if qrels.relevant(q)]
    if not any(q in run.rankings for q in evaluated_queries):
        raise MlirkitError("run and qrels share no queries with relevant documents")
    report = evaluate_run(run, qrels)
    args.output.mkdir(parents=True, exist_ok=True)
    formats.write_json(report, args.output / "metrics.json")
    rows = [
        (qid, f"{m['ap']:.6f}", f"{m['p10']:.6f}", f"{m['r_precision']:.6f}")
        for qid, m in sorted(report["per_query"].items())
    ]
    agg = report["aggregate"]
    rows.append(("ALL", f"{agg['map']:.6f}", f"{agg['p10']:.6f}", f"{agg['r_precision']:.6f}"))
    formats.write_csv(("qid", "ap", "p10", "r_precision"), rows, args.output / "metrics.csv")
    print(f"MAP {agg['map']:.4f}  P@10 {agg['p10']:.4f}  "
          f"R-Prec {agg['r_precision']:.4f}  ({agg['queries_evaluated']} queries)")

    if args.baseline:
        baseline = formats.read_run(args.baseline)
        base_report = evaluate_run(baseline, qrels)
        shared = sorted(set(report["per_query"]) & set(base_report["per_query"]))
        if len(shared) < 2:
            raise MlirkitError("significance test needs >= 2 shared evaluated queries")
        sig = {"baseline": baseline.tag, "n_queries": len(shared), "bonferroni": args.bonferroni}
        for metric in ("ap", "p10"):
            a = [report["per_query"][q][metric] for q in shared]
            b = [base_report["per_query"][q][metric] for q in shared]
            t, p = stats.paired_t_test(a, b)
            (p_adj,) = stats.bonferroni_adjust([p], args.bonferroni)
            sig[metric] = {"t": t, "p_raw": p, "p_adjusted": p_adj}
        formats.write_json(sig, args.output / "significance.json")
        formats.write_csv(
            ("metric", "t", "p_raw", "p_adjusted"),
            [
                (m, sig[m]["t"], sig[m]["p_raw"], sig[m]["p_adjusted"])
                for m in ("ap", "p10")
            ],
            args.output / "significance.csv",
        )
        print(f"significance vs {baseline.tag}: "
              f"AP p_adj={sig['ap']['p_adjusted']:.4f}, P@10 p_adj={sig['p10']['p_adjusted']:.4f}")


# ---------------------------------------------------------------------------
# bias-report
# ---------------------------------------------------------------------------


def cmd_bias_report(args) -> None:
    _require(args, "run", "qrels", "reference_lang")
    run = formats.read_run(args.run)
    by_lang = {
        lang: formats.read_qrels(path)
        for lang, path in _parse_pairs(args.qrels, "--qrels").items()
    }
    doc_langs = formats.read_doc_langs(args.doc_langs) if args.doc_langs else None
    qrels = merge_qrels(by_lang, doc_langs)
    report = bias_report(run, qrels, args.reference_lang, alpha=args.alpha, n_tests=args.n_tests)
    args.output.mkdir(parents=True, exist_ok=True)
    formats.write_json(report.to_dict(), args.output / "bias_report.json")
    ks_by_key = {(t.lang, t.qid): t for t in report.ks_tests}
    rows = []
    for lang, summary in sorted(report.recall.items()):
        for qid, value in sorted(summary.values.items()):
            t = ks_by_key.get((lang, qid))
            rows.append((
                qid, lang, f"{value:.6f}",
                f"{t.d:.6f}" if t else "",
                f"{t.p_raw:.6g}" if t else "",
                f"{t.p_adjusted:.6g}" if t else "",
                str(t.p_adjusted < report.alpha).lower() if t else "",
            ))
    formats.write_csv(
        ("qid", "lang", "recall_at_mlir_relevant", "ks_d", "ks_p_raw", "ks_p_adjusted", "flagged"),
        rows,
        args.output / "bias_report.csv",
    )
    fractions = ", ".join(
        f"{lang}={frac:.2f}" if frac is not None else f"{lang}=n/a"
        for lang, frac in sorted(report.bias_fraction.items())
    )
    print(f"bias fractions vs {report.reference_lang} (alpha={report.alpha}): {fractions or 'none'}")


# ---------------------------------------------------------------------------
# timing-report
# ---------------------------------------------------------------------------


def cmd_timing_report(args) -> None:
    _require(args, "ledger")
    ledgers = {
        name: timing.TimingLedger.from_dict(formats.read_json(path))
        for name, path in _parse_pairs(args.ledger, "--ledger").items()
    }
    map_scores = {
        name: float(value) for name, value in _parse_pairs(args.map or [], "--map").items()
    }
    report = timing.timing_report(ledgers, map_scores)
    args.output.mkdir(parents=True, exist_ok=True)
    formats.write_json(report, args.output / "timing_report.json")
    formats.write_csv(
        ("config", "doc_count", "total_seconds", "per_doc_seconds", "map"),
        [
            (name, cfg["doc_count"], cfg["total_seconds"], cfg["per_doc_seconds"],
             "" if cfg["map"] is None else cfg["map"])
            for name, cfg in sorted(report["configs"].items())
        ],
        args.output / "timing_table.csv",
    )
    formats.write_csv(
        ("config", "baseline", "reduction"),
        [(p["config"], p["baseline"], f"{p['reduction']:.6f}") for p in report["pairwise"]],
        args.output / "timing_pairs.csv",
    )
    formats.write_csv(
        ("per_doc_seconds", "map", "config"),
        [
            (pt["per_doc_seconds"], "" if pt["map"] is None else pt["map"], pt["config"])
            for pt in report["scatter"]
        ],
        args.output / "timing_scatter.csv",
    )
    for p in report["pairwise"]:
        if p["reduction"] > 0:
            print(f"{p['config']} vs {p['baseline']}: {100 * p['reduction']:.1f}% reduction")


# ---------------------------------------------------------------------------
# mix-triples
# ---------------------------------------------------------------------------


def cmd_mix_triples(args) -> None:
    _require(args, "triples", "mode")
    files = _parse_pairs(args.triples, "--triples")
    mode = mixing.MixMode(args.mode)
    config = mixing.MixConfig(
        mode=mode,
        languages=tuple(files),
        batch_size=args.batch_size,
        seed=args.seed,
    )
    streams = [mixing.read_triples(path, lang) for lang, path in files.items()]
    if args.shuffle:
        streams = mixing.shuffle_aligned(streams, args.seed)
    stream = mixing.mix_round_robin(streams) if mode is not mixing.MixMode.ET else list(streams[0])
    schedule = mixing.schedule_batches(stream, config)
    args.output.mkdir(parents=True, exist_ok=True)
    if mode is mixing.MixMode.ET:
        shutil.copyfile(next(iter(files.values())), args.output / "combined.tsv")
    else:
        mixing.emit_combined_file(list(files.values()), args.output / "combined.tsv")
    mixing.write_schedule_manifest(schedule, args.output / "schedule.jsonl")
    n_batches = schedule.entries[-1][1] + 1 if schedule.entries else 0
    print(f"scheduled {len(schedule.entries)} triples into {n_batches} batches "
          f"({len(schedule.partial_batches)} partial)")


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlirkit",
                                     description="Multilingual IR toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build a sparse index or embedding store")
    _add_common(p)
    p.add_argument("--corpus", type=Path, help="corpus JSONL file")
    p.add_argument("--mode", choices=_MODES, help="retrieval representation to build")
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--dim", type=int, default=16, help="toy embedding dimension")
    p.add_argument("--window", type=int, default=180, help="passage window in tokens")
    p.add_argument("--stride", type=int, default=90, help="passage stride in tokens")
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--no-nfkc", action="store_true")
    p.add_argument("--stem-langs", default="en", help="comma-separated languages to stem")
    p.add_argument("--stopwords", type=Path, help="stop-structure file supplying stopwords")
    p.add_argument("--translation-seconds", type=float,
                   help="externally measured translation time recorded in the ledger")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="run topics against a built index")
    _add_common(p)
    p.add_argument("--index", type=Path, help="index directory from the index command")
    p.add_argument("--topics", type=Path, help="topics JSONL file")
    p.add_argument("--k", type=int, default=1000, help="results per topic")
    p.add_argument("--tag", help="run tag (default mlirkit-<mode>)")
    p.add_argument("--use-description", action="store_true",
                   help="search on title + description instead of title only")
    p.add_argument("--stop-structure",
                   help="stop-structure file for query cleaning, or 'builtin'")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="score a run against (merged) qrels")
    _add_common(p)
    p.add_argument("--run", type=Path, help="TREC run file")
    p.add_argument("--qrels", nargs="+", help="qrels files: LANG=PATH ... or one plain PATH")
    p.add_argument("--doc-langs", type=Path, help="JSONL with id/lang for every document")
    p.add_argument("--baseline", type=Path, help="baseline run for the paired t-test")
    p.add_argument("--bonferroni", type=int, default=1, help="correction factor for t-test p-values")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bias-report", help="language-bias diagnostics for a run")
    _add_common(p)
    p.add_argument("--run", type=Path)
    p.add_argument("--qrels", nargs="+", help="per-language qrels: LANG=PATH ...")
    p.add_argument("--doc-langs", type=Path, help="JSONL with id/lang for every document")
    p.add_argument("--reference-lang", help="reference language for the KS tests")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--n-tests", type=int, help="Bonferroni factor (default: tests performed)")
    p.set_defaults(func=cmd_bias_report)

    p = sub.add_parser("timing-report", help="indexing-time trade-off tables")
    _add_common(p)
    p.add_argument("--ledger", nargs="+", help="ledger JSONs: NAME=PATH ...")
    p.add_argument("--map", nargs="+", help="MAP per configuration: NAME=VALUE ...")
    p.set_defaults(func=cmd_timing_report)

    p = sub.add_parser("mix-triples", help="build training-triple schedules")
    _add_common(p)
    p.add_argument("--triples", nargs="+", help="per-language triple TSVs: LANG=PATH ...")
    p.add_argument("--mode", choices=[m.value for m in mixing.MixMode])
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--shuffle", action="store_true", help="shuffle aligned instances with --seed")
    p.set_defaults(func=cmd_mix_triples)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args)
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            args.func(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return 1 if caught else 0
    except (MlirkitError, OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
