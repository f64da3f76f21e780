"""Command-line entry point: ``kgrag <command> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 provider error, 4 data error,
5 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import corpus as corpus_mod
from .agents import navigate
from .chunking import chunk_document
from .config import RunConfig, load_config
from .errors import DataError, KGRagError, MissingInputError
from .evaluation import FlatRAG, compare_systems, load_qa, render_table
from .graph import export_statements, load as load_graph, plot_data, save as save_graph
from .pipeline import Trace, build_graph
from .providers import build_providers
from .retrieve import QueryEngine, QueryOptions

logger = logging.getLogger("kgrag")


def dump_json(obj, path: str | None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _providers(cfg: RunConfig):
    return build_providers(cfg.providers, cfg.agents.accept_threshold)


def _load_graph(path: str):
    # the store's GraphNotBuiltError already tells the user to run build first
    return load_graph(path)


def _engine(graph, providers, cfg: RunConfig) -> QueryEngine:
    r = cfg.retrieve
    opts = QueryOptions(r.top_k, r.max_hops, r.max_paths, r.link_threshold, r.link_top_n, r.all_levels)
    return QueryEngine(graph, providers.embed, providers.gen, opts)


def cmd_ingest(args, cfg: RunConfig, trace: Trace) -> int:
    docs = []
    for p in args.paths:
        with trace.stage(f"ingest:{p}"):
            docs.extend(corpus_mod.ingest(p, args.format).documents)
    merged = corpus_mod.Corpus(())
    for doc in docs:
        merged = corpus_mod.store_document(merged, doc)
    corpus_mod.save(merged, args.out)
    trace.decisions["documents"] = len(merged)
    trace.decisions["corpus_checksum"] = merged.checksum
    print(f"ingested {len(merged)} documents -> {args.out}")
    return 0


def cmd_build(args, cfg: RunConfig, trace: Trace) -> int:
    corpus = corpus_mod.load(args.corpus)
    graph = build_graph(corpus, _providers(cfg), cfg, trace)
    save_graph(graph, args.out)
    trace.decisions["graph_checksum"] = graph.checksum
    print(f"built graph: {len(graph.entities)} entities, {len(graph.triples)} triples, "
          f"{len(graph.hierarchy.communities)} communities; checksum {graph.checksum} -> {args.out}")
    return 0


def cmd_communities(args, cfg: RunConfig, trace: Trace) -> int:
    graph = _load_graph(args.graph)
    h = graph.hierarchy
    if h is None:
        raise DataError(f"{args.graph} has no community hierarchy; run build first")
    levels = [args.level] if args.level is not None else h.levels
    rows = []
    for lv in levels:
        part = next((p for p in h.partitions if p.level == lv), None)
        if part is None:
            raise DataError(f"no level {lv} in hierarchy (levels: {h.levels})")
        for c in h.at_level(lv):
            rows.append({"id": c.id, "level": c.level, "size": len(c.members), "edges": len(c.induced_edges),
                         "modularity": part.modularity, "summary": c.summary,
                         "members": sorted(graph.name(m) for m in c.members)})
    dump_json(rows, args.out)
    return 0


def cmd_query(args, cfg: RunConfig, trace: Trace) -> int:
    graph = _load_graph(args.graph)
    overrides = {k: v for k, v in (("top_k", args.top_k), ("max_hops", args.max_hops)) if v is not None}
    if args.all_levels:
        overrides["all_levels"] = True
    with trace.stage("query"):
        result = _engine(graph, _providers(cfg), cfg).query(args.text, **overrides)
    dump_json(result.to_dict(), args.out)
    return 0


def cmd_navigate(args, cfg: RunConfig, trace: Trace) -> int:
    providers = _providers(cfg)
    if providers.search is None:
        raise MissingInputError("navigate needs a search index (providers.index) or an http search endpoint")
    a = cfg.agents
    with trace.stage("navigate"):
        result = navigate(args.task, args.chemical, providers, None, a.n_max, a.accept_threshold, a.top_k,
                          a.candidate_limit, workers=cfg.workers)
    dump_json({"document": result.document.to_record(), "trace": result.trace}, args.out)
    if args.append_to:
        target = Path(args.append_to)
        existing = corpus_mod.load(target) if target.exists() else corpus_mod.Corpus(())
        corpus_mod.save(corpus_mod.store_document(existing, result.document), target)
    return 0


def cmd_eval(args, cfg: RunConfig, trace: Trace) -> int:
    graph = _load_graph(args.graph)
    providers = _providers(cfg)
    corpus = corpus_mod.load(args.corpus)
    items = load_qa(args.qa)
    chunks = [ch for doc in corpus if doc.text.strip()
              for ch in chunk_document(doc, cfg.chunk.window_tokens, cfg.chunk.stride_tokens)]
    engine = _engine(graph, providers, cfg)
    flat = FlatRAG(chunks, providers.embed, providers.gen, cfg.retrieve.top_k)
    with trace.stage("eval"):
        report = compare_systems(
            items,
            {"graph_rag": lambda q: engine.query(q).answer, "flat_rag": flat.answer},
            providers.judge if args.judge else None,
        )
    dump_json(report, args.out)
    table = render_table(report)
    if args.table:
        Path(args.table).write_text(table, encoding="utf-8")
    else:
        sys.stderr.write(table)
    return 0


def cmd_export(args, cfg: RunConfig, trace: Trace) -> int:
    graph = _load_graph(args.graph)
    if args.format == "plot-data":
        dump_json(plot_data(graph, args.level), args.out)
        return 0
    script = export_statements(graph, None if args.out == "-" else args.out)
    if args.out == "-":
        sys.stdout.write(script)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgrag", description="Knowledge-graph RAG pipeline for chemical-process documents.")
    p.add_argument("--config", help="YAML run configuration (defaults apply when omitted)")
    p.add_argument("--trace", metavar="PATH", help="write stage timings and decisions as JSON ('-' for stderr)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="load documents into a corpus file")
    s.add_argument("paths", nargs="+", help="JSON Lines files or plain-text directories")
    s.add_argument("--format", choices=["jsonl", "plain-dir"], default="jsonl")
    s.add_argument("--out", required=True, help="corpus JSON Lines output")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("build", help="build the knowledge graph from a corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True, help="graph JSON output")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("communities", help="list detected communities")
    s.add_argument("--graph", required=True)
    s.add_argument("--level", type=int)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_communities)

    s = sub.add_parser("query", help="answer a question from the graph")
    s.add_argument("--graph", required=True)
    s.add_argument("text")
    s.add_argument("--top-k", type=int)
    s.add_argument("--max-hops", type=int)
    s.add_argument("--all-levels", action="store_true", help="rank communities from every level, not only the leaf")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("navigate", help="multi-agent acquisition for a task and chemical")
    s.add_argument("--task", required=True)
    s.add_argument("--chemical", default="")
    s.add_argument("--out", default="-")
    s.add_argument("--append-to", help="store the synthesized document into this corpus file")
    s.set_defaults(func=cmd_navigate)

    s = sub.add_parser("eval", help="compare graph RAG and flat RAG on a QA set")
    s.add_argument("--graph", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--qa", required=True)
    s.add_argument("--judge", action="store_true", help="also score answers with the judge provider")
    s.add_argument("--out", default="-")
    s.add_argument("--table", help="write the plain-text table here instead of stderr")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("export", help="write the graph as a statement script or plot data")
    s.add_argument("--graph", required=True)
    s.add_argument("--format", choices=["statements", "plot-data"], default="statements")
    s.add_argument("--level", type=int, default=0, help="community level used to label plot-data rows")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    trace = Trace()
    t0 = time.perf_counter()
    code = 0
    try:
        cfg = load_config(args.config)
        code = args.func(args, cfg, trace)
    except KGRagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.exit_code
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 5
    if args.trace:
        payload = {"command": args.command, "exit_code": code,
                   "seconds": round(time.perf_counter() - t0, 6), **trace.to_dict()}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        if args.trace == "-":
            sys.stderr.write(text)
        else:
            Path(args.trace).write_text(text, encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
