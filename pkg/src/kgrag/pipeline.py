"""Corpus to knowledge graph: chunk, contextualize, extract, merge, cluster, summarize."""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from .chunking import ContextualizedChunk, chunk_document, contextualize
from .config import RunConfig
from .corpus import Corpus
from .errors import ExtractionFormatError
from .extract import EntityMention, Triple, entities_from_mentions, extract_entities, extract_relations, merge_duplicates
from .graph import KnowledgeGraph, detect_communities, summarize_all

logger = logging.getLogger(__name__)


@dataclass
class Trace:
    """Stage timings (seconds) and counters; timings are wall-clock and vary between runs."""

    stages: list[dict] = field(default_factory=list)
    decisions: dict = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        record = {"stage": name}
        try:
            yield record
        finally:
            record["seconds"] = round(time.perf_counter() - t0, 6)
            self.stages.append(record)

    def to_dict(self) -> dict:
        return {"stages": self.stages, "decisions": self.decisions}


def contextualize_corpus(corpus: Corpus, gen, cfg: RunConfig) -> list[ContextualizedChunk]:
    out = []
    for doc in corpus:
        if not doc.text.strip():
            continue
        for chunk in chunk_document(doc, cfg.chunk.window_tokens, cfg.chunk.stride_tokens):
            out.append(contextualize(doc, chunk, gen, cfg.chunk.context_budget_tokens))
    return out


def extract_all(chunks: list[ContextualizedChunk], gen, cfg: RunConfig) -> tuple[list[EntityMention], list[Triple], list]:
    """Extract per chunk; a chunk with malformed provider output is skipped and reported."""
    mentions: list[EntityMention] = []
    triples: list[Triple] = []
    skipped = []
    for cc in chunks:
        try:
            ms = extract_entities(cc, gen)
            ts = extract_relations(cc, ms, gen, cfg.extract.max_triples_per_chunk)
        except ExtractionFormatError as exc:
            logger.warning("skipping chunk %s: %s", cc.ref, exc)
            skipped.append(list(cc.ref))
            continue
        mentions.extend(ms)
        triples.extend(ts)
    return mentions, triples, skipped


def build_graph(corpus: Corpus, providers, cfg: RunConfig, trace: Trace | None = None) -> KnowledgeGraph:
    trace = trace or Trace()
    gen, embed = providers.gen, providers.embed
    with trace.stage("chunk+contextualize") as rec:
        chunks = contextualize_corpus(corpus, gen, cfg)
        rec["chunks"] = len(chunks)
    with trace.stage("extract") as rec:
        mentions, triples, skipped = extract_all(chunks, gen, cfg)
        rec.update(mentions=len(mentions), triples=len(triples), skipped=len(skipped))
        trace.decisions["skipped_chunks"] = skipped
    with trace.stage("dedup") as rec:
        entities = entities_from_mentions(mentions, embed)
        d = cfg.dedup
        entities, triples = merge_duplicates(entities, triples, d.tau_sim, d.tau_str, d.max_edit_distance)
        rec.update(entities=len(entities), triples=len(triples))
    graph = KnowledgeGraph(entities, triples)
    with trace.stage("communities") as rec:
        c = cfg.community
        graph.hierarchy = detect_communities(graph, c.seed, c.max_levels, c.resolution, c.restarts)
        rec["per_level"] = {str(lv): len(graph.hierarchy.at_level(lv)) for lv in graph.hierarchy.levels}
    with trace.stage("summaries") as rec:
        summarize_all(graph, gen, embed, cfg.workers)
        rec["cached"] = len(graph.summary_cache)
    return graph
