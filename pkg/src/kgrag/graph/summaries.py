"""Community summaries and their embeddings, cached by content hash."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import ProviderError
from ..prompts import render_prompt
from ..providers.base import normalize
from .community import Community
from .store import KnowledgeGraph

logger = logging.getLogger(__name__)

# keeps prompts bounded for very large communities
MAX_SERIALIZED_LINES = 400
SUMMARY_MAX_TOKENS = 256


def serialize_relations(community: Community, graph: KnowledgeGraph) -> str:
    """Sorted, de-duplicated ``subject -[predicate]-> object`` lines.

    A community without internal edges is described by its members as
    ``name (type)`` lines instead.
    """
    lines = sorted({
        f"{graph.name(t.subject)} -[{t.predicate}]-> {graph.name(t.object)}"
        for t in (graph.triples[i] for i in community.induced_edges)
    })
    if not lines:
        lines = sorted(f"{graph.name(m)} ({graph.entities[m].type_label})" for m in community.members)
    return "\n".join(lines[:MAX_SERIALIZED_LINES])


def cache_key(serialized: str) -> str:
    return hashlib.sha256(("summarize_community\n" + serialized).encode("utf-8")).hexdigest()


def summarize_community(community: Community, graph: KnowledgeGraph, gen, embed=None) -> Community:
    """Attach summary text (and its embedding when ``embed`` is given).

    Results live in ``graph.summary_cache``; an unchanged community costs no
    provider calls.
    """
    serialized = serialize_relations(community, graph)
    key = cache_key(serialized)
    entry = graph.summary_cache.get(key)
    if entry is None or (embed is not None and entry.get("embedding") is None):
        try:
            summary = entry["summary"] if entry else gen.generate(
                render_prompt(
                    "summarize_community",
                    "Condense these knowledge-graph relationships into a short report that names the "
                    "key entities and how they are connected.",
                    relations=serialized,
                ),
                max_tokens=SUMMARY_MAX_TOKENS,
            )
            vector = normalize(embed.embed_text(summary)).tolist() if embed is not None else None
        except ProviderError as exc:
            raise type(exc)(f"community {community.id}: {exc}") from exc
        entry = {"summary": summary, "embedding": vector}
        graph.summary_cache[key] = entry
    vec = entry.get("embedding")
    return Community(
        community.id, community.level, community.members, community.induced_edges,
        entry["summary"], None if vec is None else np.asarray(vec, dtype=np.float64),
    )


def summarize_all(graph: KnowledgeGraph, gen, embed, workers: int = 1) -> None:
    """Summarize every community of the graph's hierarchy in place."""
    hierarchy = graph.hierarchy
    if hierarchy is None:
        return
    # distinct serializations are generated once, then every community is a cache hit
    pending = {}
    for c in hierarchy.communities:
        key = cache_key(serialize_relations(c, graph))
        if key not in graph.summary_cache and key not in pending:
            pending[key] = c
    if workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda c: summarize_community(c, graph, gen, embed), pending.values()))
    hierarchy.communities = [summarize_community(c, graph, gen, embed) for c in hierarchy.communities]
    logger.info("summarized %d communities (%d generated)", len(hierarchy.communities), len(pending))
