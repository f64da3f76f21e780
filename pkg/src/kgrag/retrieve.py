"""Query-time retrieval: community ranking, subgraph assembly, paths, answers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MissingSummaryError
from .graph.community import Community
from .graph.store import KnowledgeGraph
from .prompts import render_prompt
from .providers.base import cosine

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5
DEFAULT_MAX_HOPS = 3
DEFAULT_MAX_PATHS = 20
DEFAULT_LINK_THRESHOLD = 0.5
DEFAULT_LINK_TOP_N = 5
ANSWER_MAX_TOKENS = 512


@dataclass(frozen=True)
class CommunityScore:
    community_id: str
    score: float

    def to_dict(self) -> dict:
        return {"community_id": self.community_id, "score": self.score}


@dataclass(frozen=True)
class Path:
    """Alternating entity ids and predicates: ``(e1, r1, e2, ..., ek)``."""

    entities: tuple[str, ...]
    predicates: tuple[str, ...]
    edges: tuple[int, ...]  # triple indices, one per hop

    @property
    def hops(self) -> int:
        return len(self.predicates)

    @property
    def sequence(self) -> tuple[str, ...]:
        out = [self.entities[0]]
        for r, e in zip(self.predicates, self.entities[1:]):
            out += [r, e]
        return tuple(out)

    def render(self, graph: KnowledgeGraph) -> str:
        parts = [graph.name(self.entities[0])]
        for r, e in zip(self.predicates, self.entities[1:]):
            parts.append(f"-[{r}]-> {graph.name(e)}")
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {"sequence": list(self.sequence), "edges": list(self.edges)}


@dataclass
class QueryResult:
    query: str
    answer: str
    ranked_communities: list[CommunityScore] = field(default_factory=list)
    selected_communities: list[str] = field(default_factory=list)
    subgraph_nodes: frozenset[str] = frozenset()
    subgraph_edges: frozenset[int] = frozenset()
    seed_entities: list[str] = field(default_factory=list)
    paths: list[Path] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "answer": self.answer,
            "ranked_communities": [c.to_dict() for c in self.ranked_communities],
            "selected_communities": list(self.selected_communities),
            "subgraph": {"nodes": sorted(self.subgraph_nodes), "edges": sorted(self.subgraph_edges)},
            "seed_entities": list(self.seed_entities),
            "paths": [p.to_dict() for p in self.paths],
            "metadata": dict(sorted(self.metadata.items())),
        }


def _candidate_communities(graph: KnowledgeGraph, levels: Sequence[int] | None) -> list[Community]:
    hierarchy = graph.hierarchy
    if hierarchy is None:
        return []
    if levels is None:
        levels = hierarchy.levels[:1]
    wanted = set(levels)
    return [c for c in hierarchy.communities if c.level in wanted]


def rank_communities(query: str, graph: KnowledgeGraph, embed, levels: Sequence[int] | None = None) -> list[CommunityScore]:
    """Cosine of query and summary embeddings, descending; ties by community id.

    ``levels=None`` ranks the leaf (finest) level only.
    """
    communities = _candidate_communities(graph, levels)
    for c in communities:
        if c.summary_embedding is None:
            raise MissingSummaryError(c.id)
    if not communities:
        return []
    qv = np.asarray(embed.embed_text(query), dtype=np.float64)
    scores = [CommunityScore(c.id, cosine(qv, c.summary_embedding)) for c in communities]
    keys = {c.id: c.sort_key for c in communities}
    return sorted(scores, key=lambda s: (-s.score, keys[s.community_id]))


def build_subgraph(topk: Sequence[Community]) -> tuple[frozenset[str], frozenset[int]]:
    """Union of member sets and of induced edge sets."""
    if not topk:
        raise ValueError("build_subgraph needs at least one community")
    nodes = frozenset().union(*(c.members for c in topk))
    edges = frozenset().union(*(c.induced_edges for c in topk))
    return nodes, edges


def select_top_k(graph: KnowledgeGraph, ranked: Sequence[CommunityScore], k: int) -> list[Community]:
    if k < 1:
        raise ValueError("top-K must be >= 1")
    if k > len(ranked):
        logger.warning("top-K %d exceeds the %d ranked communities; clamping", k, len(ranked))
        k = len(ranked)
    return [graph.hierarchy.get(s.community_id) for s in ranked[:k]]


def extract_paths(
    graph: KnowledgeGraph,
    subgraph: tuple[frozenset[str], frozenset[int]],
    seeds: Sequence[str],
    max_hops: int = DEFAULT_MAX_HOPS,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> list[Path]:
    """Breadth-first, cycle-free directed paths from the seeds inside the subgraph.

    Ordered by hop count, then entity-id sequence, then predicates, and cut
    at ``max_paths``.
    """
    nodes, edges = subgraph
    kept = [s for s in dict.fromkeys(seeds) if s in nodes]
    if len(kept) < len(set(seeds)):
        logger.warning("dropped %d seed entities outside the query subgraph", len(set(seeds)) - len(kept))
    # parallel triples with the same predicate would only repeat a path
    out_edges: dict[str, list[int]] = {}
    seen_hops = set()
    for i in sorted(edges):
        t = graph.triples[i]
        hop = (t.subject, t.predicate, t.object)
        if t.subject in nodes and t.object in nodes and hop not in seen_hops:
            seen_hops.add(hop)
            out_edges.setdefault(t.subject, []).append(i)

    def key(p: Path):
        return (p.hops, p.entities, p.predicates, p.edges)

    found: list[Path] = []
    frontier = [Path((s,), (), ()) for s in kept]
    for _ in range(max_hops):
        nxt = []
        for p in frontier:
            for i in out_edges.get(p.entities[-1], ()):
                t = graph.triples[i]
                if t.object in p.entities:
                    continue
                nxt.append(Path(p.entities + (t.object,), p.predicates + (t.predicate,), p.edges + (i,)))
        nxt.sort(key=key)
        found.extend(nxt)
        if len(found) >= max_paths or not nxt:
            break
        frontier = nxt
    return found[:max_paths]


def query_entity_linking(
    query: str, graph: KnowledgeGraph, embed,
    threshold: float = DEFAULT_LINK_THRESHOLD, top_n: int = DEFAULT_LINK_TOP_N,
) -> list[str]:
    """Entities whose embedding has cosine >= threshold with the query, best first."""
    if not graph.entities:
        return []
    qv = np.asarray(embed.embed_text(query), dtype=np.float64)
    scored = [(cosine(qv, e.embedding), eid) for eid, e in graph.entities.items()]
    hits = sorted(((s, eid) for s, eid in scored if s >= threshold), key=lambda x: (-x[0], x[1]))
    return [eid for _, eid in hits[:top_n]]


def answer(query: str, paths: Sequence[Path], gen, graph: KnowledgeGraph | None = None) -> tuple[str, bool]:
    """Return ``(answer, low_evidence)``; with no paths the model sees only the query."""
    rendered = [p.render(graph) if graph is not None else " ".join(p.sequence) for p in paths]
    sections = {"query": query}
    if rendered:
        sections["paths"] = "\n".join(rendered)
    prompt = render_prompt(
        "answer",
        "Answer the query using the knowledge-graph reasoning paths. "
        "If no paths are given, answer from general knowledge and say the evidence is thin.",
        **sections,
    )
    return gen.generate(prompt, max_tokens=ANSWER_MAX_TOKENS), not rendered


@dataclass
class QueryOptions:
    top_k: int = DEFAULT_TOP_K
    max_hops: int = DEFAULT_MAX_HOPS
    max_paths: int = DEFAULT_MAX_PATHS
    link_threshold: float = DEFAULT_LINK_THRESHOLD
    link_top_n: int = DEFAULT_LINK_TOP_N
    all_levels: bool = False


class QueryEngine:
    """Read-only query pipeline over a built graph."""

    def __init__(self, graph: KnowledgeGraph, embed, gen, options: QueryOptions | None = None):
        self.graph = graph
        self.embed = embed
        self.gen = gen
        self.options = options or QueryOptions()

    def query(self, text: str, **overrides) -> QueryResult:
        opts = QueryOptions(**{**self.options.__dict__, **overrides})
        levels = self.graph.hierarchy.levels if (opts.all_levels and self.graph.hierarchy) else None
        ranked = rank_communities(text, self.graph, self.embed, levels)
        if ranked:
            top = select_top_k(self.graph, ranked, opts.top_k)
            nodes, edges = build_subgraph(top)
        else:
            top, nodes, edges = [], frozenset(), frozenset()
        seeds = [e for e in query_entity_linking(text, self.graph, self.embed, opts.link_threshold, opts.link_top_n)
                 if e in nodes]
        paths = extract_paths(self.graph, (nodes, edges), seeds, opts.max_hops, opts.max_paths)
        text_answer, low = answer(text, paths, self.gen, self.graph)
        return QueryResult(
            query=text,
            answer=text_answer,
            ranked_communities=ranked,
            selected_communities=[c.id for c in top],
            subgraph_nodes=nodes,
            subgraph_edges=edges,
            seed_entities=seeds,
            paths=paths,
            metadata={"low_evidence": low, "top_k": opts.top_k, "max_hops": opts.max_hops,
                      "levels": "all" if opts.all_levels else "leaf"},
        )
