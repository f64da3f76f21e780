from __future__ import annotations

import hashlib
import logging
import random

import numpy as np
import pytest

from kgrag.errors import MissingSummaryError
from kgrag.extract import Entity, Triple
from kgrag.graph import KnowledgeGraph
from kgrag.graph.community import Community, CommunityHierarchy, Partition
from kgrag.retrieve import (
    QueryEngine,
    QueryOptions,
    answer,
    build_subgraph,
    extract_paths,
    query_entity_linking,
    rank_communities,
    select_top_k,
)
from kgrag.providers import normalize

from builders import TableEmbed, random_kg, unit
from oracles import all_paths, cos


def kg_with(entities, triples, groups, summaries=None):
    ents = [Entity(e, e, frozenset([e]), "Material", np.array([1.0, 0.0]), frozenset([("d", 0)])) for e in entities]
    graph = KnowledgeGraph(ents, triples)
    comms = []
    for i, members in enumerate(groups):
        vec = None if summaries is None else np.asarray(summaries[i], dtype=float)
        comms.append(Community(f"L0-{i}", 0, frozenset(members), graph.induced_edges(members), f"s{i}", vec))
    assignment = {m: c.id for c in comms for m in c.members}
    graph.hierarchy = CommunityHierarchy([Partition(assignment, 0.0, 0)], comms)
    return graph


def chain_graph():
    triples = [Triple("a", "r1", "b", ("d", 0)), Triple("b", "r2", "c", ("d", 0))]
    return kg_with("abc", triples, ["abc"], [[1, 0]])


# ---- ranking ---------------------------------------------------------------

def test_rank_orthogonal():
    graph = kg_with("ab", [], ["a", "b"], [[1, 0], [0, 1]])
    ranked = rank_communities("q", graph, TableEmbed({"q": np.array([1.0, 0.0])}))
    assert [(r.community_id, r.score) for r in ranked] == [("L0-0", 1.0), ("L0-1", 0.0)]


def test_rank_identity_under_mock(embed):
    texts = ["ammonia converter yields ammonia", "cooling water supplies the condenser", "naphtha cracker"]
    graph = kg_with("abc", [], ["a", "b", "c"], [embed.embed_text(t) for t in texts])
    ranked = rank_communities(texts[1], graph, embed)
    assert ranked[0].community_id == "L0-1"
    assert ranked[0].score == pytest.approx(1.0, abs=1e-12)


def test_rank_missing_summary_named():
    graph = kg_with("ab", [], ["a", "b"], [[1, 0], [0, 1]])
    graph.hierarchy.communities[1].summary_embedding = None
    with pytest.raises(MissingSummaryError, match="L0-1"):
        rank_communities("q", graph, TableEmbed({"q": np.array([1.0, 0.0])}))


def rank_oracle(query_vec, communities):
    scored = [(cos(query_vec, c.summary_embedding), c) for c in communities]
    scored.sort(key=lambda sc: (-sc[0], sc[1].level, int(sc[1].id.split("-")[1])))
    return [(c.id, s) for s, c in scored]


def test_rank_and_top_k_match_oracle():
    rng = random.Random(31)
    for _ in range(100):
        graph = random_kg(rng, rng.randint(2, 16), rng.randint(1, 24))
        qv = unit(rng, 6)
        embed = TableEmbed({"q": qv})
        all_levels = rng.random() < 0.5
        levels = graph.hierarchy.levels if all_levels else None
        ranked = rank_communities("q", graph, embed, levels)
        pool = [c for c in graph.hierarchy.communities if all_levels or c.level == 0]
        expected = rank_oracle(qv, pool)
        assert [r.community_id for r in ranked] == [cid for cid, _ in expected]
        for r, (_, s) in zip(ranked, expected):
            assert abs(r.score - s) <= 1e-12 and -1.0 <= r.score <= 1.0
        for k in range(1, len(ranked) + 1):
            assert [c.id for c in select_top_k(graph, ranked, k)] == [cid for cid, _ in expected[:k]]


def test_top_k_clamped_with_warning(caplog):
    graph = kg_with("ab", [], ["a", "b"], [[1, 0], [0, 1]])
    ranked = rank_communities("q", graph, TableEmbed({"q": np.array([1.0, 0.0])}))
    with caplog.at_level(logging.WARNING):
        top = select_top_k(graph, ranked, 9)
    assert len(top) == 2 and "clamping" in caplog.text
    with pytest.raises(ValueError):
        select_top_k(graph, ranked, 0)


# ---- subgraph --------------------------------------------------------------

def test_subgraph_unions():
    triples = [Triple("a", "p", "b", ("d", 0)), Triple("c", "p", "d", ("d", 0)), Triple("b", "p", "c", ("d", 0))]
    graph = kg_with("abcd", triples, ["ab", "cd"], [[1, 0], [0, 1]])
    c0, c1 = graph.hierarchy.communities
    assert build_subgraph([c0]) == (c0.members, c0.induced_edges)
    nodes, edges = build_subgraph([c0, c1])
    assert nodes == set("abcd") and edges == {0, 1}
    with pytest.raises(ValueError):
        build_subgraph([])


def test_subgraph_overlapping_levels():
    rng = random.Random(4)
    for _ in range(30):
        graph = random_kg(rng, rng.randint(3, 14), rng.randint(2, 20))
        comms = graph.hierarchy.communities
        pick = rng.sample(comms, rng.randint(1, len(comms)))
        nodes, edges = build_subgraph(pick)
        assert nodes == set().union(*(c.members for c in pick))
        assert edges == set().union(*(c.induced_edges for c in pick))
        for i in edges:
            t = graph.triples[i]
            assert t.subject in nodes and t.object in nodes


# ---- paths -----------------------------------------------------------------

def test_chain_paths():
    graph = chain_graph()
    sub = build_subgraph(graph.hierarchy.communities)
    paths = extract_paths(graph, sub, ["a"], max_hops=2)
    assert [p.sequence for p in paths] == [("a", "r1", "b"), ("a", "r1", "b", "r2", "c")]
    assert [p.sequence for p in extract_paths(graph, sub, ["a"], max_hops=2, max_paths=1)] == [("a", "r1", "b")]


def test_seed_outside_subgraph(caplog):
    graph = chain_graph()
    sub = (frozenset("ab"), frozenset({0}))
    with caplog.at_level(logging.WARNING):
        assert extract_paths(graph, sub, ["c"]) == []
    assert "dropped 1 seed" in caplog.text
    assert extract_paths(graph, sub, []) == []


def verify_path(graph, sub, path, max_hops):
    nodes, edges = sub
    assert 1 <= path.hops <= max_hops
    assert len(set(path.entities)) == len(path.entities)
    for (s, o), r, i in zip(zip(path.entities, path.entities[1:]), path.predicates, path.edges):
        t = graph.triples[i]
        assert (t.subject, t.predicate, t.object) == (s, r, o)
        assert i in edges and s in nodes and o in nodes


def test_paths_match_oracle():
    rng = random.Random(17)
    for _ in range(100):
        graph = random_kg(rng, rng.randint(2, 10), rng.randint(1, 22))
        comms = graph.hierarchy.at_level(0)
        sub = build_subgraph(rng.sample(comms, rng.randint(1, len(comms))))
        seeds = rng.sample(sorted(graph.entities), rng.randint(1, min(3, len(graph.entities))))
        max_hops, max_paths = rng.randint(1, 4), rng.randint(1, 30)
        paths = extract_paths(graph, sub, seeds, max_hops, max_paths)
        sub_triples = [graph.triples[i] for i in sorted(sub[1])]
        expected = sorted(all_paths(sub_triples, sub[0], seeds, max_hops), key=lambda ep: (len(ep[1]), ep[0], ep[1]))
        assert [(p.entities, p.predicates) for p in paths] == expected[:max_paths]
        for p in paths:
            verify_path(graph, sub, p, max_hops)


# ---- linking and answers ---------------------------------------------------

def test_entity_linking(embed):
    names = ["ammonia converter", "cooling water", "iron catalyst"]
    ents = [Entity(n, n, frozenset([n]), "Equipment", normalize(embed.embed_text(n)), frozenset([("d", 0)])) for n in names]
    graph = KnowledgeGraph(ents, [])
    assert query_entity_linking("cooling water", graph, embed)[0] == "cooling water"
    assert query_entity_linking("zzz qqq", graph, embed) == []
    assert query_entity_linking("anything", KnowledgeGraph(), embed) == []


def test_entity_linking_top_n_oracle():
    rng = random.Random(8)
    for _ in range(50):
        graph = random_kg(rng, rng.randint(1, 20), 0, dim=3)
        qv = unit(rng, 3)
        threshold, top_n = rng.uniform(-0.5, 0.9), rng.randint(1, 6)
        got = query_entity_linking("q", graph, TableEmbed({"q": qv}), threshold, top_n)
        scored = sorted((-cos(qv, e.embedding), eid) for eid, e in graph.entities.items()
                        if cos(qv, e.embedding) >= threshold)
        assert got == [eid for _, eid in scored[:top_n]]


def expected_echo(task, lines, seed=0):
    digest = hashlib.sha256((f"{seed}\n" + "\n".join(lines)).encode()).hexdigest()[:12]
    return "\n".join([f"[{task}:{digest}]"] + lines)


def test_answer_mock_template(gen):
    graph = chain_graph()
    paths = extract_paths(graph, build_subgraph(graph.hierarchy.communities), ["a"], 2)
    text, low = answer("what feeds c?", paths, gen, graph)
    assert not low
    assert text == expected_echo("answer", ["what feeds c?", "a -[r1]-> b", "a -[r1]-> b -[r2]-> c"])


def test_answer_without_paths_is_low_evidence(gen):
    text, low = answer("what feeds c?", [], gen)
    assert low and text == expected_echo("answer", ["what feeds c?"])


def test_query_engine_fixture(fixture_graph, fixture_providers):
    engine = QueryEngine(fixture_graph, fixture_providers.embed, fixture_providers.gen)
    q = "Which catalyst does the methanol reactor use?"
    r1, r2 = engine.query(q), engine.query(q)
    assert r1.to_dict() == r2.to_dict()
    top = [fixture_graph.hierarchy.get(cid) for cid in r1.selected_communities]
    assert len(top) == 5 and all(c.level == 0 for c in top)
    assert r1.subgraph_nodes == frozenset().union(*(c.members for c in top))
    assert r1.subgraph_edges == frozenset().union(*(c.induced_edges for c in top))
    assert r1.paths and not r1.metadata["low_evidence"]
    for p in r1.paths:
        verify_path(fixture_graph, (r1.subgraph_nodes, r1.subgraph_edges), p, 3)
    wide = engine.query(q, all_levels=True, top_k=2)
    assert len(wide.ranked_communities) == len(fixture_graph.hierarchy.communities)
    assert wide.metadata["levels"] == "all" and len(wide.selected_communities) == 2


def test_query_options_defaults():
    o = QueryOptions()
    assert (o.top_k, o.max_hops, o.max_paths, o.link_threshold, o.link_top_n, o.all_levels) == (5, 3, 20, 0.5, 5, False)
