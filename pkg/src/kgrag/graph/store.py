"""Knowledge graph container, persistence and statement-script export."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import DataError, GraphFormatError, GraphNotBuiltError, UnsupportedVersionError
from ..extract import Entity, Triple
from .community import CommunityHierarchy, UndirectedGraph

FORMAT_NAME = "kgrag-graph"
FORMAT_VERSION = 1


class KnowledgeGraph:
    """Deduplicated entities plus predicate-labelled triples.

    Community detection sees the undirected projection: one edge per
    unordered entity pair, weighted by the number of triples joining them.
    """

    def __init__(
        self,
        entities: Iterable[Entity] = (),
        triples: Iterable[Triple] = (),
        hierarchy: CommunityHierarchy | None = None,
        summary_cache: dict | None = None,
    ):
        self.entities: dict[str, Entity] = {e.id: e for e in sorted(entities, key=lambda e: e.id)}
        self.triples: list[Triple] = list(triples)
        for t in self.triples:
            for end in (t.subject, t.object):
                if end not in self.entities:
                    raise DataError(f"triple {t.key} references unknown entity {end!r}")
        self.hierarchy = hierarchy
        self.summary_cache: dict[str, dict] = dict(summary_cache or {})

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.entities == other.entities
            and self.triples == other.triples
            and self.hierarchy == other.hierarchy
            and self.summary_cache == other.summary_cache
        )

    @property
    def adjacency(self) -> dict[str, list[str]]:
        nbrs: dict[str, set] = {eid: set() for eid in self.entities}
        for t in self.triples:
            if t.subject != t.object:
                nbrs[t.subject].add(t.object)
                nbrs[t.object].add(t.subject)
        return {eid: sorted(s) for eid, s in nbrs.items()}

    def projection(self) -> UndirectedGraph:
        return UndirectedGraph.from_edges(list(self.entities), ((t.subject, t.object) for t in self.triples))

    def induced_edges(self, members) -> frozenset[int]:
        members = set(members)
        return frozenset(i for i, t in enumerate(self.triples) if t.subject in members and t.object in members)

    def name(self, entity_id: str) -> str:
        return self.entities[entity_id].canonical_name

    @property
    def communities(self):
        if self.hierarchy is None:
            raise GraphNotBuiltError("graph has no communities; run community detection first")
        return self.hierarchy.communities

    def out_edges(self) -> dict[str, list[int]]:
        index: dict[str, list[int]] = defaultdict(list)
        for i, t in enumerate(self.triples):
            index[t.subject].append(i)
        return index

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "entities": [e.to_dict() for e in self.entities.values()],
            "triples": [t.to_dict() for t in self.triples],
            "hierarchy": None if self.hierarchy is None else self.hierarchy.to_dict(),
            "summary_cache": dict(sorted(self.summary_cache.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True) + "\n"

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> KnowledgeGraph:
        if not isinstance(d, dict) or d.get("format") != FORMAT_NAME:
            raise GraphFormatError("not a knowledge graph file")
        if d.get("version") != FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"graph file version {d.get('version')!r} is not supported (expected {FORMAT_VERSION})"
            )
        try:
            hierarchy = d.get("hierarchy")
            return cls(
                [Entity.from_dict(e) for e in d["entities"]],
                [Triple.from_dict(t) for t in d["triples"]],
                None if hierarchy is None else CommunityHierarchy.from_dict(hierarchy),
                d.get("summary_cache") or {},
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise GraphFormatError(f"malformed graph file: {exc}") from exc


def save(graph: KnowledgeGraph, path: str | Path) -> None:
    """Write atomically so a crash never leaves a half-written graph behind."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(graph.to_json())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def load(path: str | Path) -> KnowledgeGraph:
    path = Path(path)
    if not path.is_file():
        raise GraphNotBuiltError(f"graph file {path} not found; run build first")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    return KnowledgeGraph.from_dict(data)


def escape_literal(value: str) -> str:
    """Escape for a double-quoted statement literal: ``\\``, ``"``, newline, CR, tab."""
    return (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def export_statements(graph: KnowledgeGraph, path: str | Path | None = None) -> str:
    """Render the graph as a property-graph statement script, one statement per line.

    Dialect (Cypher-compatible)::

        CREATE (:Entity {id: "<id>", name: "<name>", type: "<type>"});
        MATCH (s:Entity {id: "<id>"}), (o:Entity {id: "<id>"}) CREATE (s)-[:RELATION {predicate: "<p>", doc: "<doc id>", chunk: <n>, confidence: <c>}]->(o);

    Lines starting with ``//`` are comments. String literals are escaped by
    :func:`escape_literal`.
    """
    q = escape_literal
    lines = [f"// {FORMAT_NAME} statements v{FORMAT_VERSION}: {len(graph.entities)} nodes, {len(graph.triples)} edges"]
    for e in graph.entities.values():
        lines.append(f'CREATE (:Entity {{id: "{q(e.id)}", name: "{q(e.canonical_name)}", type: "{q(e.type_label)}"}});')
    for t in graph.triples:
        lines.append(
            f'MATCH (s:Entity {{id: "{q(t.subject)}"}}), (o:Entity {{id: "{q(t.object)}"}}) '
            f'CREATE (s)-[:RELATION {{predicate: "{q(t.predicate)}", doc: "{q(t.chunk_ref[0])}", '
            f"chunk: {t.chunk_ref[1]}, confidence: {t.confidence!r}}}]->(o);"
        )
    script = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(script, encoding="utf-8")
    return script


def plot_data(graph: KnowledgeGraph, level: int = 0) -> list[dict]:
    """Entity rows with 2-D PCA coordinates of their embeddings, for external plotting.

    Components come from an SVD of the centred embedding matrix; each
    component's sign is fixed so its largest-magnitude loading is positive.
    """
    ents = list(graph.entities.values())
    if not ents:
        return []
    x = np.vstack([e.embedding for e in ents]).astype(np.float64)
    x = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(x, full_matrices=False)
    comps = vt[:2]
    for i, row in enumerate(comps):
        if row[np.argmax(np.abs(row))] < 0:
            comps[i] = -row
    coords = x @ comps.T
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((len(ents), 2 - coords.shape[1]))])
    membership = {}
    if graph.hierarchy is not None:
        for c in graph.hierarchy.at_level(level):
            for m in c.members:
                membership[m] = c.id
    return [
        {"id": e.id, "name": e.canonical_name, "type": e.type_label, "community": membership.get(e.id),
         "x": round(float(cx), 12), "y": round(float(cy), 12)}
        for e, (cx, cy) in zip(ents, coords)
    ]
