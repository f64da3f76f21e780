"""Entity and relation extraction from contextualized chunks, plus entity merging.

Extraction providers are asked for line-oriented records::

    ENTITY | <surface> | <type>
    RELATION | <subject surface> | <predicate> | <object surface> | <confidence>

The parser keeps every well-formed record line and ignores the rest.
"""

from __future__ import annotations

import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .chunking import ContextualizedChunk
from .errors import ExtractionFormatError
from .prompts import render_prompt
from .providers.base import normalize

logger = logging.getLogger(__name__)

ChunkRef = tuple[str, int]

DEFAULT_MAX_TRIPLES = 20
DEFAULT_TAU_SIM = 0.9
DEFAULT_TAU_STR = 0.8
DEFAULT_MAX_EDIT = 5


@dataclass(frozen=True)
class EntityMention:
    surface: str
    type_label: str
    chunk_ref: ChunkRef

    def __post_init__(self):
        if not self.surface:
            raise ValueError("mention surface must be non-empty")

    @property
    def entity_id(self) -> str:
        return entity_id(self.surface, self.type_label)


def entity_id(surface: str, type_label: str) -> str:
    return "e" + hashlib.sha1(f"{type_label}\x1f{surface}".encode()).hexdigest()[:12]


@dataclass(eq=False)
class Entity:
    id: str
    canonical_name: str
    aliases: frozenset[str]
    type_label: str
    embedding: np.ndarray
    provenance: frozenset[ChunkRef]
    # (surface, embedding) pairs of the pre-merge entities; the duplicate
    # test runs on these so merging stays a transitive closure over them
    variants: tuple[tuple[str, np.ndarray], ...] = ()

    def __post_init__(self):
        self.aliases = frozenset(self.aliases)
        self.provenance = frozenset(tuple(p) for p in self.provenance)
        self.embedding = np.asarray(self.embedding, dtype=np.float64)
        if self.canonical_name not in self.aliases:
            raise ValueError(f"entity {self.id}: canonical name {self.canonical_name!r} not among aliases")
        if abs(np.linalg.norm(self.embedding) - 1.0) > 1e-9:
            raise ValueError(f"entity {self.id}: embedding is not unit-norm")
        if not self.provenance:
            raise ValueError(f"entity {self.id}: empty provenance")
        if not self.variants:
            self.variants = ((self.canonical_name, self.embedding),)

    def __eq__(self, other):
        if not isinstance(other, Entity):
            return NotImplemented
        return (
            self.id == other.id
            and self.canonical_name == other.canonical_name
            and self.aliases == other.aliases
            and self.type_label == other.type_label
            and self.provenance == other.provenance
            and np.array_equal(self.embedding, other.embedding)
            and len(self.variants) == len(other.variants)
            and all(a == b and np.array_equal(u, v) for (a, u), (b, v) in zip(self.variants, other.variants))
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "canonical_name": self.canonical_name,
            "aliases": sorted(self.aliases),
            "type_label": self.type_label,
            "embedding": self.embedding.tolist(),
            "provenance": sorted([d, i] for d, i in self.provenance),
            "variants": [[name, vec.tolist()] for name, vec in self.variants],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Entity:
        return cls(
            id=d["id"],
            canonical_name=d["canonical_name"],
            aliases=frozenset(d["aliases"]),
            type_label=d["type_label"],
            embedding=np.asarray(d["embedding"], dtype=np.float64),
            provenance=frozenset((p[0], int(p[1])) for p in d["provenance"]),
            variants=tuple((name, np.asarray(vec, dtype=np.float64)) for name, vec in d["variants"]),
        )


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str
    chunk_ref: ChunkRef
    confidence: float = 1.0

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("triple predicate must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "chunk_ref", tuple(self.chunk_ref))

    @property
    def key(self) -> tuple:
        return (self.subject, self.predicate, self.object, self.chunk_ref)

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "predicate": self.predicate,
            "object": self.object,
            "chunk_ref": list(self.chunk_ref),
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Triple:
        ref = d["chunk_ref"]
        return cls(d["subject"], d["predicate"], d["object"], (ref[0], int(ref[1])), float(d["confidence"]))


def _record_lines(raw: str, tag: str, arity: Sequence[int]) -> tuple[list[list[str]], int]:
    """Return the well-formed ``tag`` records and the number of non-blank lines."""
    records, nonblank = [], 0
    for line in raw.splitlines():
        line = line.strip().strip("-*").strip()
        if not line:
            continue
        nonblank += 1
        fields = [f.strip() for f in line.split("|")]
        if fields[0].upper() != tag or len(fields) - 1 not in arity:
            continue
        if all(fields[1:]):
            records.append(fields[1:])
    return records, nonblank


def extract_entities(cc: ContextualizedChunk, gen) -> list[EntityMention]:
    if not cc.chunk.text.strip():
        return []
    prompt = render_prompt(
        "extract_entities",
        "List the named entities in the text (materials, equipment, chemicals, instruments, "
        "utilities, processes). Write one line per entity as: ENTITY | <name> | <type>",
        text=cc.enriched_text,
    )
    raw = gen.generate(prompt, max_tokens=1024)
    records, nonblank = _record_lines(raw, "ENTITY", (2,))
    if nonblank and not records and raw.strip().upper() != "NONE":
        raise ExtractionFormatError(f"chunk {cc.ref}: no ENTITY records in provider output")
    mentions: dict[str, EntityMention] = {}
    for surface, type_label in records:
        if surface not in mentions:
            mentions[surface] = EntityMention(surface, type_label, cc.ref)
    return list(mentions.values())


def extract_relations(
    cc: ContextualizedChunk, mentions: Sequence[EntityMention], gen, max_triples: int = DEFAULT_MAX_TRIPLES
) -> list[Triple]:
    if len(mentions) < 2:
        return []
    by_surface = {m.surface: m for m in mentions}
    by_folded = {m.surface.casefold(): m for m in mentions}
    prompt = render_prompt(
        "extract_relations",
        "Identify relationships between pairs of the listed entities that are stated in the text. "
        "Write one line per relationship as: "
        "RELATION | <subject> | <predicate> | <object> | <confidence 0-1>",
        entities="\n".join(f"{m.surface} | {m.type_label}" for m in mentions),
        text=cc.enriched_text,
    )
    raw = gen.generate(prompt, max_tokens=2048)
    records, nonblank = _record_lines(raw, "RELATION", (3, 4))
    if nonblank and not records and raw.strip().upper() != "NONE":
        raise ExtractionFormatError(f"chunk {cc.ref}: no RELATION records in provider output")
    triples = []
    for rec in records:
        subj = by_surface.get(rec[0]) or by_folded.get(rec[0].casefold())
        obj = by_surface.get(rec[2]) or by_folded.get(rec[2].casefold())
        if subj is None or obj is None or subj is obj:
            continue
        try:
            confidence = min(1.0, max(0.0, float(rec[3]))) if len(rec) == 4 else 1.0
        except ValueError:
            confidence = 1.0
        predicate = "_".join(rec[1].split())
        triples.append(Triple(subj.entity_id, predicate, obj.entity_id, cc.ref, confidence))
    # stable sort keeps input order among equal confidences
    triples.sort(key=lambda t: -t.confidence)
    return triples[:max_triples]


def normalize_name(name: str) -> str:
    return " ".join(name.casefold().split())


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def string_similarity(a: str, b: str) -> float:
    """``1 - lev(a, b) / max(|a|, |b|)`` on case-folded, whitespace-collapsed names.

    Two empty names count as identical.
    """
    na, nb = normalize_name(a), normalize_name(b)
    longest = max(len(na), len(nb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(na, nb) / longest


def entities_from_mentions(mentions: Iterable[EntityMention], embed) -> list[Entity]:
    """One entity per distinct (surface, type); identical strings embed identically."""
    grouped: dict[tuple[str, str], set] = defaultdict(set)
    for m in mentions:
        grouped[(m.surface, m.type_label)].add(m.chunk_ref)
    entities = []
    for (surface, type_label), refs in grouped.items():
        vec = normalize(embed.embed_text(surface))
        entities.append(Entity(entity_id(surface, type_label), surface, frozenset([surface]), type_label, vec, frozenset(refs)))
    entities.sort(key=lambda e: e.id)
    return entities


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def is_duplicate_pair(
    name_a: str, vec_a: np.ndarray, name_b: str, vec_b: np.ndarray,
    tau_sim: float = DEFAULT_TAU_SIM, tau_str: float = DEFAULT_TAU_STR, max_edit: int = DEFAULT_MAX_EDIT,
) -> bool:
    """Both thresholds must hold, plus the absolute edit-distance guard."""
    cos = float(np.dot(vec_a, vec_b) / (np.linalg.norm(vec_a) * np.linalg.norm(vec_b)))
    if cos < tau_sim:
        return False
    if levenshtein(normalize_name(name_a), normalize_name(name_b)) > max_edit:
        return False
    return string_similarity(name_a, name_b) >= tau_str


def _variant_key(variant: tuple[str, np.ndarray]) -> tuple:
    return (variant[0], variant[1].tobytes())


def merge_duplicates(
    entities: Sequence[Entity],
    triples: Sequence[Triple],
    tau_sim: float = DEFAULT_TAU_SIM,
    tau_str: float = DEFAULT_TAU_STR,
    max_edit: int = DEFAULT_MAX_EDIT,
) -> tuple[list[Entity], list[Triple]]:
    """Merge entities whose variants pass the pair test, transitively.

    Candidates are blocked by ``type_label``. Triples are rewritten onto the
    surviving ids; exact duplicates collapse (highest confidence kept) and
    self-loops produced by a merge are dropped.
    """
    uf = _UnionFind(len(entities))
    blocks: dict[str, list[int]] = defaultdict(list)
    for idx, ent in enumerate(entities):
        blocks[ent.type_label].append(idx)

    string_test: dict[tuple[str, str], bool] = {}
    for members in blocks.values():
        owners, names, vecs = [], [], []
        for idx in members:
            for name, vec in entities[idx].variants:
                owners.append(idx)
                names.append(name)
                vecs.append(vec)
        if len(owners) < 2:
            continue
        mat = np.vstack(vecs)
        mat = mat / np.linalg.norm(mat, axis=1, keepdims=True)
        sims = mat @ mat.T
        rows, cols = np.nonzero(np.triu(sims >= tau_sim, k=1))
        for i, j in zip(rows.tolist(), cols.tolist()):
            a, b = owners[i], owners[j]
            if uf.find(a) == uf.find(b):
                continue
            key = (names[i], names[j]) if names[i] <= names[j] else (names[j], names[i])
            if key not in string_test:
                na, nb = normalize_name(key[0]), normalize_name(key[1])
                string_test[key] = levenshtein(na, nb) <= max_edit and string_similarity(*key) >= tau_str
            if string_test[key]:
                uf.union(a, b)

    groups: dict[int, list[Entity]] = defaultdict(list)
    for idx, ent in enumerate(entities):
        groups[uf.find(idx)].append(ent)

    remap: dict[str, str] = {}
    merged: list[Entity] = []
    for members in groups.values():
        # fixed member order keeps the float mean independent of input order
        members.sort(key=lambda m: m.id)
        if len(members) == 1:
            ent = members[0]
        else:
            aliases = frozenset().union(*(m.aliases for m in members))
            head = min(members, key=lambda m: (m.canonical_name, m.id))
            variants = tuple(sorted((v for m in members for v in m.variants), key=_variant_key))
            ent = Entity(
                id=head.id,
                canonical_name=min(aliases),
                aliases=aliases,
                type_label=head.type_label,
                embedding=normalize(np.mean([m.embedding for m in members], axis=0)),
                provenance=frozenset().union(*(m.provenance for m in members)),
                variants=variants,
            )
        for m in members:
            remap[m.id] = ent.id
        merged.append(ent)
    merged.sort(key=lambda e: e.id)

    out: dict[tuple, Triple] = {}
    dropped = 0
    for t in triples:
        s, o = remap.get(t.subject), remap.get(t.object)
        if s is None or o is None:
            dropped += 1
            continue
        if s == o:
            dropped += 1
            continue
        nt = Triple(s, t.predicate, o, t.chunk_ref, t.confidence)
        prev = out.get(nt.key)
        if prev is None or nt.confidence > prev.confidence:
            out[nt.key] = nt
    if dropped:
        logger.info("merge dropped %d dangling or self-referencing triples", dropped)
    return merged, list(out.values())
