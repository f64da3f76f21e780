"""Deterministic offline providers.

Every mock is a pure function of its seed and inputs, so whole pipeline runs
are reproducible byte for byte.

Templates used by :class:`MockGenerator`, keyed by the prompt's task tag:

``contextualize``
    ``Context for <title> part <chunk_index>``
``extract_entities``
    one ``ENTITY | <surface> | <type>`` line per lexicon term found in the
    ``text`` section, in order of first appearance.
``extract_relations``
    for every pair of consecutive listed entities inside one sentence, a
    ``RELATION | <subject> | <predicate> | <object> | <confidence>`` line. The
    predicate is the words between the two mentions (articles dropped) joined
    by ``_``, or ``related_to``; confidence is ``max(0.1, 1 - 0.1 * gap)`` for
    a gap of ``gap`` words.
anything else
    ``[<task>:<digest>]`` followed by the prompt's content lines (every
    section but ``instructions``), truncated to ``max_tokens`` tokens. The
    digest is the first 12 hex digits of SHA-256 over seed and content.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..chunking import tokenize
from ..corpus import Document, SourceKind
from ..errors import ConfigError, MissingInputError, ProviderContractError
from ..prompts import parse_prompt
from .base import RUBRIC_KEYS, DEFAULT_ACCEPT_THRESHOLD, Feedback, cosine

logger = logging.getLogger(__name__)

MOCK_DIM = 256
MAX_EMBED_CHARS = 32_000
RETRIEVAL_KINDS = ("image", "scholar", "patent", "wiki", "web")

_WORD = re.compile(r"\w+")
_ARTICLES = {"the", "a", "an"}
_SENTENCE_END = re.compile(r"[.!?;\n]+")


def words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


class MockEmbedder:
    """Seeded feature hashing of the lowercased word multiset, L2-normalized."""

    def __init__(self, seed: int = 0, dim: int = MOCK_DIM, image_root: str | Path | None = None):
        self.seed = seed
        self.dim = dim
        self.image_root = Path(image_root) if image_root is not None else None

    @lru_cache(maxsize=65536)
    def _bucket(self, word: str) -> tuple[int, float]:
        h = int.from_bytes(hashlib.blake2b(f"{self.seed}:{word}".encode(), digest_size=8).digest(), "big")
        return h % self.dim, 1.0 if (h >> 40) & 1 else -1.0

    def embed_text(self, text: str) -> np.ndarray:
        if len(text) > MAX_EMBED_CHARS:
            logger.warning("embedding input truncated from %d to %d characters", len(text), MAX_EMBED_CHARS)
            text = text[:MAX_EMBED_CHARS]
        vec = np.zeros(self.dim)
        toks = words(text) or ["<empty>"]
        for w in toks:
            idx, sign = self._bucket(w)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # opposite-sign collisions cancelled out exactly
            idx, sign = self._bucket("<empty>")
            vec[idx] = sign
            norm = 1.0
        return vec / norm

    def resolve_image(self, ref: str) -> Path:
        path = Path(ref)
        if not path.is_absolute() and self.image_root is not None:
            path = self.image_root / path
        if not path.is_file():
            raise MissingInputError(f"image reference {ref!r} does not resolve to a file")
        return path

    def embed_image(self, ref: str) -> np.ndarray:
        """Test shim: embeds the tokens of the image's file name as text."""
        path = self.resolve_image(ref)
        return self.embed_text(re.sub(r"[^0-9A-Za-z]+", " ", path.stem))


def load_lexicon(path: str | Path | None = None) -> dict[str, str]:
    """Read a ``surface<TAB>type`` table; the bundled table when path is None."""
    if path is None:
        text = resources.files("kgrag.data").joinpath("lexicon.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    table: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        surface, _, type_label = line.partition("\t")
        if not type_label:
            raise ConfigError(f"lexicon line without a type: {line!r}")
        table[surface.strip().lower()] = type_label.strip()
    return table


def _term_pattern(terms) -> re.Pattern | None:
    terms = sorted(set(terms), key=lambda t: (-len(t), t))
    if not terms:
        return None
    alt = "|".join(re.escape(t) for t in terms)
    return re.compile(rf"(?<!\w)({alt})(?!\w)", re.IGNORECASE)


class MockGenerator:
    """Template-driven text generation (see module docstring)."""

    def __init__(self, seed: int = 0, lexicon: dict[str, str] | None = None):
        self.seed = seed
        self.lexicon = load_lexicon() if lexicon is None else {k.lower(): v for k, v in lexicon.items()}
        self._pattern = _term_pattern(self.lexicon)
        self.calls = 0

    def generate(self, prompt: str, max_tokens: int = 512) -> str:
        if not prompt or not prompt.strip():
            raise ValueError("prompt must be non-empty")
        self.calls += 1
        task, sections = parse_prompt(prompt)
        if task == "contextualize":
            out = f"Context for {sections.get('title', '').strip()} part {sections.get('chunk_index', '').strip()}"
        elif task == "extract_entities":
            out = self._entities(sections.get("text", ""))
        elif task == "extract_relations":
            out = self._relations(sections.get("text", ""), sections.get("entities", ""))
        else:
            out = self._echo(task or "generate", sections)
        return _truncate(out, max_tokens)

    def _entities(self, text: str) -> str:
        if self._pattern is None:
            return ""
        seen: dict[str, None] = {}
        for m in self._pattern.finditer(text):
            seen.setdefault(m.group(1).lower())
        return "\n".join(f"ENTITY | {s} | {self.lexicon[s]}" for s in seen)

    def _relations(self, text: str, entity_block: str) -> str:
        listed = [line.split("|")[0].strip().lower() for line in entity_block.splitlines() if line.strip()]
        pattern = _term_pattern(t for t in listed if t)
        if pattern is None:
            return ""
        lines = []
        for sentence in _SENTENCE_END.split(text):
            hits = list(pattern.finditer(sentence))
            for left, right in zip(hits, hits[1:]):
                subj, obj = left.group(1).lower(), right.group(1).lower()
                if subj == obj:
                    continue
                between = words(sentence[left.end():right.start()])
                content = [w for w in between if w not in _ARTICLES]
                predicate = "_".join(content) or "related_to"
                confidence = round(max(0.1, 1.0 - 0.1 * len(between)), 2)
                lines.append(f"RELATION | {subj} | {predicate} | {obj} | {confidence}")
        return "\n".join(lines)

    def _echo(self, task: str, sections: dict[str, str]) -> str:
        content = [
            line.strip()
            for name, body in sections.items()
            if name != "instructions"
            for line in body.splitlines()
            if line.strip()
        ]
        digest = hashlib.sha256((f"{self.seed}\n" + "\n".join(content)).encode()).hexdigest()[:12]
        return "\n".join([f"[{task}:{digest}]"] + content)


def _truncate(text: str, max_tokens: int) -> str:
    toks = tokenize(text)
    if len(toks) <= max_tokens:
        return text
    if max_tokens <= 0:
        return ""
    return text[: toks.offsets[max_tokens - 1][1]]


class MockSearch:
    """Cosine search over a fixture index using mock embeddings."""

    def __init__(self, index: dict[str, list[Document]], embedder: MockEmbedder):
        self.index = index
        self.embedder = embedder
        self._vectors: dict[str, np.ndarray] = {}

    @classmethod
    def from_dir(cls, path: str | Path, embedder: MockEmbedder) -> MockSearch:
        """Load ``manifest.yaml`` (``kinds: {kind: file.jsonl}``) and its files."""
        from ..corpus import load

        root = Path(path)
        manifest_path = root / "manifest.yaml"
        if not manifest_path.is_file():
            raise MissingInputError(f"search index manifest not found: {manifest_path}")
        manifest = yaml.safe_load(manifest_path.read_text(encoding="utf-8")) or {}
        index = {}
        for kind, rel in (manifest.get("kinds") or {}).items():
            if kind not in RETRIEVAL_KINDS:
                raise ConfigError(f"unknown source kind {kind!r} in {manifest_path}")
            index[kind] = list(load(root / rel).documents)
        if embedder.image_root is None:
            embedder.image_root = root
        return cls(index, embedder)

    def _doc_vector(self, doc: Document) -> np.ndarray:
        if doc.id not in self._vectors:
            if doc.source_kind is SourceKind.IMAGE:
                vec = self.embedder.embed_image(doc.metadata["image_ref"])
            else:
                vec = self.embedder.embed_text(f"{doc.title}\n{doc.text}")
            self._vectors[doc.id] = vec
        return self._vectors[doc.id]

    def search(self, source_kind: str, query: str, limit: int = 10) -> list[Document]:
        if source_kind not in RETRIEVAL_KINDS:
            raise ConfigError(f"unknown source kind {source_kind!r}")
        if limit < 1:
            raise ValueError("limit must be >= 1")
        docs = self.index.get(source_kind, [])
        if not docs:
            return []
        q = self.embedder.embed_text(query)
        scored = sorted(docs, key=lambda d: (-cosine(q, self._doc_vector(d)), d.id))
        return scored[:limit]


class MockJudge:
    """Token-overlap rubric scorer.

    With ``A`` the answer's words, ``R`` the reference words (the reference
    text if one was given, else the query), and set overlap ``O``::

        helpfulness = 4 * |O| / |set(R)|
        correctness = 4 * |O| / |set(A)|
        coherence   = 4 * |set(A)| / |A|          (penalizes repetition)
        complexity  = 4 * min(1, |set(A)| / |set(R)|)
        verbosity   = 4 * min(1, |A| / |R|)

    An empty answer scores 0 everywhere.
    """

    def __init__(self, reference: str | None = None, accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD):
        self.reference = reference
        self.accept_threshold = accept_threshold
        self.calls = 0

    def judge(self, query: str, answer: str) -> Feedback:
        self.calls += 1
        a = words(answer)
        r = words(self.reference if self.reference is not None else query)
        if not a:
            scores = dict.fromkeys(RUBRIC_KEYS, 0.0)
        else:
            sa, sr = set(a), set(r)
            overlap = len(sa & sr)
            scores = {
                "helpfulness": 4.0 * overlap / len(sr) if sr else 4.0,
                "correctness": 4.0 * overlap / len(sa),
                "coherence": 4.0 * len(sa) / len(a),
                "complexity": 4.0 * min(1.0, len(sa) / max(len(sr), 1)),
                "verbosity": 4.0 * min(1.0, len(a) / max(len(r), 1)),
            }
        scores = {k: round(min(4.0, max(0.0, v)), 6) for k, v in scores.items()}
        fb = Feedback(scores, comments=json.dumps({"answer_words": len(a)}))
        return fb.with_threshold(self.accept_threshold)


class ScriptedGenerator:
    """Returns canned outputs in order; handy for exercising parsers."""

    def __init__(self, outputs: list[str]):
        self.outputs = list(outputs)
        self.prompts: list[str] = []

    def generate(self, prompt: str, max_tokens: int = 512) -> str:
        self.prompts.append(prompt)
        if not self.outputs:
            raise ProviderContractError("scripted generator exhausted")
        return self.outputs.pop(0) if len(self.outputs) > 1 else self.outputs[0]
