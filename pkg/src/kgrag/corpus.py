"""Document corpus: load, store and persist source documents.

Corpora are persisted as JSON Lines, one document object per line with the
fields ``id``, ``source_kind``, ``title``, ``text`` and ``metadata``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ConflictError, DataError, MissingInputError, ParseError

logger = logging.getLogger(__name__)


class SourceKind(str, Enum):
    IMAGE = "image"
    SCHOLAR = "scholar"
    PATENT = "patent"
    WIKI = "wiki"
    WEB = "web"
    SYNTHESIZED = "synthesized"


@dataclass(frozen=True)
class Document:
    id: str
    source_kind: SourceKind
    title: str
    text: str
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise DataError("document id must be non-empty")
        object.__setattr__(self, "source_kind", SourceKind(self.source_kind))
        if self.source_kind is not SourceKind.IMAGE and not self.text:
            raise DataError(f"document {self.id!r}: text is empty")
        for key in self.metadata:
            if not (key.isascii() and key == key.lower()):
                raise DataError(f"document {self.id!r}: metadata key {key!r} must be lowercase ASCII")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "source_kind": self.source_kind.value,
            "title": self.title,
            "text": self.text,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_record(cls, record: dict) -> Document:
        if not isinstance(record, dict):
            raise DataError("document record must be an object")
        if "id" not in record or "text" not in record:
            raise DataError("document record needs 'id' and 'text'")
        try:
            kind = SourceKind(record.get("source_kind", SourceKind.WEB.value))
        except ValueError as exc:
            raise DataError(f"unknown source_kind {record.get('source_kind')!r}") from exc
        metadata = {str(k): str(v) for k, v in (record.get("metadata") or {}).items()}
        return cls(
            id=str(record["id"]),
            source_kind=kind,
            title=str(record.get("title", "")),
            text=str(record["text"]),
            metadata=metadata,
        )


def _serialize(doc: Document) -> str:
    return json.dumps(doc.to_record(), ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of documents with unique ids."""

    documents: tuple[Document, ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise ConflictError(doc.id)
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, doc_id: object) -> bool:
        return any(d.id == doc_id for d in self.documents)

    def get(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)

    def to_jsonl(self) -> str:
        return "".join(_serialize(doc) + "\n" for doc in self.documents)

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()


def store_document(corpus: Corpus, doc: Document) -> Corpus:
    if doc.id in corpus:
        raise ConflictError(doc.id)
    return Corpus(corpus.documents + (doc,))


def _parse_jsonl(lines: Iterable[str]) -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            doc = Document.from_record(record)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", line=lineno) from exc
        except DataError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if doc.id in seen:
            raise ConflictError(doc.id)
        seen.add(doc.id)
        docs.append(doc)
    return docs


def ingest(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus from a JSON Lines file or a directory of plain-text files.

    Lines only need ``id`` and ``text``; ``source_kind`` defaults to ``web``.
    In ``plain-dir`` mode every ``*.txt``/``*.md`` file becomes one document,
    ordered by relative path, with the relative path (sans suffix) as id.
    """
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no such file or directory: {path}")
    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            return Corpus(tuple(_parse_jsonl(fh)))
    if format == "plain-dir":
        if not path.is_dir():
            raise DataError(f"{path} is not a directory")
        docs = []
        files = sorted(p for p in path.rglob("*") if p.suffix in {".txt", ".md"} and p.is_file())
        for p in files:
            rel = p.relative_to(path).with_suffix("").as_posix()
            text = p.read_text(encoding="utf-8")
            if not text.strip():
                logger.warning("skipping empty file %s", p)
                continue
            docs.append(Document(rel, SourceKind.WEB, p.stem, text, {"path": rel}))
        return Corpus(tuple(docs))
    raise DataError(f"unknown ingest format {format!r}")


def save(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(corpus.to_jsonl(), encoding="utf-8")


def load(path: str | Path) -> Corpus:
    return ingest(path, "jsonl")
