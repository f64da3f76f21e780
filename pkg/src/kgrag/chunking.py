"""Sliding-window chunking with generated context preambles."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Document
from .errors import InvalidStrideError, InvalidWindowError, ProviderContractError, ProviderError
from .prompts import render_prompt

# Fixed line placed between the generated context and the chunk body.
CONTEXT_SEPARATOR = "\n-----\n"

DEFAULT_WINDOW = 1024
DEFAULT_STRIDE = 128
DEFAULT_CONTEXT_BUDGET = 64
# Characters of the parent document shown to the context generator.
_DOC_EXCERPT_CHARS = 6000

_WS = re.compile(r"\s+")


class TokenList(list):
    """A list of tokens that remembers the whitespace around them.

    ``separators`` has ``len(self) + 1`` entries: the leading whitespace,
    the whitespace between each pair of tokens, and the trailing whitespace.
    """

    def __init__(self, tokens=(), separators=None, offsets=()):
        super().__init__(tokens)
        if separators is None:
            separators = [""] + [" "] * (len(self) - 1) + [""] if self else [""]
        self.separators = list(separators)
        # (start, end) character offsets of each token in the source text
        self.offsets = list(offsets)


def tokenize(text: str) -> TokenList:
    """Split on Unicode whitespace; punctuation stays attached to words."""
    tokens, seps, offsets = [], [""], []
    pos = 0
    for m in _WS.finditer(text):
        if m.start() == 0:
            seps[0] = m.group()
        else:
            tokens.append(text[pos:m.start()])
            offsets.append((pos, m.start()))
            seps.append(m.group())
        pos = m.end()
    if pos < len(text):
        tokens.append(text[pos:])
        offsets.append((pos, len(text)))
        seps.append("")
    return TokenList(tokens, seps, offsets)


def detokenize(tokens: TokenList | list[str]) -> str:
    seps = getattr(tokens, "separators", None)
    if seps is None:
        return " ".join(tokens)
    out = [seps[0]]
    for tok, sep in zip(tokens, seps[1:]):
        out.append(tok)
        out.append(sep)
    return "".join(out)


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    index: int  # 1-based
    start: int  # token offset, inclusive
    end: int  # token offset, exclusive
    text: str

    @property
    def token_span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def ref(self) -> tuple[str, int]:
        return (self.doc_id, self.index)


@dataclass(frozen=True)
class ContextualizedChunk:
    chunk: Chunk
    context: str
    enriched_text: str

    @property
    def ref(self) -> tuple[str, int]:
        return self.chunk.ref


def window_spans(length: int, window: int, stride: int) -> list[tuple[int, int]]:
    """Token spans ``[(i-1)*stride, min((i-1)*stride + window, length))``."""
    if window < 1:
        raise InvalidWindowError(f"window must be >= 1, got {window}")
    if stride < 1 or stride > window:
        raise InvalidStrideError(f"stride must satisfy 1 <= stride <= window ({window}), got {stride}")
    return [(start, min(start + window, length)) for start in range(0, length, stride)]


def chunk_document(doc: Document, w: int = DEFAULT_WINDOW, s: int = DEFAULT_STRIDE) -> list[Chunk]:
    tokens = tokenize(doc.text)
    chunks = []
    for i, (start, end) in enumerate(window_spans(len(tokens), w, s), start=1):
        char_start = tokens.offsets[start][0]
        char_end = tokens.offsets[end - 1][1]
        chunks.append(Chunk(doc.id, i, start, end, doc.text[char_start:char_end]))
    return chunks


def _truncate_tokens(text: str, budget: int) -> str:
    tokens = tokenize(text.strip())
    if len(tokens) <= budget:
        return text.strip()
    return " ".join(tokens[:budget])


def contextualize(doc: Document, chunk: Chunk, gen, budget: int = DEFAULT_CONTEXT_BUDGET) -> ContextualizedChunk:
    if chunk.doc_id != doc.id:
        raise ValueError(f"chunk {chunk.ref} does not belong to document {doc.id!r}")
    prompt = render_prompt(
        "contextualize",
        "Write a short context that situates the chunk within the overall document, "
        "to improve search retrieval of the chunk. Answer only with the context.",
        title=doc.title,
        chunk_index=str(chunk.index),
        document=doc.text[:_DOC_EXCERPT_CHARS],
        chunk=chunk.text,
    )
    try:
        raw = gen.generate(prompt, max_tokens=budget)
    except ProviderError as exc:
        raise type(exc)(f"contextualize {chunk.ref}: {exc}") from exc
    context = _truncate_tokens(raw, budget)
    if not context:
        raise ProviderContractError(f"contextualize {chunk.ref}: provider returned an empty context")
    return ContextualizedChunk(chunk, context, context + CONTEXT_SEPARATOR + chunk.text)
