"""Open-domain QA harness comparing Graph RAG against a flat chunk-RAG baseline."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import jsonschema
import numpy as np

from ..chunking import Chunk
from ..errors import DataError, KGRagError, ParseError
from ..prompts import render_prompt
from ..providers.base import RUBRIC_KEYS, cosine
from .metrics import bleu, rouge_l, rouge_n

logger = logging.getLogger(__name__)

CATEGORIES = ("fact-based", "logical", "comparative", "causal", "operational", "multi-hop", "procedural")
METRICS = ("bleu", "rouge_1", "rouge_2", "rouge_l")
REPORT_VERSION = 1


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    reference: str
    category: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise DataError(f"QA item {self.id}: unknown category {self.category!r}")


def load_qa(path: str | Path) -> list[QAItem]:
    items = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                items.append(QAItem(str(rec["id"]), rec["question"], rec["reference"], rec["category"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad QA record: {exc}", line=lineno) from exc
            except DataError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return items


def score_answer(answer: str, reference: str) -> dict[str, float]:
    return {
        "bleu": bleu(answer, [reference]),
        "rouge_1": rouge_n(answer, reference, 1).f1,
        "rouge_2": rouge_n(answer, reference, 2).f1,
        "rouge_l": rouge_l(answer, reference).f1,
    }


def _means(rows: Sequence[Mapping[str, float]], keys) -> dict[str, float]:
    return {k: float(np.mean([r[k] for r in rows])) for k in keys}


def run_odqa(
    items: Sequence[QAItem],
    engine: Callable[[str], str],
    judge=None,
    workers: int = 1,
) -> dict:
    """Answer every item with ``engine`` and score it; failures are recorded, not fatal."""

    def one(item: QAItem) -> dict:
        try:
            answer = engine(item.question)
        except KGRagError as exc:
            logger.warning("QA item %s failed: %s", item.id, exc)
            return {"id": item.id, "category": item.category, "status": "failed", "error": str(exc)}
        row = {"id": item.id, "category": item.category, "status": "ok", "answer": answer,
               "scores": score_answer(answer, item.reference)}
        if judge is not None:
            row["rubric"] = judge.judge(item.question, answer).to_dict()["scores"]
        return row

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(it) for it in items]

    ok = [r for r in rows if r["status"] == "ok"]
    by_cat: dict[str, list[dict]] = defaultdict(list)
    for r in ok:
        by_cat[r["category"]].append(r)
    report = {
        "items": rows,
        "categories": {
            cat: {"n": len(rs), **_means([r["scores"] for r in rs], METRICS)} for cat, rs in sorted(by_cat.items())
        },
        "overall": {"n": len(ok), **(_means([r["scores"] for r in ok], METRICS) if ok else {})},
        "failed": len(rows) - len(ok),
    }
    if judge is not None and ok:
        report["rubric_means"] = _means([r["rubric"] for r in ok], RUBRIC_KEYS)
    return report


class FlatRAG:
    """Traditional RAG baseline: cosine top-k over raw chunk text, no graph."""

    def __init__(self, chunks: Sequence[Chunk], embed, gen, top_k: int = 5):
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        self.chunks = list(chunks)
        self.embed = embed
        self.gen = gen
        self.top_k = top_k
        self.vectors = [np.asarray(embed.embed_text(c.text)) for c in self.chunks]

    def retrieve(self, query: str, top_k: int | None = None) -> list[tuple[Chunk, float]]:
        k = self.top_k if top_k is None else top_k
        if k < 1:
            raise ValueError("top_k must be >= 1")
        qv = self.embed.embed_text(query)
        scored = [(c, cosine(qv, v)) for c, v in zip(self.chunks, self.vectors)]
        scored.sort(key=lambda cs: (-cs[1], cs[0].doc_id, cs[0].index))
        return scored[:k]

    def answer(self, query: str, top_k: int | None = None) -> str:
        hits = self.retrieve(query, top_k)
        prompt = render_prompt(
            "flat_answer",
            "Answer the query using only the retrieved passages.",
            query=query,
            passages="\n\n".join(f"[{c.doc_id}#{c.index}] {c.text}" for c, _ in hits),
        )
        return self.gen.generate(prompt, max_tokens=512)


def baseline_flat_rag(query: str, chunks: Sequence[Chunk], embed, gen, top_k: int = 5) -> str:
    return FlatRAG(chunks, embed, gen, top_k).answer(query)


_SCORES = {"type": "object", "required": list(METRICS),
           "properties": {m: {"type": "number", "minimum": 0, "maximum": 1} for m in METRICS}}
_RUBRIC = {"type": "object", "required": list(RUBRIC_KEYS),
           "properties": {k: {"type": "number", "minimum": 0, "maximum": 4} for k in RUBRIC_KEYS}}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["version", "systems"],
    "properties": {
        "version": {"const": REPORT_VERSION},
        "systems": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["items", "categories", "overall", "failed"],
                "properties": {
                    "items": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "category", "status"],
                            "properties": {
                                "category": {"enum": list(CATEGORIES)},
                                "status": {"enum": ["ok", "failed"]},
                                "scores": _SCORES,
                                "rubric": _RUBRIC,
                            },
                        },
                    },
                    "categories": {"type": "object", "additionalProperties": {**_SCORES, "required": ["n", *METRICS]}},
                    "overall": {"type": "object", "required": ["n"]},
                    "failed": {"type": "integer", "minimum": 0},
                    "rubric_means": _RUBRIC,
                },
            },
        },
    },
}


def compare_systems(items: Sequence[QAItem], engines: Mapping[str, Callable[[str], str]], judge=None) -> dict:
    report = {"version": REPORT_VERSION, "systems": {name: run_odqa(items, fn, judge) for name, fn in engines.items()}}
    validate_report(report)
    return report


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


def render_table(report: dict) -> str:
    names = list(report["systems"])
    header = f"{'system':<12} {'category':<12} {'n':>3} " + " ".join(f"{m:>8}" for m in METRICS)
    lines = [header, "-" * len(header)]
    for name in names:
        sys_report = report["systems"][name]
        rows = list(sys_report["categories"].items()) + [("overall", sys_report["overall"])]
        for cat, agg in rows:
            vals = " ".join(f"{agg.get(m, float('nan')):8.4f}" for m in METRICS)
            lines.append(f"{name:<12} {cat:<12} {agg['n']:>3} {vals}")
    return "\n".join(lines) + "\n"
