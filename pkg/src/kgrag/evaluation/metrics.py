"""BLEU, ROUGE-N and ROUGE-L over lowercased whitespace tokens.

BLEU variant: sentence-level BLEU with clipped n-gram precisions for
n = 1..max_n, uniform weights, the brevity penalty against the closest
reference length (shorter wins ties), and add-one smoothing applied only to
orders n > 1 whose clipped match count is zero: ``p_n = 1 / (total_n + 1)``.
An unsmoothed zero unigram precision gives BLEU 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..chunking import tokenize


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    defined: bool = True

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "defined": self.defined}


def metric_tokens(text: str) -> list[str]:
    return [t.lower() for t in tokenize(text)]


def _as_tokens(x: str | Sequence[str]) -> list[str]:
    return metric_tokens(x) if isinstance(x, str) else list(x)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def bleu(candidate: str | Sequence[str], references: Sequence[str | Sequence[str]], max_n: int = 4) -> float:
    if not references:
        raise ValueError("bleu needs at least one reference")
    cand = _as_tokens(candidate)
    refs = [_as_tokens(r) for r in references]
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        counts = ngrams(cand, n)
        max_ref: Counter = Counter()
        for r in refs:
            max_ref |= ngrams(r, n)
        matches = sum(min(c, max_ref[g]) for g, c in counts.items())
        total = sum(counts.values())
        if matches == 0:
            if n == 1:
                return 0.0
            p = 1.0 / (total + 1)
        else:
            p = matches / total
        log_sum += math.log(p) / max_n
    c = len(cand)
    r = min((len(ref) for ref in refs), key=lambda length: (abs(length - c), length))
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_sum)


def rouge_n(candidate: str | Sequence[str], reference: str | Sequence[str], n: int = 1) -> PRF:
    """Clipped n-gram overlap; a reference shorter than ``n`` yields zeros with ``defined=False``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    ref_grams = ngrams(ref, n)
    if not ref_grams:
        return PRF(0.0, 0.0, 0.0, defined=False)
    cand_grams = ngrams(cand, n)
    overlap = sum((cand_grams & ref_grams).values())
    p = overlap / sum(cand_grams.values()) if cand_grams else 0.0
    r = overlap / sum(ref_grams.values())
    return PRF(p, r, _f1(p, r))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str | Sequence[str], reference: str | Sequence[str]) -> PRF:
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    if not cand or not ref:
        return PRF(0.0, 0.0, 0.0, defined=bool(ref))
    lcs = lcs_length(cand, ref)
    p, r = lcs / len(cand), lcs / len(ref)
    return PRF(p, r, _f1(p, r))
