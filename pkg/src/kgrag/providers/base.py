"""Provider contracts shared by the mock and HTTP backends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

RUBRIC_KEYS = ("helpfulness", "correctness", "coherence", "complexity", "verbosity")
DEFAULT_ACCEPT_THRESHOLD = 3.0


@runtime_checkable
class EmbeddingProvider(Protocol):
    dim: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, ref: str) -> np.ndarray: ...


@runtime_checkable
class GenerationProvider(Protocol):
    def generate(self, prompt: str, max_tokens: int = 512) -> str: ...


@runtime_checkable
class SearchProvider(Protocol):
    def search(self, source_kind: str, query: str, limit: int = 10) -> list: ...


@runtime_checkable
class JudgeProvider(Protocol):
    def judge(self, query: str, answer: str) -> Feedback: ...


@dataclass(frozen=True)
class Feedback:
    """Rubric scores on a 0-4 scale plus an accept decision."""

    scores: dict[str, float]
    accept: bool = False
    comments: str = ""

    def __post_init__(self):
        missing = [k for k in RUBRIC_KEYS if k not in self.scores]
        if missing:
            raise ValueError(f"feedback is missing rubric keys {missing}")
        for key, value in self.scores.items():
            if not 0.0 <= value <= 4.0:
                raise ValueError(f"rubric score {key}={value} outside [0, 4]")

    @property
    def min_score(self) -> float:
        return min(self.scores[k] for k in RUBRIC_KEYS)

    def with_threshold(self, threshold: float) -> Feedback:
        return Feedback(dict(self.scores), self.min_score >= threshold, self.comments)

    def to_dict(self) -> dict:
        return {"scores": {k: self.scores[k] for k in RUBRIC_KEYS}, "accept": self.accept, "comments": self.comments}


def normalize(vec: Sequence[float]) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass
class Providers:
    """The four providers a pipeline run needs, swapped together by config."""

    embed: EmbeddingProvider
    gen: GenerationProvider
    search: SearchProvider | None = None
    judge: JudgeProvider | None = None
    extra: dict = field(default_factory=dict)
