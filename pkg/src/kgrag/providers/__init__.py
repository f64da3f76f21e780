"""Embedding, generation, search and judge providers."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import TextIO

from ..errors import ConfigError
from .base import (
    DEFAULT_ACCEPT_THRESHOLD,
    RUBRIC_KEYS,
    EmbeddingProvider,
    Feedback,
    GenerationProvider,
    JudgeProvider,
    Providers,
    SearchProvider,
    cosine,
    normalize,
)
from .mock import MOCK_DIM, MockEmbedder, MockGenerator, MockJudge, MockSearch, ScriptedGenerator, load_lexicon


@dataclass
class ProviderConfig:
    kind: str = "mock"
    seed: int | None = 0
    dim: int = MOCK_DIM
    endpoint: str | None = None
    api_key_env: str = "KGRAG_API_KEY"
    model: str = "gpt-4o"
    embedding_model: str = "text-embedding-3-small"
    image_model: str | None = None
    timeout: float = 60.0
    retries: int = 3
    lexicon: str | None = None
    index: str | None = None
    image_root: str | None = None
    interactive_judge: bool = False

    def validate(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"providers.kind must be 'mock' or 'http', got {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("providers.endpoint is required when providers.kind is 'http'")
        if self.kind == "mock" and self.seed is None:
            raise ConfigError("providers.seed is required when providers.kind is 'mock'")
        if self.dim < 1 or self.retries < 1 or self.timeout <= 0:
            raise ConfigError("providers.dim, providers.retries and providers.timeout must be positive")


class InteractiveJudge:
    """Human-in-the-loop judge: reads five 0-4 scores from a text stream."""

    def __init__(self, stdin: TextIO | None = None, stdout: TextIO | None = None,
                 accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD):
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout
        self.accept_threshold = accept_threshold

    def judge(self, query: str, answer: str) -> Feedback:
        print(f"QUERY: {query}\nANSWER:\n{answer}\n", file=self.stdout)
        scores = {}
        for key in RUBRIC_KEYS:
            print(f"{key} [0-4]: ", end="", file=self.stdout, flush=True)
            line = self.stdin.readline()
            try:
                scores[key] = min(4.0, max(0.0, float(line.strip())))
            except ValueError:
                scores[key] = 0.0
        print("comments: ", end="", file=self.stdout, flush=True)
        comments = self.stdin.readline().strip()
        return Feedback(scores, comments=comments).with_threshold(self.accept_threshold)


def build_providers(cfg: ProviderConfig, accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD) -> Providers:
    cfg.validate()
    if cfg.kind == "mock":
        embed = MockEmbedder(seed=cfg.seed, dim=cfg.dim, image_root=cfg.image_root)
        gen = MockGenerator(seed=cfg.seed, lexicon=load_lexicon(cfg.lexicon) if cfg.lexicon else None)
        search = MockSearch.from_dir(cfg.index, embed) if cfg.index else None
        judge = MockJudge(accept_threshold=accept_threshold)
    else:
        from .http import HttpClient, HttpEmbedder, HttpGenerator, HttpJudge, HttpSearch

        client = HttpClient(cfg.endpoint, cfg.api_key_env, cfg.timeout, cfg.retries)
        gen = HttpGenerator(client, cfg.model)
        embed = HttpEmbedder(client, cfg.embedding_model, cfg.dim, cfg.image_model, cfg.image_root)
        search = HttpSearch(client)
        judge = HttpJudge(gen, accept_threshold)
    if cfg.interactive_judge:
        judge = InteractiveJudge(accept_threshold=accept_threshold)
    return Providers(embed=embed, gen=gen, search=search, judge=judge)


__all__ = [
    "DEFAULT_ACCEPT_THRESHOLD",
    "RUBRIC_KEYS",
    "EmbeddingProvider",
    "Feedback",
    "GenerationProvider",
    "InteractiveJudge",
    "JudgeProvider",
    "MockEmbedder",
    "MockGenerator",
    "MockJudge",
    "MockSearch",
    "ProviderConfig",
    "Providers",
    "ScriptedGenerator",
    "SearchProvider",
    "build_providers",
    "cosine",
    "load_lexicon",
    "normalize",
]
