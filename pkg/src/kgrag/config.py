"""Run configuration loaded from a YAML tree with an exhaustive key check."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .agents import DEFAULT_AGENT_TOP_K, DEFAULT_CANDIDATE_LIMIT, DEFAULT_N_MAX
from .chunking import DEFAULT_CONTEXT_BUDGET, DEFAULT_STRIDE, DEFAULT_WINDOW
from .errors import ConfigError
from .extract import DEFAULT_MAX_EDIT, DEFAULT_MAX_TRIPLES, DEFAULT_TAU_SIM, DEFAULT_TAU_STR
from .graph.community import DEFAULT_MAX_LEVELS, DEFAULT_RESOLUTION, DEFAULT_RESTARTS, DEFAULT_SEED
from .providers import ProviderConfig
from .providers.base import DEFAULT_ACCEPT_THRESHOLD
from .retrieve import (
    DEFAULT_LINK_THRESHOLD,
    DEFAULT_LINK_TOP_N,
    DEFAULT_MAX_HOPS,
    DEFAULT_MAX_PATHS,
    DEFAULT_TOP_K,
)


@dataclass
class ChunkConfig:
    window_tokens: int = DEFAULT_WINDOW
    stride_tokens: int = DEFAULT_STRIDE
    context_budget_tokens: int = DEFAULT_CONTEXT_BUDGET


@dataclass
class ExtractConfig:
    max_triples_per_chunk: int = DEFAULT_MAX_TRIPLES


@dataclass
class DedupConfig:
    tau_sim: float = DEFAULT_TAU_SIM
    tau_str: float = DEFAULT_TAU_STR
    max_edit_distance: int = DEFAULT_MAX_EDIT


@dataclass
class CommunityConfig:
    seed: int = DEFAULT_SEED
    max_levels: int = DEFAULT_MAX_LEVELS
    resolution: float = DEFAULT_RESOLUTION
    restarts: int = DEFAULT_RESTARTS


@dataclass
class RetrieveConfig:
    top_k: int = DEFAULT_TOP_K
    max_hops: int = DEFAULT_MAX_HOPS
    max_paths: int = DEFAULT_MAX_PATHS
    link_threshold: float = DEFAULT_LINK_THRESHOLD
    link_top_n: int = DEFAULT_LINK_TOP_N
    all_levels: bool = False


@dataclass
class AgentsConfig:
    n_max: int = DEFAULT_N_MAX
    accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD
    top_k: int = DEFAULT_AGENT_TOP_K
    candidate_limit: int = DEFAULT_CANDIDATE_LIMIT


@dataclass
class RunConfig:
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    chunk: ChunkConfig = field(default_factory=ChunkConfig)
    extract: ExtractConfig = field(default_factory=ExtractConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    community: CommunityConfig = field(default_factory=CommunityConfig)
    retrieve: RetrieveConfig = field(default_factory=RetrieveConfig)
    agents: AgentsConfig = field(default_factory=AgentsConfig)
    workers: int = 1

    def validate(self) -> None:
        self.providers.validate()
        c = self.chunk
        _check(c.window_tokens >= 1, "chunk.window_tokens must be >= 1")
        _check(1 <= c.stride_tokens <= c.window_tokens, "chunk.stride_tokens must be in [1, chunk.window_tokens]")
        _check(c.context_budget_tokens >= 1, "chunk.context_budget_tokens must be >= 1")
        _check(self.extract.max_triples_per_chunk >= 1, "extract.max_triples_per_chunk must be >= 1")
        d = self.dedup
        _check(-1.0 <= d.tau_sim <= 1.0, "dedup.tau_sim must be in [-1, 1]")
        _check(0.0 <= d.tau_str <= 1.0, "dedup.tau_str must be in [0, 1]")
        _check(d.max_edit_distance >= 0, "dedup.max_edit_distance must be >= 0")
        m = self.community
        _check(m.max_levels >= 1, "community.max_levels must be >= 1")
        _check(m.resolution > 0, "community.resolution must be > 0")
        _check(m.restarts >= 1, "community.restarts must be >= 1")
        r = self.retrieve
        _check(r.top_k >= 1, "retrieve.top_k must be >= 1")
        _check(r.max_hops >= 1, "retrieve.max_hops must be >= 1")
        _check(r.max_paths >= 1, "retrieve.max_paths must be >= 1")
        _check(-1.0 <= r.link_threshold <= 1.0, "retrieve.link_threshold must be in [-1, 1]")
        _check(r.link_top_n >= 1, "retrieve.link_top_n must be >= 1")
        a = self.agents
        _check(a.n_max >= 0, "agents.n_max must be >= 0")
        _check(0.0 <= a.accept_threshold <= 4.0, "agents.accept_threshold must be in [0, 4]")
        _check(a.top_k >= 1, "agents.top_k must be >= 1")
        _check(a.candidate_limit >= 1, "agents.candidate_limit must be >= 1")
        _check(self.workers >= 1, "workers must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _check(ok: bool, message: str) -> None:
    if not ok:
        raise ConfigError(message)


def _coerce(value: Any, f: dataclasses.Field, key: str):
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if value is None:
        if "None" in kind:
            return None
        raise ConfigError(f"{key} must not be null")
    if kind.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean")
        return value
    if kind.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if kind.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if kind.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    return value


def _build(cls, data: Mapping[str, Any], prefix: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{prefix or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in fields:
            raise ConfigError(f"unknown config key: {path}")
        f = fields[key]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value or {}, path + ".")
        else:
            kwargs[key] = _coerce(value, f, path)
    return cls(**kwargs)


def config_from_dict(data: Mapping[str, Any] | None) -> RunConfig:
    cfg = _build(RunConfig, data or {}, "")
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Load and validate a YAML config; relative provider paths resolve against the file."""
    if path is None:
        return config_from_dict({})
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {p} is not valid YAML: {exc}") from exc
    cfg = config_from_dict(data)
    prov = cfg.providers
    for attr in ("lexicon", "index", "image_root"):
        value = getattr(prov, attr)
        if value and not Path(value).is_absolute():
            setattr(prov, attr, str((p.parent / value).resolve()))
    return cfg
