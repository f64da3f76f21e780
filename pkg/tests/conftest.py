from __future__ import annotations

from pathlib import Path

import pytest

from kgrag.config import load_config
from kgrag.corpus import load as load_corpus
from kgrag.pipeline import build_graph
from kgrag.providers import MockEmbedder, MockGenerator, build_providers

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def embed() -> MockEmbedder:
    return MockEmbedder(seed=0)


@pytest.fixture
def gen() -> MockGenerator:
    return MockGenerator(seed=0)


@pytest.fixture(scope="session")
def fixture_config():
    return load_config(FIXTURES / "config.yaml")


@pytest.fixture(scope="session")
def fixture_providers(fixture_config):
    return build_providers(fixture_config.providers, fixture_config.agents.accept_threshold)


@pytest.fixture(scope="session")
def fixture_corpus():
    return load_corpus(FIXTURES / "corpus.jsonl")


@pytest.fixture(scope="session")
def fixture_graph(fixture_corpus, fixture_config, fixture_providers):
    return build_graph(fixture_corpus, fixture_providers, fixture_config)
