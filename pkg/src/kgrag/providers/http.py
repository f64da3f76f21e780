"""HTTP-backed providers.

Wire contract (all bodies JSON, ``Authorization: Bearer <key>`` when a key is
configured; the key is read from the environment variable named in config):

Generation
    ``POST {endpoint}/chat/completions`` with
    ``{"model", "messages": [{"role": "user", "content": prompt}], "max_tokens", "temperature": 0}``;
    the answer is ``choices[0].message.content``.
Text embedding
    ``POST {endpoint}/embeddings`` with ``{"model", "input": text}``;
    the vector is ``data[0].embedding``.
Image embedding
    same route with ``{"model": image_model, "input": <base64 file bytes>, "input_type": "image"}``.
Search
    ``GET {endpoint}/search?kind=<kind>&q=<query>&limit=<n>`` returning
    ``{"results": [<document record>, ...]}`` in corpus record format.
Judge
    a generation call whose answer must contain a JSON object with the five
    rubric keys, each a number in [0, 4].

Requests are retried (3 attempts by default, exponential backoff) on
connection errors, HTTP 429 and 5xx.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import re
import threading
import time
from pathlib import Path

import numpy as np
import requests

from ..corpus import Document
from ..errors import ConfigError, MissingInputError, ProviderContractError, TransportError
from ..prompts import render_prompt
from .base import DEFAULT_ACCEPT_THRESHOLD, RUBRIC_KEYS, Feedback, normalize

logger = logging.getLogger(__name__)

MAX_EMBED_CHARS = 32_000


class HttpClient:
    def __init__(
        self,
        endpoint: str,
        api_key_env: str | None = None,
        timeout: float = 60.0,
        retries: int = 3,
        backoff: float = 0.5,
        min_interval: float = 0.0,
        session: requests.Session | None = None,
    ):
        if not endpoint:
            raise ConfigError("http provider requires an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = max(1, retries)
        self.backoff = backoff
        self.min_interval = min_interval
        self.session = session or requests.Session()
        self.headers = {"Content-Type": "application/json"}
        if api_key_env:
            key = os.environ.get(api_key_env)
            if key:
                self.headers["Authorization"] = f"Bearer {key}"
        self._lock = threading.Lock()
        self._last = 0.0

    def _throttle(self):
        if self.min_interval <= 0:
            return
        with self._lock:
            wait = self._last + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last = time.monotonic()

    def request(self, method: str, route: str, *, json_body=None, params=None, idempotent: bool = True) -> dict:
        url = f"{self.endpoint}/{route.lstrip('/')}"
        attempts = self.retries if idempotent else 1
        last_error = None
        for attempt in range(attempts):
            self._throttle()
            try:
                resp = self.session.request(
                    method, url, json=json_body, params=params, headers=self.headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise TransportError(f"{method} {url}: HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProviderContractError(f"{method} {url}: response is not JSON") from exc
            if attempt + 1 < attempts:
                time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"{method} {url} failed after {attempts} attempt(s): {last_error}")


class HttpGenerator:
    def __init__(self, client: HttpClient, model: str):
        self.client = client
        self.model = model

    def generate(self, prompt: str, max_tokens: int = 512) -> str:
        if not prompt or not prompt.strip():
            raise ValueError("prompt must be non-empty")
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": max_tokens,
            "temperature": 0,
        }
        data = self.client.request("POST", "chat/completions", json_body=body)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderContractError("chat completion response lacks choices[0].message.content") from exc
        if not isinstance(text, str) or not text.strip():
            raise ProviderContractError("generation provider returned empty text")
        return text


class HttpEmbedder:
    def __init__(self, client: HttpClient, model: str, dim: int, image_model: str | None = None,
                 image_root: str | Path | None = None):
        self.client = client
        self.model = model
        self.dim = dim
        self.image_model = image_model or model
        self.image_root = Path(image_root) if image_root else None

    def _vector(self, data: dict) -> np.ndarray:
        try:
            vec = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderContractError("embedding response lacks data[0].embedding") from exc
        if vec.shape != (self.dim,):
            raise ProviderContractError(f"embedding has shape {vec.shape}, expected ({self.dim},)")
        return normalize(vec)

    def embed_text(self, text: str) -> np.ndarray:
        if len(text) > MAX_EMBED_CHARS:
            logger.warning("embedding input truncated from %d to %d characters", len(text), MAX_EMBED_CHARS)
            text = text[:MAX_EMBED_CHARS]
        return self._vector(self.client.request("POST", "embeddings", json_body={"model": self.model, "input": text}))

    def embed_image(self, ref: str) -> np.ndarray:
        path = Path(ref)
        if not path.is_absolute() and self.image_root is not None:
            path = self.image_root / path
        if not path.is_file():
            raise MissingInputError(f"image reference {ref!r} does not resolve to a file")
        payload = base64.b64encode(path.read_bytes()).decode("ascii")
        body = {"model": self.image_model, "input": payload, "input_type": "image"}
        return self._vector(self.client.request("POST", "embeddings", json_body=body))


class HttpSearch:
    def __init__(self, client: HttpClient):
        self.client = client

    def search(self, source_kind: str, query: str, limit: int = 10) -> list[Document]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        data = self.client.request("GET", "search", params={"kind": source_kind, "q": query, "limit": limit})
        results = data.get("results") if isinstance(data, dict) else None
        if not isinstance(results, list):
            raise ProviderContractError("search response lacks a 'results' list")
        docs = []
        for record in results[:limit]:
            record = dict(record)
            record.setdefault("source_kind", source_kind)
            docs.append(Document.from_record(record))
        return docs


_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


class HttpJudge:
    def __init__(self, generator: HttpGenerator, accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD):
        self.generator = generator
        self.accept_threshold = accept_threshold

    def judge(self, query: str, answer: str) -> Feedback:
        prompt = render_prompt(
            "judge",
            "Score the answer on helpfulness, correctness, coherence, complexity and verbosity, "
            "each from 0 to 4. Reply with one JSON object holding those five keys and a "
            "'comments' string.",
            query=query,
            answer=answer,
        )
        text = self.generator.generate(prompt, max_tokens=300)
        m = _JSON_OBJECT.search(text)
        try:
            obj = json.loads(m.group()) if m else None
            scores = {k: min(4.0, max(0.0, float(obj[k]))) for k in RUBRIC_KEYS}
        except (TypeError, KeyError, ValueError) as exc:
            raise ProviderContractError(f"judge reply is not a rubric object: {text[:200]!r}") from exc
        return Feedback(scores, comments=str(obj.get("comments", ""))).with_threshold(self.accept_threshold)
