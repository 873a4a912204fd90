"""Text embedding behind one contract: a remote HTTP embedder and a
deterministic local feature-hashing embedder.

The local embedder is lexical on purpose: it makes retrieval tests
reproducible and oracle-checkable on any machine with no network. It is not
a semantic-quality claim.
"""

from __future__ import annotations

import hashlib
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import requests

from .errors import DimensionMismatch, EmbedderUnavailable, EmptyText

DEFAULT_DIM = 384
DEFAULT_EMBED_MODEL = "all-MiniLM-L6-v2"
DEFAULT_BATCH_SIZE = 32
DEFAULT_MAX_IN_FLIGHT = 4

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SIGN_BIT = 1 << 63


@dataclass(frozen=True)
class EmbedderProfile:
    """Which embedder to use and how: dimension, normalization, batching."""

    kind: str = "local-hash"  # "local-hash" or "remote"
    model_name: str = DEFAULT_EMBED_MODEL
    dim: int = DEFAULT_DIM
    normalize: bool = True
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self):
        if self.kind not in ("local-hash", "remote"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Return vector / ||vector||; the zero vector comes back unchanged."""
    arr = np.asarray(vector)
    norm = float(np.linalg.norm(arr.astype(np.float64)))
    if norm == 0.0:
        return arr
    return (arr.astype(np.float64) / norm).astype(arr.dtype)


def _features(text: str) -> list[str]:
    words = _TOKEN_RE.findall(text.lower())
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


def _hash64(feature: str) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def hash_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic feature-hashing embedding of word unigrams and bigrams.

    Each feature's stable 64-bit hash picks a slot (hash mod dim) and a sign
    (top hash bit); occurrences accumulate +/-1 and the result is
    L2-normalized. A text with no features yields the zero vector, returned
    as-is. Stable across runs, platforms, and process restarts.
    """
    if dim <= 0:
        raise ValueError("dim must be positive")
    accumulator = np.zeros(dim, dtype=np.float64)
    for feature in _features(text):
        value = _hash64(feature)
        sign = -1.0 if value & _SIGN_BIT else 1.0
        accumulator[value % dim] += sign
    norm = float(np.linalg.norm(accumulator))
    if norm == 0.0:
        return accumulator.astype(np.float32)
    return (accumulator / norm).astype(np.float32)


class LocalHashEmbedder:
    """Offline embedder: hash_embed applied text by text."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        _check_texts(texts)
        return np.stack([hash_embed(text, self.dim) for text in texts])


class RemoteEmbedder:
    """Client for the de facto embeddings HTTP contract.

    POST {base}/embeddings with {model, input: [texts]}; the response data
    items carry (index, embedding). Requests are sent in batches of
    batch_size with at most max_in_flight concurrent requests; output order
    always matches input order.
    """

    def __init__(
        self,
        base_url: str,
        model_name: str = DEFAULT_EMBED_MODEL,
        dim: int = DEFAULT_DIM,
        normalize: bool = True,
        batch_size: int = DEFAULT_BATCH_SIZE,
        api_key: str = "",
        timeout: float = 30.0,
        max_retries: int = 2,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        retry_backoff: float = 0.25,
    ):
        if not base_url:
            raise ValueError("remote embedder requires a base URL")
        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        self.dim = dim
        self.normalize = normalize
        self.batch_size = max(1, batch_size)
        self.timeout = timeout
        self.max_retries = max_retries
        self.max_in_flight = max(1, max_in_flight)
        self._api_key = api_key
        self._retry_backoff = retry_backoff

    def _post_batch(self, batch: list[str]) -> np.ndarray:
        import time as _time

        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                _time.sleep(self._retry_backoff * (2 ** (attempt - 1)))
            try:
                response = requests.post(
                    f"{self.base_url}/embeddings",
                    json={"model": self.model_name, "input": batch},
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if 400 <= response.status_code < 500:
                raise EmbedderUnavailable(
                    f"embedding endpoint returned {response.status_code}: {response.text[:200]}"
                )
            if response.status_code != 200:
                last_error = EmbedderUnavailable(
                    f"embedding endpoint returned {response.status_code}"
                )
                continue
            try:
                data = response.json()["data"]
            except (ValueError, KeyError) as exc:
                raise EmbedderUnavailable(f"malformed embeddings response: {exc}") from exc
            if len(data) != len(batch):
                raise EmbedderUnavailable(
                    f"embedding endpoint returned {len(data)} vectors for {len(batch)} texts"
                )
            vectors = np.zeros((len(batch), self.dim), dtype=np.float32)
            for item in data:
                embedding = item["embedding"]
                if len(embedding) != self.dim:
                    raise DimensionMismatch(
                        f"expected dim {self.dim}, endpoint returned {len(embedding)}"
                    )
                vectors[int(item["index"])] = np.asarray(embedding, dtype=np.float32)
            return vectors
        raise EmbedderUnavailable(
            f"embedding endpoint unavailable after {self.max_retries + 1} attempts: {last_error}"
        )

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        _check_texts(texts)
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if len(batches) == 1:
            results = [self._post_batch(batches[0])]
        else:
            workers = min(self.max_in_flight, len(batches))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self._post_batch, batches))
        matrix = np.concatenate(results, axis=0)
        if self.normalize:
            matrix = np.stack([l2_normalize(row) for row in matrix])
        return matrix


def _check_texts(texts: list[str]) -> None:
    if not texts:
        raise EmptyText("texts list is empty")
    for position, text in enumerate(texts):
        if not text:
            raise EmptyText(f"text at position {position} is empty")


def make_embedder(profile: EmbedderProfile, base_url: str = "", api_key: str = ""):
    """Construct the embedder an EmbedderProfile describes."""
    if profile.kind == "local-hash":
        return LocalHashEmbedder(dim=profile.dim)
    return RemoteEmbedder(
        base_url,
        model_name=profile.model_name,
        dim=profile.dim,
        normalize=profile.normalize,
        batch_size=profile.batch_size,
        api_key=api_key,
    )


def embed_texts(
    profile: EmbedderProfile, texts: list[str], base_url: str = "", api_key: str = ""
) -> np.ndarray:
    """One-shot embedding through a profile; rows align with input texts."""
    return make_embedder(profile, base_url=base_url, api_key=api_key).embed_texts(texts)
