"""Text embeddings behind a swappable interface.

The default embedder is a fully deterministic bag-of-words hasher: every
distinct word maps to a pseudo-random unit vector derived from a keyed
64-bit hash, and a text embeds to the normalized sum of its word vectors.
Identical texts therefore embed identically (exact-match retrieval scores
1.0) with no model dependency, and the whole pipeline runs offline.

A remote HTTP embedder implementing the same interface is provided for
live deployments; nothing in the package requires it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIMS = 64

__all__ = [
    "DEFAULT_DIMS",
    "EmbeddingVector",
    "EmbedderConfig",
    "HashEmbedder",
    "RemoteEmbedder",
    "cosine",
]


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A dense embedding; `components` is an immutable 1-D float64 array."""

    components: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.components, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("embedding components must be a nonempty 1-D array")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "components", arr)

    @property
    def dims(self) -> int:
        return int(self.components.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))


@dataclass(frozen=True)
class EmbedderConfig:
    dims: int = DEFAULT_DIMS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dims < 2:
            raise ValueError(f"dims must be >= 2, got {self.dims}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def _hash64(word: str) -> int:
    digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class HashEmbedder:
    """Deterministic bag-of-words embedder.

    Each distinct word (lowercased) seeds a PCG64 generator with
    hash64(word) XOR config.seed; `dims` standard-normal draws, normalized,
    give the word's unit vector. A text embeds to the L2-normalized sum of
    its word vectors, counted with multiplicity, so the embedding is
    invariant under word reordering and per-word case.
    """

    def __init__(self, config: EmbedderConfig | None = None) -> None:
        self.config = config or EmbedderConfig()
        self._word_cache: dict[str, np.ndarray] = {}

    @property
    def dims(self) -> int:
        return self.config.dims

    def _word_vector(self, word: str) -> np.ndarray:
        vec = self._word_cache.get(word)
        if vec is None:
            seed = _hash64(word) ^ self.config.seed
            rng = np.random.Generator(np.random.PCG64(seed))
            vec = rng.standard_normal(self.config.dims)
            vec /= np.linalg.norm(vec)
            self._word_cache[word] = vec
        return vec

    def embed(self, text: str) -> EmbeddingVector:
        words = text.lower().split()
        if not words:
            raise ValueError("nothing to embed")
        total = np.zeros(self.config.dims, dtype=np.float64)
        for word in words:
            total += self._word_vector(word)
        norm = np.linalg.norm(total)
        if norm == 0.0:
            # Opposing word vectors cancelling exactly is not reachable in
            # practice, but the contract forbids returning a zero vector.
            raise ValueError("nothing to embed")
        return EmbeddingVector(total / norm)


def embed_text(text: str, config: EmbedderConfig) -> EmbeddingVector:
    """One-shot functional form of :class:`HashEmbedder`."""
    return HashEmbedder(config).embed(text)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; rejects dimension mismatch and zeros."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    na = a.norm()
    nb = b.norm()
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for a zero vector")
    value = float(np.dot(a.components, b.components) / (na * nb))
    return max(-1.0, min(1.0, value))


@dataclass
class RemoteEmbedder:
    """HTTP embedder: POST {"text": ...} to `endpoint`, expect {"vector": [...]}.

    Credentials come from the environment variable named by `auth_env`;
    nothing is hard-coded. The offline test suite never instantiates this
    against a live endpoint.
    """

    endpoint: str
    dims: int = DEFAULT_DIMS
    auth_env: str | None = None
    timeout: float = 30.0
    _client: object = field(default=None, repr=False)

    def _headers(self) -> dict[str, str]:
        import os

        headers = {"content-type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env, "")
            if not token:
                raise ValueError(f"auth token env var {self.auth_env!r} is not set")
            headers["authorization"] = f"Bearer {token}"
        return headers

    def embed(self, text: str) -> EmbeddingVector:
        import httpx

        if not text.split():
            raise ValueError("nothing to embed")
        client = self._client or httpx
        response = client.post(
            self.endpoint,
            json={"text": text},
            headers=self._headers(),
            timeout=self.timeout,
        )
        response.raise_for_status()
        vector = np.asarray(response.json()["vector"], dtype=np.float64)
        if vector.size != self.dims:
            raise ValueError(
                f"remote embedder returned {vector.size} dims, expected {self.dims}"
            )
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            raise ValueError("remote embedder returned a zero vector")
        return EmbeddingVector(vector / norm)
