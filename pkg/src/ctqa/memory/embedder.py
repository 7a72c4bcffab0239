"""Sentence embedding clients: a live HTTP one and the deterministic mock.

The mock hashes each (position, token) pair to a seed and sums the resulting
random projections, i.e. a bag-of-words under a seeded random projection with
positional salting: deterministic, and order-sensitive because the position
participates in the hash.
"""
from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import httpx
import numpy as np

from .. import rng
from ..errors import BackendUnavailableError, WrongCountError
from ..regions import RegionId

FINDINGS_PER_REPORT = len(RegionId)


@runtime_checkable
class EmbeddingClient(Protocol):
    dim: int

    def embed(self, texts: list[str]) -> np.ndarray: ...


class MockEmbedder:
    """Offline embedder with stable geometry; nothing model-like about it."""

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def _token_vector(self, position: int, token: str) -> np.ndarray:
        digest = hashlib.blake2b(
            f"{self.seed}|{position}|{token}".encode("utf-8"), digest_size=8
        ).digest()
        token_seed = int.from_bytes(digest, "little")
        return rng.normals(rng.bit_generator(token_seed), self.dim)

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        tokens = [t for t in _tokenize(text) if t]
        for position, token in enumerate(tokens):
            vec += self._token_vector(position, token)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed(self, texts: list[str]) -> np.ndarray:
        return np.stack([self.embed_one(t) for t in texts])


def _tokenize(text: str) -> list[str]:
    import re

    return re.findall(r"[a-z0-9]+", text.lower())


class HttpEmbeddingClient:
    """Client for an embedding service: POST {model, input[]} -> {embeddings[][]}."""

    def __init__(self, endpoint: str, dim: int, model: str = "default", timeout: float = 60.0,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.dim = dim
        self.model = model
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed(self, texts: list[str]) -> np.ndarray:
        try:
            response = self._client.post(
                self.endpoint, json={"model": self.model, "input": texts}
            )
            response.raise_for_status()
            data = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise BackendUnavailableError(f"embedder {self.endpoint}: {exc}") from exc
        vectors = np.asarray(data["embeddings"], dtype=np.float64)
        if vectors.shape != (len(texts), self.dim):
            raise BackendUnavailableError(
                f"embedder returned shape {vectors.shape}, expected ({len(texts)}, {self.dim})"
            )
        return vectors

    def close(self) -> None:
        self._client.close()


def encode_findings(statements: list[str], emb: EmbeddingClient) -> np.ndarray:
    """Embed the per-region statements as one '; '-joined sequence.

    Exactly one statement per region, in report order; the concatenation is
    order-sensitive on purpose, so shuffled findings embed differently.
    """
    if len(statements) != FINDINGS_PER_REPORT:
        raise WrongCountError(
            f"need exactly {FINDINGS_PER_REPORT} region statements, got {len(statements)}"
        )
    return emb.embed(["; ".join(statements)])[0]
