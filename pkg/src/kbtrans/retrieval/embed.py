"""Embedding providers and cosine re-ranking."""

from __future__ import annotations

import hashlib
import logging
import os
from typing import Protocol, Sequence

import httpx
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .._validation import check_count, check_texts
from .bm25 import RetrievalResult
from .tokenize import tokenize_code

logger = logging.getLogger(__name__)

HASH_DIM = 256


class EmbeddingError(RuntimeError):
    """An embedding call failed. Retrying may succeed."""

    retryable = True


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingEmbedder(BaseEstimator, TransformerMixin):
    """Deterministic signed-hash bag of code tokens.

    Stateless: ``fit`` is a no-op kept for pipeline compatibility. Token hashing
    uses BLAKE2b, so vectors are identical across processes and platforms.
    """

    def __init__(self, n_features: int = HASH_DIM, language: str | None = None):
        self.n_features = n_features
        self.language = language

    def fit(self, X=None, y=None):
        check_count("n_features", self.n_features, minimum=1)
        return self

    def _vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.n_features, dtype=float)
        tokens = tokenize_code(text, self.language)
        if not tokens and text.strip():
            tokens = [text.strip()]
        for tok in tokens:
            h = int.from_bytes(hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[h % self.n_features] += sign
        return vec

    def transform(self, X) -> np.ndarray:
        texts = check_texts(X)
        if not texts:
            return np.zeros((0, self.n_features))
        return np.vstack([self._vector(t) for t in texts])

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return self.transform(texts)


class HttpEmbedder:
    """Remote provider: POST ``{model?, inputs: [...]}`` and read ``{vectors: [[...]]}``."""

    def __init__(
        self,
        endpoint: str,
        model: str | None = None,
        api_key_env: str = "KBTRANS_EMBED_API_KEY",
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self.dimension: int | None = None

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = check_texts(texts)
        body: dict = {"inputs": texts}
        if self.model:
            body["model"] = self.model
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._client.post(self.endpoint, json=body, headers=headers)
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise EmbeddingError(f"embedding request failed: {exc}") from exc
        arr = np.asarray(vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != len(texts):
            raise EmbeddingError(f"embedding response has shape {arr.shape}, expected ({len(texts)}, d)")
        if self.dimension is None:
            self.dimension = arr.shape[1]
        elif arr.shape[1] != self.dimension:
            raise EmbeddingError(f"embedding dimension changed from {self.dimension} to {arr.shape[1]}")
        return arr


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


class EmbeddingReranker(BaseEstimator):
    """Re-orders lexical candidates by cosine similarity to the query embedding."""

    def __init__(self, embedder: Embedder | None = None, m: int = 2):
        self.embedder = embedder
        self.m = m

    def rerank(self, candidates: Sequence[RetrievalResult], query_text: str, texts: dict[str, str]) -> list[RetrievalResult]:
        """Top-``m`` candidates by cosine score; ties keep the prior BM25 rank.

        ``texts`` maps each candidate's doc_id to its document text.
        """
        check_count("m", self.m, minimum=0)
        candidates = list(candidates)
        if not candidates or self.m == 0:
            return []
        embedder = self.embedder if self.embedder is not None else HashingEmbedder()
        vectors = np.asarray(embedder.embed([query_text] + [texts[c.doc_id] for c in candidates]), dtype=float)
        query_vec = vectors[0]
        scored = [
            (cosine(query_vec, vectors[i + 1]), i, c) for i, c in enumerate(candidates)
        ]
        scored.sort(key=lambda t: (-t[0], t[1]))
        return [
            RetrievalResult(c.doc_id, c.bm25_score, score) for score, _, c in scored[: self.m]
        ]


def rerank(
    candidates: Sequence[RetrievalResult],
    query_text: str,
    embedder: Embedder,
    m: int,
    texts: dict[str, str],
) -> list[RetrievalResult]:
    return EmbeddingReranker(embedder=embedder, m=m).rerank(candidates, query_text, texts)
