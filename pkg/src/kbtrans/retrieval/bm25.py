"""In-process BM25 inverted index with a scikit-learn estimator surface."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_count, check_documents, check_positive, check_unit_interval
from .tokenize import TOKENIZER_VERSION, tokenize_code

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


@dataclass(frozen=True)
class RetrievalResult:
    doc_id: str
    bm25_score: float
    rerank_score: float | None = None


class Bm25Index(BaseEstimator):
    """Okapi BM25 over code documents.

    ``fit`` takes ``(doc_id, text)`` pairs. Scores use document-side term
    frequency and length normalization with
    ``idf(w) = ln(1 + (N - n_w + 0.5) / (n_w + 0.5))``.

    Fitted attributes: ``postings_`` (token -> [(doc_id, tf)]), ``doc_lengths_``,
    ``n_docs_``, ``avgdl_``, ``doc_ids_``.
    """

    def __init__(self, k1: float = DEFAULT_K1, b: float = DEFAULT_B, language: str | None = None):
        self.k1 = k1
        self.b = b
        self.language = language

    def _validate_params(self) -> None:
        check_positive("k1", self.k1)
        check_unit_interval("b", self.b)

    def fit(self, X, y=None):
        self._validate_params()
        docs = check_documents(X)
        postings: dict[str, list[tuple[str, int]]] = {}
        lengths: dict[str, int] = {}
        tfs: dict[str, Counter] = {}
        for doc_id, text in docs:
            tokens = tokenize_code(text, self.language)
            lengths[doc_id] = len(tokens)
            counts = Counter(tokens)
            tfs[doc_id] = counts
            for tok in sorted(counts):
                postings.setdefault(tok, []).append((doc_id, counts[tok]))
        self.doc_ids_ = [d for d, _ in docs]
        self.postings_ = {tok: postings[tok] for tok in sorted(postings)}
        self.doc_lengths_ = lengths
        self.n_docs_ = len(docs)
        self.avgdl_ = (sum(lengths.values()) / len(lengths)) if lengths else 0.0
        self._tf = tfs
        self._df = {tok: len(p) for tok, p in self.postings_.items()}
        return self

    def idf(self, token: str) -> float:
        check_is_fitted(self, "postings_")
        n_w = self._df.get(token, 0)
        return math.log(1.0 + (self.n_docs_ - n_w + 0.5) / (n_w + 0.5))

    def score_document(self, query_tokens: list[str], doc_id: str) -> float:
        """BM25 score of one document; every query token occurrence contributes."""
        check_is_fitted(self, "postings_")
        if doc_id not in self.doc_lengths_:
            raise KeyError(f"unknown doc_id {doc_id!r}")
        tf_doc = self._tf[doc_id]
        dl = self.doc_lengths_[doc_id]
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl_) if self.avgdl_ else self.k1
        score = 0.0
        for tok in query_tokens:
            tf = tf_doc.get(tok, 0)
            if tf:
                score += self.idf(tok) * tf * (self.k1 + 1.0) / (tf + norm)
        return score

    def _scores(self, query_tokens: list[str]) -> dict[str, float]:
        # Walk postings only; documents without shared tokens score 0.
        scores = dict.fromkeys(self.doc_ids_, 0.0)
        for tok in query_tokens:
            plist = self.postings_.get(tok)
            if not plist:
                continue
            idf = self.idf(tok)
            for doc_id, tf in plist:
                dl = self.doc_lengths_[doc_id]
                norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl_)
                scores[doc_id] += idf * tf * (self.k1 + 1.0) / (tf + norm)
        return scores

    def search(self, query_text: str, n: int, language: str | None = None) -> list[RetrievalResult]:
        """Top-``n`` documents by score, ties broken by ascending doc_id.

        The query is tokenized with ``language`` (defaults to the index language).
        """
        check_is_fitted(self, "postings_")
        check_count("n", n, minimum=1)
        if not self.n_docs_:
            return []
        tokens = tokenize_code(query_text, language if language is not None else self.language)
        scores = self._scores(tokens)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
        return [RetrievalResult(doc_id, score) for doc_id, score in ranked]

    def transform(self, X, language: str | None = None) -> np.ndarray:
        """Score matrix of shape (n_queries, n_docs), columns in ``doc_ids_`` order."""
        check_is_fitted(self, "postings_")
        lang = language if language is not None else self.language
        rows = []
        for query in X:
            scores = self._scores(tokenize_code(query, lang))
            rows.append([scores[d] for d in self.doc_ids_])
        return np.asarray(rows, dtype=float).reshape(len(rows), self.n_docs_)

    # -- persistence (a cache; the stores stay the source of truth) -------
    def to_json(self, fingerprint: str = "") -> str:
        check_is_fitted(self, "postings_")
        return json.dumps(
            {
                "tokenizer_version": TOKENIZER_VERSION,
                "fingerprint": fingerprint,
                "params": self.get_params(),
                "doc_ids": self.doc_ids_,
                "doc_lengths": self.doc_lengths_,
                "postings": self.postings_,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str, fingerprint: str | None = None) -> "Bm25Index | None":
        """Rebuild from :meth:`to_json` output; ``None`` when stale or incompatible."""
        data = json.loads(text)
        if data.get("tokenizer_version") != TOKENIZER_VERSION:
            return None
        if fingerprint is not None and data.get("fingerprint") != fingerprint:
            return None
        index = cls(**data["params"])
        index.doc_ids_ = list(data["doc_ids"])
        index.doc_lengths_ = {k: int(v) for k, v in data["doc_lengths"].items()}
        index.postings_ = {tok: [(d, int(tf)) for d, tf in plist] for tok, plist in data["postings"].items()}
        index.n_docs_ = len(index.doc_ids_)
        index.avgdl_ = (sum(index.doc_lengths_.values()) / index.n_docs_) if index.n_docs_ else 0.0
        index._tf = {d: Counter() for d in index.doc_ids_}
        for tok, plist in index.postings_.items():
            for d, tf in plist:
                index._tf[d][tok] = tf
        index._df = {tok: len(p) for tok, p in index.postings_.items()}
        return index

    def save(self, path: Path, fingerprint: str = "") -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(fingerprint), encoding="utf-8")


def build_index(docs, language: str | None = None, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    return Bm25Index(k1=k1, b=b, language=language).fit(docs)


def bm25_score(index: Bm25Index, query_tokens: list[str], doc_id: str) -> float:
    return index.score_document(query_tokens, doc_id)


def search(index: Bm25Index, query_text: str, language: str | None, n: int) -> list[RetrievalResult]:
    return index.search(query_text, n, language=language)
