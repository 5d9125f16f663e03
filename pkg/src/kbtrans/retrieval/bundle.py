"""Per-task knowledge retrieval: dependency usages, code samples, translation pair."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .._validation import check_count, check_positive, check_unit_interval
from ..depextract import UsageIndex, index_project, resolve_usage
from ..kbstore import CodeSample, DependencyUsageExample, KnowledgeBase, TranslationPair
from ..task import TranslationTask
from .bm25 import DEFAULT_B, DEFAULT_K1, Bm25Index, RetrievalResult
from .embed import EmbeddingError, EmbeddingReranker, HashingEmbedder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalConfig:
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    n_samples: int = 100
    n_pairs: int = 10
    m_samples: int = 2
    m_pairs: int = 1
    # Never offer the task's own source function back as its translation pair.
    exclude_self_pairs: bool = True

    def __post_init__(self) -> None:
        check_positive("k1", self.k1)
        check_unit_interval("b", self.b)
        check_count("n_samples", self.n_samples, minimum=1)
        check_count("n_pairs", self.n_pairs, minimum=1)
        check_count("m_samples", self.m_samples)
        check_count("m_pairs", self.m_pairs)
        if self.m_samples > self.n_samples:
            raise ValueError("m_samples must be <= n_samples")
        if self.m_pairs > self.n_pairs:
            raise ValueError("m_pairs must be <= n_pairs")

    @classmethod
    def from_dict(cls, data: dict | None) -> "RetrievalConfig":
        return cls(**(data or {}))


@dataclass
class KnowledgeBundle:
    dependency_examples: list[DependencyUsageExample] = field(default_factory=list)
    code_samples: list[CodeSample] = field(default_factory=list)
    sample_scores: list[RetrievalResult] = field(default_factory=list)
    translation_pair: TranslationPair | None = None
    pair_score: RetrievalResult | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def res(r: RetrievalResult | None):
            return None if r is None else {"doc_id": r.doc_id, "bm25_score": r.bm25_score, "rerank_score": r.rerank_score}

        return {
            "dependency_examples": [u.to_dict() for u in self.dependency_examples],
            "code_samples": [s.to_dict() for s in self.code_samples],
            "sample_scores": [res(r) for r in self.sample_scores],
            "translation_pair": self.translation_pair.to_dict() if self.translation_pair else None,
            "pair_score": res(self.pair_score),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def _fingerprint(ids: list[str], params: dict) -> str:
    h = hashlib.sha1(json.dumps(params, sort_keys=True).encode())
    for i in ids:
        h.update(i.encode())
        h.update(b"\n")
    return h.hexdigest()


class KnowledgeRetriever:
    """Owns the BM25 indexes over a knowledge base and assembles bundles.

    Indexes are rebuilt whenever the KB's version changes and are cached as JSON
    under ``<kb>/index/``; the cache is validated by a fingerprint of the store ids.
    """

    def __init__(self, kb: KnowledgeBase, config: RetrievalConfig | None = None, embedder=None, persist: bool = True):
        self.kb = kb
        self.config = config or RetrievalConfig()
        self.embedder = embedder if embedder is not None else HashingEmbedder()
        self.persist = persist
        self._lock = threading.RLock()
        self._indexes: dict[str, tuple[int, Bm25Index, dict[str, object]]] = {}
        self._projects: dict[tuple[str, str], UsageIndex] = {}

    def _params(self, language: str) -> dict:
        return {"k1": self.config.k1, "b": self.config.b, "language": language}

    def _load_or_build(self, key: str, records: list, text_of, language: str) -> Bm25Index:
        ids = [r.id for r in records]
        params = self._params(language)
        fp = _fingerprint(ids, params)
        path: Path = self.kb.index_dir / f"{key}.json"
        if self.persist and path.exists():
            try:
                cached = Bm25Index.from_json(path.read_text(encoding="utf-8"), fingerprint=fp)
            except (OSError, ValueError, KeyError):
                cached = None
            if cached is not None:
                return cached
        index = Bm25Index(**params).fit([(r.id, text_of(r)) for r in records])
        if self.persist:
            try:
                index.save(path, fp)
            except OSError as exc:
                logger.warning("could not persist index %s: %s", path, exc)
        return index

    def _index(self, key: str, records: list, text_of, language: str) -> tuple[Bm25Index, dict]:
        with self._lock:
            cached = self._indexes.get(key)
            if cached is not None and cached[0] == self.kb.version:
                return cached[1], cached[2]
            index = self._load_or_build(key, records, text_of, language)
            lookup = {r.id: r for r in records}
            self._indexes[key] = (self.kb.version, index, lookup)
            return index, lookup

    def sample_index(self) -> tuple[Bm25Index, dict]:
        return self._index("samples", self.kb.samples, lambda s: s.function_text, self.kb.target_language)

    def pair_index(self, source_language: str, target_language: str) -> tuple[Bm25Index, dict]:
        pairs = [
            p for p in self.kb.pairs if p.source_language == source_language and p.target_language == target_language
        ]
        return self._index(f"pairs-{source_language}-{target_language}", pairs, lambda p: p.source_function, source_language)

    def rebuild(self) -> None:
        """Force fresh indexes (and cache files) for every store."""
        with self._lock:
            self._indexes.clear()
            if self.kb.index_dir.exists():
                for p in self.kb.index_dir.glob("*.json"):
                    p.unlink()
            self.sample_index()
            for src, tgt in sorted({(p.source_language, p.target_language) for p in self.kb.pairs}):
                self.pair_index(src, tgt)

    def project_index(self, project_path: Path, language: str) -> UsageIndex | None:
        key = (str(project_path), language)
        with self._lock:
            if key not in self._projects:
                try:
                    self._projects[key] = index_project(project_path, language)
                except (FileNotFoundError, ValueError) as exc:
                    logger.warning("cannot index project %s: %s", project_path, exc)
                    return None
            return self._projects[key]

    def _rerank(self, results, query: str, texts: dict[str, str], m: int, bundle: KnowledgeBundle, what: str):
        try:
            return EmbeddingReranker(self.embedder, m).rerank(results, query, texts)
        except EmbeddingError as exc:
            msg = f"{what} re-ranking failed, using BM25 order: {exc}"
            logger.warning(msg)
            bundle.warnings.append(msg)
            return list(results[:m])

    def dependency_examples(self, task: TranslationTask) -> list[DependencyUsageExample]:
        examples = []
        target_scope = task.scope
        project = None
        for dep in task.dependencies:
            stored = self.kb.usage_for(dep.code)
            if stored is not None and stored.usage_example:
                examples.append(stored)
                continue
            if project is None:
                project = self.project_index(task.project_path, task.target_language) or False
            if project:
                found = resolve_usage(project, dep, target_scope)
                if found.usage_example:
                    examples.append(found)
                    continue
            examples.append(stored or DependencyUsageExample(dependency_code=dep.code, scope=target_scope, origin="none"))
        return examples

    def assemble(self, task: TranslationTask) -> KnowledgeBundle:
        cfg = self.config
        bundle = KnowledgeBundle()
        bundle.dependency_examples = self.dependency_examples(task)

        index, samples = self.sample_index()
        if index.n_docs_ and cfg.m_samples:
            hits = index.search(task.source_code, cfg.n_samples, language=task.source_language)
            texts = {h.doc_id: samples[h.doc_id].function_text for h in hits}
            top = self._rerank(hits, task.source_code, texts, cfg.m_samples, bundle, "code sample")
            bundle.sample_scores = top
            bundle.code_samples = [samples[r.doc_id] for r in top]

        pindex, pairs = self.pair_index(task.source_language, task.target_language)
        if pindex.n_docs_ and cfg.m_pairs:
            hits = pindex.search(task.source_code, cfg.n_pairs, language=task.source_language)
            if cfg.exclude_self_pairs:
                hits = [h for h in hits if pairs[h.doc_id].source_function.strip() != task.source_code.strip()]
            if hits:
                texts = {h.doc_id: pairs[h.doc_id].source_function for h in hits}
                top = self._rerank(hits, task.source_code, texts, cfg.m_pairs, bundle, "translation pair")
                if top:
                    bundle.pair_score = top[0]
                    bundle.translation_pair = pairs[top[0].doc_id]
        return bundle


def assemble_bundle(task: TranslationTask, kb: KnowledgeBase, config: RetrievalConfig | None = None, embedder=None) -> KnowledgeBundle:
    return KnowledgeRetriever(kb, config, embedder).assemble(task)
