import json
import math

import httpx
import numpy as np
import pytest
from sklearn.base import clone

from kbtrans.kbstore import CodeSample, DependencyUsageExample, TranslationPair
from kbtrans.retrieval import (
    Bm25Index,
    EmbeddingError,
    EmbeddingReranker,
    HashingEmbedder,
    HttpEmbedder,
    KnowledgeRetriever,
    RetrievalConfig,
    RetrievalResult,
    assemble_bundle,
    bm25_score,
    build_index,
    cosine,
    rerank,
    search,
    tokenize_code,
)

from bm25_oracle import CORPUS, QUERIES, oracle_ranking, oracle_score


def test_tokenizer_rules():
    assert tokenize_code("copyHashState", "rust") == ["copy", "hash", "state"]
    assert tokenize_code("fn", "rust") == []
    assert tokenize_code("update_state(ctx, 64)", "rust") == ["update", "state", "ctx", "64"]
    assert tokenize_code("HTTPServer sha256Sum", None) == ["http", "server", "sha256", "sum"]


def test_avgdl_and_lengths():
    index = build_index([("a", "one two three four"), ("b", "one two three four five six")])
    assert index.avgdl_ == 5.0
    assert index.n_docs_ == 2
    assert all(d in index.doc_lengths_ for plist in index.postings_.values() for d, _ in plist)


def test_empty_index():
    index = build_index([])
    assert index.n_docs_ == 0
    assert index.search("anything", 5) == []


def test_empty_document_has_zero_length():
    index = build_index([("a", ""), ("b", "word")])
    assert index.doc_lengths_["a"] == 0


def test_duplicate_doc_id_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        build_index([("a", "x"), ("a", "y")])


def test_rebuild_identical_postings():
    docs = list(CORPUS.items())
    assert build_index(docs).postings_ == build_index(docs).postings_


def test_two_doc_hand_computed_score():
    index = build_index([("d1", "hash state update"), ("d2", "copy hash")])
    # N = 2, n_state = 1, avgdl = 2.5, |d1| = 3
    expected = math.log(2.0) * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 3 / 2.5))
    assert bm25_score(index, ["state"], "d1") == pytest.approx(expected, abs=1e-12)


def test_no_shared_tokens_scores_zero():
    index = build_index(list(CORPUS.items()))
    assert bm25_score(index, ["zebra"], "d1") == 0.0


def test_unknown_doc_id():
    with pytest.raises(KeyError):
        bm25_score(build_index(list(CORPUS.items())), ["hash"], "nope")


@pytest.mark.parametrize("query", QUERIES)
def test_matches_oracle(query):
    index = build_index(list(CORPUS.items()))
    for doc_id in CORPUS:
        assert bm25_score(index, query.split(), doc_id) == pytest.approx(oracle_score(query, doc_id), abs=1e-9)
    assert [r.doc_id for r in search(index, query, None, 5)] == oracle_ranking(query)


def test_scores_non_negative_and_tf_monotone():
    base = build_index([("a", "x y"), ("b", "z w")])
    doubled = build_index([("a", "x x y"), ("b", "z w")])
    assert bm25_score(doubled, ["x"], "a") >= bm25_score(base, ["x"], "a") >= 0


def test_search_n_larger_than_corpus_and_ties():
    index = build_index([("b", "same words"), ("a", "same words"), ("c", "other")])
    res = index.search("same", 10)
    assert [r.doc_id for r in res] == ["a", "b", "c"]
    assert res[0].bm25_score == res[1].bm25_score


def test_query_equal_to_doc_ranks_first():
    index = build_index([("x", "alpha beta"), ("y", "gamma delta"), ("z", "epsilon zeta")])
    assert index.search("gamma delta", 3)[0].doc_id == "y"


def test_removing_doc_only_changes_via_statistics():
    full = dict(CORPUS)
    reduced = {k: v for k, v in full.items() if k != "d3"}
    index = build_index(list(reduced.items()))
    for d in reduced:
        assert bm25_score(index, ["hash", "buffer"], d) == pytest.approx(oracle_score("hash buffer", d, reduced), abs=1e-12)


def test_estimator_surface():
    index = Bm25Index(k1=1.5, b=0.5)
    assert index.get_params() == {"k1": 1.5, "b": 0.5, "language": None}
    fresh = clone(index)
    assert fresh.get_params() == index.get_params()
    m = index.fit(list(CORPUS.items())).transform(["hash", "buffer"])
    assert m.shape == (2, 5)
    with pytest.raises(ValueError):
        Bm25Index(k1=0).fit([])
    with pytest.raises(ValueError):
        Bm25Index(b=1.5).fit([])


def test_json_cache_roundtrip():
    index = build_index(list(CORPUS.items()))
    again = Bm25Index.from_json(index.to_json("fp"), fingerprint="fp")
    for q in QUERIES:
        assert again.search(q, 5) == index.search(q, 5)
    assert Bm25Index.from_json(index.to_json("fp"), fingerprint="other") is None


def test_parameters_are_live():
    docs = list(CORPUS.items())
    default = build_index(docs)
    assert (default.k1, default.b) == (1.2, 0.75)
    for k1, b in ((2.0, 0.75), (1.2, 0.3)):
        other = build_index(docs, k1=k1, b=b)
        assert bm25_score(other, ["hash"], "d1") != bm25_score(default, ["hash"], "d1")


# -- embeddings ------------------------------------------------------------


def test_hashing_embedder_deterministic():
    e = HashingEmbedder()
    v1, v2 = e.embed(["copy_hash_state(ctx)"]), HashingEmbedder().embed(["copy_hash_state(ctx)"])
    assert v1.shape == (1, 256)
    assert np.array_equal(v1, v2)
    assert np.any(e.embed(["+"])[0])


def test_cosine_identical_and_orthogonal():
    assert cosine(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == pytest.approx(1.0)
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert cosine(np.zeros(3), np.ones(3)) == 0.0


def test_rerank_identical_first():
    cands = [RetrievalResult("a", 3.0), RetrievalResult("b", 2.0), RetrievalResult("c", 1.0)]
    texts = {"a": "read file buffer", "b": "hash state update", "c": "copy"}
    out = rerank(cands, "hash state update", HashingEmbedder(), 2, texts)
    assert out[0].doc_id == "b"
    assert out[0].rerank_score == pytest.approx(1.0)
    assert len(out) == 2 and {r.doc_id for r in out} <= {"a", "b", "c"}


class _FixedEmbedder:
    def __init__(self, table):
        self.table = table

    def embed(self, texts):
        return np.array([self.table[t] for t in texts], dtype=float)


def test_rerank_matches_independent_cosines():
    table = {"q": [1, 0, 0], "t1": [1, 1, 0], "t2": [0, 1, 0], "t3": [3, 0, 1]}
    cands = [RetrievalResult(k, 1.0) for k in ("t1", "t2", "t3")]
    out = rerank(cands, "q", _FixedEmbedder(table), 3, {k: k for k in ("t1", "t2", "t3")})

    def cos(u, v):
        return sum(a * b for a, b in zip(u, v)) / math.sqrt(sum(a * a for a in u) * sum(b * b for b in v))

    expected = sorted(("t1", "t2", "t3"), key=lambda k: -cos(table["q"], table[k]))
    assert [r.doc_id for r in out] == expected
    assert out[-1].rerank_score == 0.0


def test_rerank_ties_keep_bm25_rank():
    table = {"q": [1, 0], "x": [2, 0], "y": [1, 0]}
    cands = [RetrievalResult("y", 5.0), RetrievalResult("x", 4.0)]
    out = EmbeddingReranker(_FixedEmbedder(table), 2).rerank(cands, "q", {"x": "x", "y": "y"})
    assert [r.doc_id for r in out] == ["y", "x"]


def test_http_embedder_contract():
    seen = {}

    def handler(request):
        body = json.loads(request.content)
        seen.update(body)
        return httpx.Response(200, json={"vectors": [[1.0, 0.0]] * len(body["inputs"])})

    emb = HttpEmbedder("http://embed.test/v1", model="m", transport=httpx.MockTransport(handler))
    assert emb.embed(["a", "b"]).shape == (2, 2)
    assert seen == {"inputs": ["a", "b"], "model": "m"}


def test_http_embedder_failure_is_retryable():
    emb = HttpEmbedder("http://embed.test", transport=httpx.MockTransport(lambda r: httpx.Response(503)))
    with pytest.raises(EmbeddingError) as info:
        emb.embed(["a"])
    assert info.value.retryable


# -- bundle assembly -------------------------------------------------------


class _BrokenEmbedder:
    def embed(self, texts):
        raise EmbeddingError("down")


def _seed(kb):
    kb.add_code_samples(
        [
            CodeSample("p", "a.rs", "fn hash_update(state: &mut State) { state.update(); }", "rust"),
            CodeSample("p", "b.rs", "fn read_file(path: &str) -> String { std::fs::read_to_string(path).unwrap() }", "rust"),
            CodeSample("p", "c.rs", "fn hash_init() -> State { State::new() }", "rust"),
        ]
    )


def test_empty_kb_bundle(kb, checksum_task):
    bundle = assemble_bundle(checksum_task, kb, RetrievalConfig(), HashingEmbedder())
    assert len(bundle.dependency_examples) == len(checksum_task.dependencies)
    assert bundle.code_samples == [] and bundle.translation_pair is None


def test_dependency_examples_from_project(kb, checksum_task):
    bundle = assemble_bundle(checksum_task, kb)
    by_code = {u.dependency_code: u for u in bundle.dependency_examples}
    mix = next(d for d in checksum_task.dependencies if d.name == "mix")
    assert by_code[mix.code].usage_example == "acc = mix(acc, *b);"


def test_stored_usage_wins(kb, checksum_task):
    mix = next(d for d in checksum_task.dependencies if d.name == "mix")
    kb.add_dependency_examples([DependencyUsageExample(mix.code, "let h = mix(0, 1);", "crate::x", 0)])
    bundle = assemble_bundle(checksum_task, kb)
    assert any(u.usage_example == "let h = mix(0, 1);" for u in bundle.dependency_examples)


def test_single_pair_selected(kb, window_task):
    p = TranslationPair("c", "rust", "int f(void) { return 1; }", "fn f() -> i32 { 1 }")
    kb.add_translation_pair(p)
    assert assemble_bundle(window_task, kb).translation_pair == p


def test_pairs_filtered_by_language_pair(kb, window_task):
    kb.add_translation_pair(TranslationPair("java", "rust", "int f() { return 1; }", "fn f() -> i32 { 1 }"))
    assert assemble_bundle(window_task, kb).translation_pair is None


def test_samples_ranked_and_capped(kb, checksum_task):
    _seed(kb)
    bundle = assemble_bundle(checksum_task, kb, RetrievalConfig(m_samples=2))
    assert len(bundle.code_samples) == 2
    scores = [r.rerank_score for r in bundle.sample_scores]
    assert scores == sorted(scores, reverse=True)


def test_embedder_failure_falls_back(kb, checksum_task):
    _seed(kb)
    bundle = assemble_bundle(checksum_task, kb, RetrievalConfig(), _BrokenEmbedder())
    assert len(bundle.code_samples) == 2
    assert any("BM25 order" in w for w in bundle.warnings)


def test_bundle_deterministic(kb, checksum_task):
    _seed(kb)
    outs = [assemble_bundle(checksum_task, kb, RetrievalConfig(), HashingEmbedder()).to_json() for _ in range(3)]
    assert len(set(outs)) == 1


def test_index_cache_written_and_reused(kb, checksum_task):
    _seed(kb)
    r = KnowledgeRetriever(kb)
    r.assemble(checksum_task)
    cache = kb.index_dir / "samples.json"
    assert cache.exists()
    r2 = KnowledgeRetriever(kb)
    assert r2.assemble(checksum_task).to_json() == r.assemble(checksum_task).to_json()


def test_retrieval_config_validation():
    with pytest.raises(ValueError):
        RetrievalConfig(m_samples=5, n_samples=2)
    with pytest.raises(ValueError):
        RetrievalConfig(b=2.0)
    cfg = RetrievalConfig()
    assert (cfg.k1, cfg.b, cfg.n_samples, cfg.n_pairs, cfg.m_samples, cfg.m_pairs) == (1.2, 0.75, 100, 10, 2, 1)


def test_own_source_never_returned_as_pair(kb, window_task):
    kb.add_translation_pair(TranslationPair("c", "rust", window_task.source_code, "fn own() {}"))
    assert assemble_bundle(window_task, kb).translation_pair is None
    lenient = RetrievalConfig(exclude_self_pairs=False)
    assert assemble_bundle(window_task, kb, lenient).translation_pair is not None
