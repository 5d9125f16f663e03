from .bm25 import DEFAULT_B, DEFAULT_K1, Bm25Index, RetrievalResult, bm25_score, build_index, search
from .bundle import KnowledgeBundle, KnowledgeRetriever, RetrievalConfig, assemble_bundle
from .embed import (
    HASH_DIM,
    Embedder,
    EmbeddingError,
    EmbeddingReranker,
    HashingEmbedder,
    HttpEmbedder,
    cosine,
    rerank,
)
from .tokenize import split_identifier, tokenize_code

__all__ = [
    "Bm25Index",
    "DEFAULT_B",
    "DEFAULT_K1",
    "Embedder",
    "EmbeddingError",
    "EmbeddingReranker",
    "HASH_DIM",
    "HashingEmbedder",
    "HttpEmbedder",
    "KnowledgeBundle",
    "KnowledgeRetriever",
    "RetrievalConfig",
    "RetrievalResult",
    "assemble_bundle",
    "bm25_score",
    "build_index",
    "cosine",
    "rerank",
    "search",
    "split_identifier",
    "tokenize_code",
]
