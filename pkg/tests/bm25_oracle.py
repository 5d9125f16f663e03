"""Independent BM25 reference used by the retrieval tests.

Documents are given as whitespace-separated lower-case words so the code
tokenizer is the identity on them.
"""

import math

K1, B = 1.2, 0.75

CORPUS = {
    "d1": "hash state update block",
    "d2": "copy hash state",
    "d3": "read file buffer buffer",
    "d4": "update update update counter",
    "d5": "write buffer hash",
}

QUERIES = [
    "hash",
    "state",
    "update",
    "buffer",
    "hash state",
    "copy hash state",
    "read buffer",
    "counter update",
    "missing",
    "hash hash buffer",
]


def oracle_score(query, doc_id, corpus=CORPUS, k1=K1, b=B):
    docs = {d: t.split() for d, t in corpus.items()}
    n_docs = len(docs)
    avgdl = sum(len(t) for t in docs.values()) / n_docs
    words = docs[doc_id]
    total = 0.0
    for w in query.split():
        n_w = sum(1 for t in docs.values() if w in t)
        idf = math.log(1 + (n_docs - n_w + 0.5) / (n_w + 0.5))
        tf = words.count(w)
        total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(words) / avgdl))
    return total


def oracle_ranking(query, corpus=CORPUS):
    scored = [(oracle_score(query, d, corpus), d) for d in corpus]
    return [d for s, d in sorted(scored, key=lambda x: (-x[0], x[1]))]
