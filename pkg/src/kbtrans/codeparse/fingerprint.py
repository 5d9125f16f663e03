"""Structural subtree fingerprints used by the AST-match metric."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass

from .grammars import get_language
from .parse import parse_tree

DEFAULT_MIN_DEPTH = 2
IDENT_PLACEHOLDER = "<id>"


@dataclass(frozen=True, order=True)
class SubtreeFingerprint:
    hash: str
    depth: int


def _label(node, source: bytes) -> str:
    if node.child_count:
        return node.type
    if "identifier" in node.type:
        return IDENT_PLACEHOLDER
    if node.is_named:
        # Literals and primitive type names keep their text.
        return f"{node.type}={source[node.start_byte:node.end_byte].decode('utf-8', 'replace')}"
    return node.type


def ast_subtrees(source_text: str | bytes, language: str, min_depth: int = DEFAULT_MIN_DEPTH) -> Counter:
    """Multiset of fingerprints for every subtree of depth >= ``min_depth``.

    The root (whole-file) node is left out so a function's fingerprints are
    contained in those of any file embedding it verbatim. Comments are ignored.
    """
    if min_depth < 1:
        raise ValueError("min_depth must be >= 1")
    spec = get_language(language)
    source = source_text.encode("utf-8") if isinstance(source_text, str) else source_text
    root = parse_tree(source, spec).root_node
    counts: Counter = Counter()
    skip = spec.comment_kinds

    # Iterative post-order: (node, visited) pairs.
    results: dict[int, tuple[str, int]] = {}
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if node.type in skip:
            continue
        if not done:
            stack.append((node, True))
            stack.extend((c, False) for c in reversed(node.children))
            continue
        kids = [results.pop(c.id) for c in node.children if c.id in results]
        depth = 1 + max((d for _, d in kids), default=0)
        payload = _label(node, source) + "(" + ",".join(h for h, _ in kids) + ")"
        digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=12).hexdigest()
        results[node.id] = (digest, depth)
        if node.id != root.id and depth >= min_depth:
            counts[SubtreeFingerprint(digest, depth)] += 1
    return counts
