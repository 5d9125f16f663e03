"""Match-based metrics: BLEU, keyword-weighted BLEU, AST subtree match,
def-use dataflow match and their weighted combination."""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass

from ..codeparse import DEFAULT_MIN_DEPTH, ast_subtrees, get_language, parse_tree

logger = logging.getLogger(__name__)

MAX_ORDER = 4
KEYWORD_WEIGHT = 5.0
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_SOURCE_FIELDS = ("value", "right")
_TARGET_FIELDS = ("pattern", "declarator", "name")
NO_SOURCE = "_"
USE = "<use>"


@dataclass(frozen=True)
class CodeBleuWeights:
    alpha: float = 0.25
    beta: float = 0.25
    gamma: float = 0.25
    delta: float = 0.25

    def __post_init__(self) -> None:
        ws = self.as_tuple()
        if any(w < 0 for w in ws):
            raise ValueError("CodeBLEU weights must be >= 0")
        if not math.isclose(sum(ws), 1.0, abs_tol=1e-9):
            raise ValueError(f"CodeBLEU weights must sum to 1, got {sum(ws)}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.delta)

    @classmethod
    def from_value(cls, value) -> "CodeBleuWeights":
        if value is None:
            return cls()
        if isinstance(value, cls):
            return value
        if isinstance(value, dict):
            return cls(**value)
        return cls(*value)


def code_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _brevity_penalty(c: int, r: int) -> float:
    if c == 0:
        return 0.0
    return 1.0 if c > r else math.exp(1.0 - r / c)


def _bleu(cand: list[str], ref: list[str], unigram_weight=None) -> float:
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, MAX_ORDER + 1):
        c_grams, r_grams = _ngrams(cand, n), _ngrams(ref, n)
        if n == 1 and unigram_weight is not None:
            match = sum(min(cnt, r_grams[g]) * unigram_weight(g[0]) for g, cnt in c_grams.items())
            total = sum(cnt * unigram_weight(g[0]) for g, cnt in c_grams.items())
        else:
            match = sum(min(cnt, r_grams[g]) for g, cnt in c_grams.items())
            total = sum(c_grams.values())
        if n > 1:
            # add-one smoothing on higher orders
            match, total = match + 1, total + 1
        if match == 0:
            return 0.0
        log_sum += math.log(match / total) / MAX_ORDER
    return _brevity_penalty(len(cand), len(ref)) * math.exp(log_sum)


def bleu(candidate: str, reference: str) -> float:
    """Corpus-free BLEU-4: uniform weights, brevity penalty, add-one smoothing for n > 1."""
    return _bleu(code_tokens(candidate), code_tokens(reference))


def weighted_bleu(candidate: str, reference: str, language: str) -> float:
    """BLEU whose unigram precision counts target-language keywords ``KEYWORD_WEIGHT`` times."""
    keywords = get_language(language).keywords
    return _bleu(
        code_tokens(candidate), code_tokens(reference), lambda t: KEYWORD_WEIGHT if t in keywords else 1.0
    )


def _parses(code: str, language: str) -> bool:
    return bool(code.strip()) and not parse_tree(code, get_language(language)).root_node.has_error


def match_ast(candidate: str, reference: str, language: str, min_depth: int = DEFAULT_MIN_DEPTH) -> float:
    """Share of the reference's subtrees (as a multiset) also present in the candidate."""
    get_language(language)
    if not _parses(candidate, language) or not _parses(reference, language):
        logger.warning("match_ast: unparseable input scored 0")
        return 0.0
    ref = ast_subtrees(reference, language, min_depth)
    cand = ast_subtrees(candidate, language, min_depth)
    total = sum(ref.values())
    if total == 0:
        return 1.0 if not cand else 0.0
    return sum((ref & cand).values()) / total


def _identifiers(node) -> list:
    if node.type == "identifier":
        return [node]
    out = []
    for child in node.children:
        out.extend(_identifiers(child))
    return out


def _param_identifiers(node) -> list:
    for f in _TARGET_FIELDS:
        sub = node.child_by_field_name(f)
        if sub is not None:
            return _identifiers(sub)
    out = []
    for child in node.named_children:
        if child.type == "identifier":
            out.append(child)
        else:
            sub = child.child_by_field_name("name")
            if sub is None:
                sub = next((c for c in child.named_children if c.type == "identifier"), None)
            if sub is not None and sub.type == "identifier":
                out.append(sub)
    return out


def dataflow_edges(code: str, language: str) -> Counter | None:
    """Def-use edges with variables renamed by order of first definition.

    Every assignment-like construct yields ``(target, source)`` for each known
    variable read on its right-hand side (``(target, "_")`` when none; compound
    assignments also read their target). Any other read of a known variable
    yields ``(var, "<use>")``. Returns None when the code does not parse.
    """
    spec = get_language(language)
    tree = parse_tree(code, spec)
    if tree.root_node.has_error:
        return None
    src = code.encode("utf-8")
    names: dict[str, str] = {}
    edges: Counter = Counter()
    consumed: set[tuple[int, int]] = set()

    def text(n) -> str:
        return src[n.start_byte : n.end_byte].decode("utf-8", "replace")

    def define(n) -> str:
        return names.setdefault(text(n), f"v{len(names)}")

    def visit(node) -> None:
        if node.type in spec.parameter_kinds:
            for ident in _param_identifiers(node):
                define(ident)
                consumed.add((ident.start_byte, ident.end_byte))
        elif node.type in spec.assign_fields:
            fname = spec.assign_fields[node.type]
            target = node if not fname else node.child_by_field_name(fname)
            source = next((node.child_by_field_name(f) for f in _SOURCE_FIELDS if node.child_by_field_name(f)), None)
            op = node.child_by_field_name("operator")
            compound = not fname or (op is not None and text(op) != "=")
            reads = [i for i in (_identifiers(source) if source is not None else []) if text(i) in names]
            for i in reads:
                consumed.add((i.start_byte, i.end_byte))
            read_ids = [names[text(i)] for i in reads]
            for t in _identifiers(target) if target is not None else []:
                was_known = text(t) in names
                tid = define(t)
                consumed.add((t.start_byte, t.end_byte))
                if compound and was_known:
                    edges[(tid, tid)] += 1
                for r in read_ids:
                    edges[(tid, r)] += 1
                if not read_ids and not (compound and was_known):
                    edges[(tid, NO_SOURCE)] += 1
        elif node.type == "identifier" and (node.start_byte, node.end_byte) not in consumed:
            if text(node) in names:
                edges[(names[text(node)], USE)] += 1
        for child in node.children:
            visit(child)

    visit(tree.root_node)
    return edges


def dataflow_match(candidate: str, reference: str, language: str) -> float | None:
    """Matched reference edges over all reference edges.

    With no reference edges the score is 1 when the candidate has none either,
    otherwise None (the term is dropped from CodeBLEU). Unparseable input scores 0.
    """
    ref = dataflow_edges(reference, language)
    cand = dataflow_edges(candidate, language)
    if ref is None or cand is None:
        return 0.0
    total = sum(ref.values())
    if total == 0:
        return 1.0 if not cand else None
    return sum((ref & cand).values()) / total


@dataclass(frozen=True)
class CodeBleuScore:
    score: float
    bleu: float
    weighted_bleu: float
    match_ast: float
    dataflow_match: float | None


def codebleu_components(
    candidate: str, reference: str, language: str, weights: CodeBleuWeights | None = None
) -> CodeBleuScore:
    w = CodeBleuWeights.from_value(weights)
    parts = (
        bleu(candidate, reference),
        weighted_bleu(candidate, reference, language),
        match_ast(candidate, reference, language),
        dataflow_match(candidate, reference, language),
    )
    pairs = [(wi, p) for wi, p in zip(w.as_tuple(), parts) if p is not None]
    total_w = sum(wi for wi, _ in pairs)
    score = sum(wi * p for wi, p in pairs) / total_w if total_w > 0 else 0.0
    return CodeBleuScore(min(1.0, max(0.0, score)), *parts)


def codebleu(candidate: str, reference: str, language: str, weights: CodeBleuWeights | None = None) -> float:
    return codebleu_components(candidate, reference, language, weights).score
