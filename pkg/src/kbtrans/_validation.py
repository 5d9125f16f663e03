"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import math
from numbers import Integral, Real
from typing import Any, Iterable, Sequence


def check_documents(docs: Iterable[Any]) -> list[tuple[str, str]]:
    """Normalize ``docs`` to a list of ``(doc_id, text)`` with unique string ids.

    Accepts pairs or mappings with ``id``/``text`` keys.
    """
    out: list[tuple[str, str]] = []
    seen: set[str] = set()
    for i, doc in enumerate(docs):
        if isinstance(doc, dict):
            doc_id, text = doc.get("id"), doc.get("text")
        else:
            try:
                doc_id, text = doc
            except (TypeError, ValueError):
                raise ValueError(f"document {i} is not a (doc_id, text) pair") from None
        if not isinstance(doc_id, str) or not isinstance(text, str):
            raise TypeError(f"document {i}: doc_id and text must be str")
        if doc_id in seen:
            raise ValueError(f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        out.append((doc_id, text))
    return out


def check_positive(name: str, value: Any, *, strict: bool = True) -> float:
    if not isinstance(value, Real) or isinstance(value, bool) or not math.isfinite(value):
        raise TypeError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ValueError(f"{name} must be {'>' if strict else '>='} 0, got {value}")
    return float(value)


def check_unit_interval(name: str, value: Any) -> float:
    value = check_positive(name, value, strict=False)
    if value > 1:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value


def check_count(name: str, value: Any, *, minimum: int = 0) -> int:
    if not isinstance(value, Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_texts(texts: Any) -> list[str]:
    if isinstance(texts, str):
        raise TypeError("expected a sequence of texts, got a single str")
    texts = list(texts)
    for t in texts:
        if not isinstance(t, str):
            raise TypeError(f"expected str, got {type(t).__name__}")
    return texts


def check_same_length(a: Sequence, b: Sequence, what: str) -> None:
    if len(a) != len(b):
        raise ValueError(f"{what}: length mismatch ({len(a)} != {len(b)})")
