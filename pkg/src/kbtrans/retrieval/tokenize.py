"""Code-aware tokenization for lexical retrieval.

Identifiers are split on underscores and camel-case boundaries and lower-cased;
keywords of the given language and all punctuation are dropped; numeric literals
are kept verbatim. Lemmatization is the identity on code tokens.
"""

from __future__ import annotations

import re

from ..codeparse.grammars import UnsupportedLanguageError, get_language

_TOKEN_RE = re.compile(r"0[xXbBoO][0-9A-Fa-f_]+|\d[\d_]*(?:\.\d+)?(?:[eE][+-]?\d+)?[A-Za-z0-9_]*|[A-Za-z_][A-Za-z0-9_]*")
# ABCWord -> ABC, Word ; fooBar -> foo, Bar ; sha256Sum -> sha256, Sum
_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+[0-9]*|[A-Z]+[0-9]*|[0-9]+")

TOKENIZER_VERSION = 1


def split_identifier(name: str) -> list[str]:
    parts: list[str] = []
    for chunk in name.split("_"):
        if chunk:
            parts.extend(p.lower() for p in _CAMEL_RE.findall(chunk))
    return parts


def _keywords(language: str | None) -> frozenset[str]:
    if not language:
        return frozenset()
    try:
        return get_language(language).keywords
    except UnsupportedLanguageError:
        return frozenset()


def tokenize_code(text: str, language: str | None = None) -> list[str]:
    stop = _keywords(language)
    tokens: list[str] = []
    for match in _TOKEN_RE.finditer(text):
        tok = match.group(0)
        if tok[0].isdigit():
            tokens.append(tok)
            continue
        if tok in stop:
            continue
        tokens.extend(split_identifier(tok))
    return tokens
