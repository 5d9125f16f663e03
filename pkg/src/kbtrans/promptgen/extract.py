"""Pull the answer code out of a model response."""

from __future__ import annotations

import re
from dataclasses import dataclass

# Opening fence with an optional info string, body, closing fence of the same length.
_FENCE_RE = re.compile(r"^(?P<ticks>`{3,})[ \t]*(?P<tag>[^\s`]*)[^\n]*\n(?P<body>.*?)^(?P=ticks)[ \t]*$", re.MULTILINE | re.DOTALL)

LANGUAGE_TAGS = {
    "rust": {"rust", "rs"},
    "c": {"c", "h"},
    "java": {"java"},
    "python": {"python", "py", "python3"},
}


class NoContentError(ValueError):
    """The response carried no text at all."""


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    extracted_code: str | None = None
    finish_reason: str = "stop"

    def to_dict(self) -> dict:
        return {"raw_text": self.raw_text, "extracted_code": self.extracted_code, "finish_reason": self.finish_reason}


def _blocks(text: str) -> list[tuple[str, str]]:
    out = []
    for m in _FENCE_RE.finditer(text):
        body = m.group("body")
        out.append((m.group("tag").lower(), body[:-1] if body.endswith("\n") else body))
    return out


def extract_code(response_text: str, target_language: str, prefer: str = "last") -> str:
    """Body of the last fence tagged with the target language, else the last
    untagged fence, else the whole response trimmed.

    ``prefer="first"`` picks the first matching block instead.
    """
    if prefer not in ("first", "last"):
        raise ValueError("prefer must be 'first' or 'last'")
    if not response_text or not response_text.strip():
        raise NoContentError("no content")
    tags = LANGUAGE_TAGS.get(target_language, {target_language})
    blocks = _blocks(response_text)
    pick = (lambda xs: xs[0]) if prefer == "first" else (lambda xs: xs[-1])
    tagged = [b for t, b in blocks if t in tags]
    if tagged:
        return pick(tagged)
    untagged = [b for t, b in blocks if not t]
    if untagged:
        return pick(untagged)
    return response_text.strip()


def parse_response(response_text: str, target_language: str, finish_reason: str = "stop", prefer: str = "last") -> LlmResponse:
    try:
        code = extract_code(response_text, target_language, prefer)
    except NoContentError:
        code = None
    return LlmResponse(response_text, code, finish_reason)
