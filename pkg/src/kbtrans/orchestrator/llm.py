"""Chat-completion client, scripted mock provider and retry policy."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol

import httpx
import yaml

from .._validation import check_count
from ..promptgen import LlmResponse, PromptText

logger = logging.getLogger(__name__)

API_KEY_ENV = "KBTRANS_LLM_API_KEY"
RETRYABLE_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


class LlmError(RuntimeError):
    """Base class for provider failures."""


class LlmTransportError(LlmError):
    """Connection-level or transient server failure."""


class LlmTimeoutError(LlmTransportError):
    pass


class LlmProtocolError(LlmError):
    """The provider answered with something that retrying will not fix."""


class LlmBudgetExhausted(LlmError):
    """Every allowed attempt failed transiently."""


@dataclass(frozen=True)
class LlmParams:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = "default"
    temperature: float = 0.0
    max_output_tokens: int = 4096
    timeout: float = 120.0
    retries: int = 3
    backoff: float = 1.0  # seconds before the first retry, doubled each time
    system_prompt: str | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        check_count("max_output_tokens", self.max_output_tokens, minimum=1)
        check_count("retries", self.retries)
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.backoff < 0:
            raise ValueError("backoff must be >= 0")

    @classmethod
    def from_dict(cls, data: dict | None) -> "LlmParams":
        return cls(**(data or {}))

    def to_dict(self) -> dict:
        return asdict(self)


class LlmProvider(Protocol):
    def complete(self, prompt: PromptText | str, *, task_id: str = "", round: int = 0) -> LlmResponse: ...


class HttpLlm:
    """OpenAI-style ``/chat/completions`` client with exponential backoff."""

    def __init__(self, params: LlmParams, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.params = params
        self._client = httpx.Client(timeout=params.timeout, transport=transport)
        self._sleep = sleep
        self.requests = 0

    def _body(self, text: str) -> dict:
        messages = []
        if self.params.system_prompt:
            messages.append({"role": "system", "content": self.params.system_prompt})
        messages.append({"role": "user", "content": text})
        return {
            "model": self.params.model,
            "messages": messages,
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_output_tokens,
        }

    def _once(self, body: dict, headers: dict) -> LlmResponse:
        self.requests += 1
        logger.info("llm request %d to %s", self.requests, self.params.endpoint)
        try:
            resp = self._client.post(self.params.endpoint, json=body, headers=headers)
        except httpx.TimeoutException as exc:
            raise LlmTimeoutError(f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise LlmTransportError(f"transport error: {exc}") from exc
        if resp.status_code in RETRYABLE_STATUS:
            raise LlmTransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise LlmProtocolError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        try:
            choice = resp.json()["choices"][0]
            content = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmProtocolError(f"malformed completion response: {exc}") from exc
        if not isinstance(content, str):
            raise LlmProtocolError("completion content is not text")
        return LlmResponse(content, None, choice.get("finish_reason") or "stop")

    def complete(self, prompt: PromptText | str, *, task_id: str = "", round: int = 0) -> LlmResponse:
        body = self._body(str(prompt))
        headers = {}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        attempts = self.params.retries + 1
        for i in range(attempts):
            try:
                return self._once(body, headers)
            except LlmTransportError as exc:
                if self.params.retries == 0:
                    raise
                if i == attempts - 1:
                    raise LlmBudgetExhausted(f"{attempts} attempts failed; last: {exc}") from exc
                delay = self.params.backoff * (2**i)
                logger.warning("llm attempt %d failed (%s); retrying in %.2fs", i + 1, exc, delay)
                if delay:
                    self._sleep(delay)
        raise AssertionError("unreachable")


class MockLlm:
    """Serves canned responses keyed by ``(task_id, round)``.

    The script maps each task id to either a list of responses (index = round)
    or a mapping from round number to response.
    """

    def __init__(self, script: dict[str, list[str] | dict]):
        self.script = {str(k): v for k, v in script.items()}
        self.calls: list[tuple[str, int]] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "MockLlm":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ValueError(f"mock script {path} must map task ids to responses")
        return cls(data.get("responses", data))

    def complete(self, prompt: PromptText | str, *, task_id: str = "", round: int = 0) -> LlmResponse:
        self.calls.append((task_id, round))
        entry = self.script.get(task_id)
        reply = None
        if isinstance(entry, list) and round < len(entry):
            reply = entry[round]
        elif isinstance(entry, dict):
            reply = entry.get(round, entry.get(str(round)))
        elif isinstance(entry, str) and round == 0:
            reply = entry
        if reply is None:
            raise LlmProtocolError(f"no scripted response for task {task_id!r} round {round}")
        return LlmResponse(str(reply), None, "stop")


def complete(prompt: PromptText | str, params: LlmParams, provider: LlmProvider | None = None, **kw) -> LlmResponse:
    """Send one prompt through ``provider`` (an :class:`HttpLlm` on ``params`` by default)."""
    return (provider or HttpLlm(params)).complete(prompt, **kw)
