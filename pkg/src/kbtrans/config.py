"""Run configuration: one YAML/JSON file, overridable from the command line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .codeparse import get_language
from .metrics import CodeBleuWeights
from .orchestrator import LlmParams, PipelineConfig
from .orchestrator.verify import DEFAULT_TIMEOUT
from .promptgen import DEFAULT_ERROR_BUDGET
from .retrieval import HashingEmbedder, HttpEmbedder, RetrievalConfig

BUILTIN_EMBEDDER = "builtin-hash"
VERIFIERS = ("command", "reference")


class ConfigError(ValueError):
    """The configuration violates an invariant."""


@dataclass(frozen=True)
class SyncConfig:
    watch: tuple[str, ...] = ()
    hook: str | None = None  # shell command that fetches new projects into a watched dir

    @classmethod
    def from_dict(cls, data: dict | None) -> "SyncConfig":
        data = dict(data or {})
        return cls(watch=tuple(str(w) for w in data.get("watch", ())), hook=data.get("hook"))


@dataclass(frozen=True)
class Config:
    kb_path: Path = Path("kb")
    target_language: str = "rust"
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    llm: LlmParams = field(default_factory=LlmParams)
    embedder: str | dict = BUILTIN_EMBEDDER
    codebleu_weights: CodeBleuWeights = field(default_factory=CodeBleuWeights)
    repair_rounds: int = 1
    attach_bundle_on_repair: bool = False
    error_budget: int = DEFAULT_ERROR_BUDGET
    build_timeout: float = DEFAULT_TIMEOUT
    test_timeout: float = DEFAULT_TIMEOUT
    verifier: str = "command"
    run_dir: Path = Path("runs/latest")
    sync: SyncConfig = field(default_factory=SyncConfig)

    def __post_init__(self) -> None:
        try:
            get_language(self.target_language)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.repair_rounds < 0:
            raise ConfigError("repair_rounds must be >= 0")
        if self.build_timeout <= 0 or self.test_timeout <= 0:
            raise ConfigError("verification timeouts must be > 0")
        if self.verifier not in VERIFIERS:
            raise ConfigError(f"verifier must be one of {VERIFIERS}")
        if isinstance(self.embedder, str):
            if self.embedder != BUILTIN_EMBEDDER:
                raise ConfigError(f"embedder must be {BUILTIN_EMBEDDER!r} or a mapping with an endpoint")
        elif not isinstance(self.embedder, dict) or "endpoint" not in self.embedder:
            raise ConfigError("embedder mapping needs an 'endpoint'")

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            retrieval=self.retrieval,
            repair_rounds=self.repair_rounds,
            attach_bundle_on_repair=self.attach_bundle_on_repair,
            error_budget=self.error_budget,
        )

    def make_embedder(self):
        if self.embedder == BUILTIN_EMBEDDER:
            return HashingEmbedder()
        e = self.embedder
        return HttpEmbedder(e["endpoint"], e.get("model"), e.get("api_key_env", "KBTRANS_EMBED_API_KEY"))

    def with_overrides(self, **overrides: Any) -> "Config":
        clean = {k: v for k, v in overrides.items() if v is not None}
        for key in ("kb_path", "run_dir"):
            if key in clean:
                clean[key] = Path(clean[key])
        try:
            return replace(self, **clean)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "kb_path": str(self.kb_path),
            "target_language": self.target_language,
            "retrieval": vars(self.retrieval).copy(),
            "llm": self.llm.to_dict(),
            "embedder": self.embedder,
            "codebleu_weights": vars(self.codebleu_weights).copy(),
            "repair_rounds": self.repair_rounds,
            "attach_bundle_on_repair": self.attach_bundle_on_repair,
            "error_budget": self.error_budget,
            "build_timeout": self.build_timeout,
            "test_timeout": self.test_timeout,
            "verifier": self.verifier,
            "run_dir": str(self.run_dir),
            "sync": {"watch": list(self.sync.watch), "hook": self.sync.hook},
        }


def config_from_dict(data: dict | None, base_dir: Path | None = None) -> Config:
    data = dict(data or {})
    known = set(Config.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    def path(key: str) -> None:
        if key in data:
            p = Path(data[key])
            data[key] = p if p.is_absolute() or base_dir is None else base_dir / p

    path("kb_path")
    path("run_dir")
    try:
        if "retrieval" in data:
            data["retrieval"] = RetrievalConfig.from_dict(data["retrieval"])
        if "llm" in data:
            data["llm"] = LlmParams.from_dict(data["llm"])
        if "codebleu_weights" in data:
            data["codebleu_weights"] = CodeBleuWeights.from_value(data["codebleu_weights"])
        if "sync" in data:
            data["sync"] = SyncConfig.from_dict(data["sync"])
        return Config(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"config {path} is not valid: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data, base_dir=path.parent)
