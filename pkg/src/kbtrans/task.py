"""Translation task documents and batch manifests."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .codeparse import get_language, module_scope, parse_tree
from .depextract import Dependency

DEFAULT_BUILD_COMMANDS = {"rust": "cargo build --tests --offline --quiet"}


class TaskError(ValueError):
    """A task document is malformed."""


@dataclass(frozen=True)
class InsertionPoint:
    file: str  # relative to project_path
    marker: str

    def to_dict(self) -> dict:
        return {"file": self.file, "marker": self.marker}


def _signature_parses(signature: str, language: str) -> bool:
    spec = get_language(language)
    sig = signature.strip()
    if spec.name == "python":
        stub = sig + ("\n    pass\n" if sig.endswith(":") else ":\n    pass\n")
    else:
        stub = sig.rstrip(";") + " {}"
    return not parse_tree(stub, spec).root_node.has_error


@dataclass(frozen=True)
class TranslationTask:
    task_id: str
    source_language: str
    target_language: str
    source_code: str
    target_signature: str
    project_path: Path
    test_command: str
    insertion_point: InsertionPoint
    dependencies: tuple[Dependency, ...] = ()
    build_command: str | None = None
    target_scope: str | None = None
    reference_code: str | None = None
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        if not self.task_id:
            raise TaskError("task_id must be non-empty")
        if not self.test_command.strip():
            raise TaskError(f"{self.task_id}: test_command must be non-empty")
        if self.target_signature and not _signature_parses(self.target_signature, self.target_language):
            raise TaskError(f"{self.task_id}: target_signature does not parse as {self.target_language}")

    @property
    def effective_build_command(self) -> str | None:
        if self.build_command is not None:
            return self.build_command or None
        return DEFAULT_BUILD_COMMANDS.get(get_language(self.target_language).name)

    @property
    def scope(self) -> str:
        """Scope of the function under translation; derived from the insertion file by default."""
        if self.target_scope is not None:
            return self.target_scope
        return module_scope(self.insertion_point.file, self.target_language)

    def to_dict(self) -> dict:
        return {
            **self.extra,
            "task_id": self.task_id,
            "source_language": self.source_language,
            "target_language": self.target_language,
            "source_code": self.source_code,
            "target_signature": self.target_signature,
            "dependencies": [d.to_dict() for d in self.dependencies],
            "project_path": str(self.project_path),
            "test_command": self.test_command,
            "build_command": self.build_command,
            "insertion_point": self.insertion_point.to_dict(),
            "target_scope": self.target_scope,
            "reference_code": self.reference_code,
        }

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "TranslationTask":
        known = {
            "task_id", "source_language", "target_language", "source_code", "target_signature", "dependencies",
            "project_path", "test_command", "build_command", "insertion_point", "target_scope", "reference_code",
        }
        try:
            project = Path(data["project_path"])
            if base_dir is not None and not project.is_absolute():
                project = (base_dir / project).resolve()
            ins = data["insertion_point"]
            return cls(
                task_id=str(data["task_id"]),
                source_language=data["source_language"],
                target_language=data["target_language"],
                source_code=data["source_code"],
                target_signature=data.get("target_signature", ""),
                project_path=project,
                test_command=data["test_command"],
                insertion_point=InsertionPoint(ins["file"], ins["marker"]),
                dependencies=tuple(Dependency.from_dict(d) for d in data.get("dependencies", [])),
                build_command=data.get("build_command"),
                target_scope=data.get("target_scope"),
                reference_code=data.get("reference_code"),
                extra={k: v for k, v in data.items() if k not in known},
            )
        except KeyError as exc:
            raise TaskError(f"task document missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, TaskError):
                raise
            raise TaskError(f"invalid task document: {exc}") from None


def _load_structured(path: Path):
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)
    return yaml.safe_load(text)


def load_task(path: str | Path) -> TranslationTask:
    path = Path(path)
    return TranslationTask.from_dict(_load_structured(path), base_dir=path.parent)


def load_manifest(path: str | Path) -> list[TranslationTask]:
    """Read a batch manifest: ``{"tasks": [path-or-inline-document, ...]}``."""
    path = Path(path)
    data = _load_structured(path)
    if data is None:
        return []
    entries = data.get("tasks", []) if isinstance(data, dict) else data
    if not isinstance(entries, list):
        raise TaskError("manifest 'tasks' must be a list")
    tasks = []
    for entry in entries:
        if isinstance(entry, str):
            tasks.append(load_task(path.parent / entry))
        elif isinstance(entry, dict):
            tasks.append(TranslationTask.from_dict(entry, base_dir=path.parent))
        else:
            raise TaskError(f"manifest entry must be a path or a task document, got {type(entry).__name__}")
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise TaskError("duplicate task_id in manifest")
    return tasks
