"""Dependency usage mining: index a project's call and execution statements by
name and scope, then resolve each dependency to its first usage."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .codeparse import (
    FunctionDef,
    extract_call_statements,
    get_language,
    language_for_path,
    module_scope,
    parse_file,
    statement_identifiers,
    top_level_definitions,
)
from .kbstore import DependencyUsageExample

logger = logging.getLogger(__name__)

SKIP_DIRS = frozenset({".git", ".hg", ".svn", "target", "node_modules", "__pycache__", "build", ".venv", "venv"})
# Source-looking files with no grammar get a diagnostic instead of silence.
FOREIGN_SOURCE_EXTS = frozenset(
    {".go", ".cpp", ".cc", ".cxx", ".hpp", ".js", ".ts", ".kt", ".swift", ".rb", ".cs", ".scala", ".php", ".m"}
)
DEP_KINDS = ("function", "variable", "type")


@dataclass(frozen=True)
class Dependency:
    kind: str
    name: str
    code: str
    scope: str = ""

    def __post_init__(self) -> None:
        if self.kind not in DEP_KINDS:
            raise ValueError(f"dependency kind must be one of {DEP_KINDS}, got {self.kind!r}")
        if not self.name:
            raise ValueError("dependency name must be non-empty")
        if self.name not in self.code:
            raise ValueError(f"dependency name {self.name!r} does not appear in its code")

    @classmethod
    def from_dict(cls, data: dict) -> "Dependency":
        return cls(kind=data.get("kind", "function"), name=data["name"], code=data["code"], scope=data.get("scope", ""))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "code": self.code, "scope": self.scope}


@dataclass(frozen=True, order=True)
class UsageEntry:
    file_path: str
    byte_offset: int
    statement_text: str = field(compare=False)
    scope: str = field(compare=False)
    kind: str = field(compare=False)  # "call" or "exec"
    enclosing_function: str = field(compare=False, default="")
    name: str = field(compare=False, default="")


@dataclass(frozen=True)
class Definition:
    name: str
    text: str
    file_path: str
    byte_offset: int
    scope: str
    kind: str  # "function" or "global"


@dataclass(frozen=True)
class FileDiagnostic:
    file: str
    reason: str


@dataclass
class UsageIndex:
    language: str
    by_name: dict[str, list[UsageEntry]] = field(default_factory=dict)
    definitions: dict[str, list[Definition]] = field(default_factory=dict)
    diagnostics: list[FileDiagnostic] = field(default_factory=list)

    def entries(self, name: str, kind: str | None = None) -> list[UsageEntry]:
        found = self.by_name.get(name, [])
        return [e for e in found if kind is None or e.kind == kind]

    def definition(self, name: str, kind: str | None = None) -> Definition | None:
        for d in self.definitions.get(name, []):
            if kind is None or d.kind == kind:
                return d
        return None


def _iter_files(root: Path):
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in SKIP_DIRS and not d.startswith("."))
        for name in sorted(filenames):
            yield Path(dirpath) / name


def _index_file(root: Path, path: Path, language: str):
    rel = path.relative_to(root).as_posix()
    try:
        source = path.read_bytes()
        source.decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return rel, [], [], [FileDiagnostic(rel, f"unreadable: {exc}")]
    diags: list[FileDiagnostic] = []
    scope = module_scope(rel, language, source)
    parsed = parse_file(source, language, scope)
    if parsed.diagnostics:
        diags.append(FileDiagnostic(rel, f"{len(parsed.diagnostics)} syntax error(s); indexed recoverable regions"))
    entries: list[UsageEntry] = []
    defs: list[Definition] = []
    for fn in parsed.functions:
        if not fn.is_closure:
            defs.append(Definition(fn.name, fn.text, rel, fn.byte_range[0], fn.scope, "function"))
        for call in extract_call_statements(fn):
            entries.append(
                UsageEntry(rel, call.byte_offset, call.statement_text, fn.scope, "call", fn.name, call.callee_name)
            )
        for text, offset, names in statement_identifiers(fn):
            for name in sorted(names):
                entries.append(UsageEntry(rel, offset, text, fn.scope, "exec", fn.name, name))
    for name, text, offset in top_level_definitions(source, language):
        defs.append(Definition(name, text, rel, offset, scope, "global"))
    return rel, entries, defs, diags


def index_project(project_root: str | os.PathLike, language: str, jobs: int = 1) -> UsageIndex:
    """Index every call statement (by callee) and execution statement (by each
    whole identifier it mentions) in the project's source files."""
    spec = get_language(language)
    root = Path(project_root)
    if not root.is_dir():
        raise FileNotFoundError(f"project root {root} is not a readable directory")
    index = UsageIndex(spec.name)
    files = []
    for path in _iter_files(root):
        other = language_for_path(path.name)
        if other is not None and other.name == spec.name:
            files.append(path)
        elif other is None and path.suffix.lower() in FOREIGN_SOURCE_EXTS:
            index.diagnostics.append(FileDiagnostic(path.relative_to(root).as_posix(), "no grammar registered"))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda p: _index_file(root, p, spec.name), files))
    else:
        results = [_index_file(root, p, spec.name) for p in files]
    for _, entries, defs, diags in results:
        for e in entries:
            index.by_name.setdefault(e.name, []).append(e)
        for d in defs:
            index.definitions.setdefault(d.name, []).append(d)
        index.diagnostics.extend(diags)
    for name, lst in index.by_name.items():
        lst.sort(key=lambda e: (e.file_path, e.byte_offset, e.kind))
        # A statement mentioning a name twice is one usage.
        dedup = []
        for e in lst:
            if not dedup or (dedup[-1].file_path, dedup[-1].byte_offset, dedup[-1].kind) != (e.file_path, e.byte_offset, e.kind):
                dedup.append(e)
        index.by_name[name] = dedup
    for lst in index.definitions.values():
        lst.sort(key=lambda d: (d.file_path, d.byte_offset))
    index.by_name = dict(sorted(index.by_name.items()))
    index.definitions = dict(sorted(index.definitions.items()))
    index.diagnostics.sort(key=lambda d: (d.file, d.reason))
    return index


def resolve_usage(index: UsageIndex, dep: Dependency, target_scope: str) -> DependencyUsageExample:
    """First usage of ``dep`` in ``target_scope``; else the first project-wide; else empty.

    Function dependencies match call statements by callee name; variables and
    types match execution statements by whole identifier. Statements inside the
    dependency's own definition are ignored.
    """
    kind = "call" if dep.kind == "function" else "exec"
    candidates = [
        e for e in index.entries(dep.name, kind) if not (dep.kind == "function" and e.enclosing_function == dep.name)
    ]
    chosen, origin = None, "none"
    for e in candidates:
        if e.scope == target_scope:
            chosen, origin = e, "same_scope"
            break
    if chosen is None and candidates:
        chosen, origin = candidates[0], "fallback"
    if chosen is None:
        return DependencyUsageExample(dependency_code=dep.code, usage_example="", scope=target_scope, origin="none")
    return DependencyUsageExample(
        dependency_code=dep.code,
        usage_example=chosen.statement_text,
        scope=chosen.scope,
        byte_offset=chosen.byte_offset,
        origin=origin,
        file_path=chosen.file_path,
    )


def extract_from_translation(translated_fn: FunctionDef, index: UsageIndex) -> list[DependencyUsageExample]:
    """Usage examples harvested from a verified translation.

    Each project-defined callee (or global referenced by an execution statement)
    yields one example keyed by its definition text, from its first occurrence.
    """
    found: dict[str, DependencyUsageExample] = {}

    def emit(defn: Definition, statement: str, offset: int) -> None:
        if defn.text in found:
            return
        found[defn.text] = DependencyUsageExample(
            dependency_code=defn.text,
            usage_example=statement,
            scope=translated_fn.scope,
            byte_offset=max(0, offset - translated_fn.byte_range[0]),
            origin="evolved",
        )

    for call in extract_call_statements(translated_fn):
        if call.callee_name == translated_fn.name:
            continue
        defn = index.definition(call.callee_name, "function")
        if defn is not None:
            emit(defn, call.statement_text, call.byte_offset)
    for text, offset, names in statement_identifiers(translated_fn):
        for name in sorted(names):
            defn = index.definition(name, "global")
            if defn is not None:
                emit(defn, text, offset)
    return sorted(found.values(), key=lambda u: (u.byte_offset, u.dependency_code))
