"""On-disk knowledge base: code samples, verified translation pairs and dependency
usage examples, each in its own JSON-Lines file next to a manifest.

Single writer, many readers. Mutations are not locked here; callers serialize them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import shutil
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_FILE = "manifest.json"
SAMPLES_FILE = "samples.jsonl"
PAIRS_FILE = "pairs.jsonl"
USAGE_FILE = "dep_usage.jsonl"
INDEX_DIR = "index"
DEFAULT_UPDATE_INTERVAL = 86400.0


class KbError(Exception):
    """Base class for knowledge-base failures."""


class ManifestError(KbError):
    pass


class LanguageMismatchError(KbError, ValueError):
    pass


class UnverifiedPairError(KbError, ValueError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def _digest(*parts: str) -> str:
    h = hashlib.sha1()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def _split_extra(data: dict, known: Iterable[str]) -> tuple[dict, dict]:
    known = set(known)
    return {k: v for k, v in data.items() if k in known}, {k: v for k, v in data.items() if k not in known}


@dataclass
class CodeSample:
    project_name: str
    file_path: str
    function_text: str
    language: str
    id: str = ""
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    _FIELDS = ("id", "project_name", "file_path", "function_text", "language")

    def __post_init__(self) -> None:
        if not self.function_text:
            raise ValueError("function_text must be non-empty")
        if not self.id:
            self.id = "s-" + _digest(self.project_name, self.file_path, self.function_text)

    def to_dict(self) -> dict:
        return {**self.extra, **{k: getattr(self, k) for k in self._FIELDS}}

    @classmethod
    def from_dict(cls, data: dict) -> "CodeSample":
        known, extra = _split_extra(data, cls._FIELDS)
        return cls(**known, extra=extra)


@dataclass
class TranslationPair:
    source_language: str
    target_language: str
    source_function: str
    target_function: str
    provenance: str = "evolved"
    verified: bool = True
    id: str = ""
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    _FIELDS = (
        "id",
        "source_language",
        "target_language",
        "source_function",
        "target_function",
        "provenance",
        "verified",
    )

    def __post_init__(self) -> None:
        if not self.source_function or not self.target_function:
            raise ValueError("source_function and target_function must be non-empty")
        if self.provenance not in ("evolved", "imported"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not self.id:
            self.id = "p-" + _digest(
                self.source_language, self.target_language, self.source_function, self.target_function
            )

    def to_dict(self) -> dict:
        return {**self.extra, **{k: getattr(self, k) for k in self._FIELDS}}

    @classmethod
    def from_dict(cls, data: dict) -> "TranslationPair":
        known, extra = _split_extra(data, cls._FIELDS)
        return cls(**known, extra=extra)


@dataclass
class DependencyUsageExample:
    """A dependency's definition text paired with its first known invocation.

    ``origin`` records how the usage was found: ``same_scope``, ``fallback``
    (another scope of the project), ``evolved`` (from a verified translation) or
    ``none`` when no usage exists.
    """

    dependency_code: str
    usage_example: str = ""
    scope: str = ""
    byte_offset: int = 0
    origin: str = ""
    file_path: str = ""
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    _FIELDS = ("id", "dependency_code", "usage_example", "scope", "byte_offset", "origin", "file_path")

    def __post_init__(self) -> None:
        if not self.dependency_code:
            raise ValueError("dependency_code must be non-empty")
        if self.byte_offset < 0:
            raise ValueError("byte_offset must be >= 0")
        if not self.origin:
            self.origin = "none" if not self.usage_example else "same_scope"

    @property
    def id(self) -> str:
        return "u-" + _digest(self.dependency_code)

    def to_dict(self) -> dict:
        return {**self.extra, **{k: getattr(self, k) for k in self._FIELDS}}

    @classmethod
    def from_dict(cls, data: dict) -> "DependencyUsageExample":
        known, extra = _split_extra(data, cls._FIELDS)
        known.pop("id", None)
        return cls(**known, extra=extra)


@dataclass
class KbManifest:
    target_language: str
    schema_version: int = SCHEMA_VERSION
    excluded_projects: set[str] = field(default_factory=set)
    created_at: str = field(default_factory=_now)
    updated_at: str = ""
    update_interval: float = DEFAULT_UPDATE_INTERVAL
    last_sync: str = ""
    synced_projects: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    _FIELDS = (
        "schema_version",
        "target_language",
        "excluded_projects",
        "created_at",
        "updated_at",
        "update_interval",
        "last_sync",
        "synced_projects",
    )

    def __post_init__(self) -> None:
        if self.schema_version < 1:
            raise ManifestError("schema_version must be >= 1")
        if self.update_interval <= 0:
            raise ManifestError("update_interval must be > 0")
        if not self.updated_at:
            self.updated_at = self.created_at

    def to_dict(self) -> dict:
        out = {**self.extra, **{k: getattr(self, k) for k in self._FIELDS}}
        out["excluded_projects"] = sorted(self.excluded_projects)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "KbManifest":
        known, extra = _split_extra(data, cls._FIELDS)
        known["excluded_projects"] = set(known.get("excluded_projects", ()))
        return cls(**known, extra=extra)


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise KbError(f"{path.name}:{lineno}: corrupt record ({exc.msg})") from exc
    return records


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class KnowledgeBase:
    """Handle on a knowledge-base directory. Use :func:`open_kb` to obtain one."""

    def __init__(self, root_path: Path, manifest: KbManifest) -> None:
        self.root_path = Path(root_path)
        self.manifest = manifest
        self._samples: dict[str, CodeSample] = {}
        self._pairs: dict[str, TranslationPair] = {}
        self._usages: dict[str, DependencyUsageExample] = {}
        # Bumped on every mutation; retrieval caches key on it.
        self.version = 0

    # -- read side -------------------------------------------------------
    @property
    def samples(self) -> list[CodeSample]:
        return list(self._samples.values())

    @property
    def pairs(self) -> list[TranslationPair]:
        return list(self._pairs.values())

    @property
    def usages(self) -> list[DependencyUsageExample]:
        return list(self._usages.values())

    @property
    def target_language(self) -> str:
        return self.manifest.target_language

    @property
    def index_dir(self) -> Path:
        return self.root_path / INDEX_DIR

    def usage_for(self, dependency_code: str) -> DependencyUsageExample | None:
        return self._usages.get(dependency_code)

    def get_pair(self, pair_id: str) -> TranslationPair | None:
        return self._pairs.get(pair_id)

    def get_sample(self, sample_id: str) -> CodeSample | None:
        return self._samples.get(sample_id)

    # -- persistence -----------------------------------------------------
    def _path(self, name: str) -> Path:
        return self.root_path / name

    def _append(self, name: str, records: Iterable[dict]) -> None:
        lines = "".join(_dumps(r) + "\n" for r in records)
        if lines:
            with self._path(name).open("a", encoding="utf-8") as fh:
                fh.write(lines)

    def _rewrite(self, name: str, records: Iterable[dict]) -> None:
        _atomic_write(self._path(name), "".join(_dumps(r) + "\n" for r in records))

    def save_manifest(self) -> None:
        _atomic_write(self._path(MANIFEST_FILE), json.dumps(self.manifest.to_dict(), indent=2, sort_keys=True) + "\n")

    def _touch(self) -> None:
        self.version += 1
        self.manifest.updated_at = _now()
        self.save_manifest()

    # -- write side ------------------------------------------------------
    def add_code_samples(self, samples: Iterable[CodeSample]) -> int:
        """Append samples, skipping exact duplicates and excluded projects."""
        fresh: list[CodeSample] = []
        for sample in samples:
            if sample.language != self.manifest.target_language:
                raise LanguageMismatchError(
                    f"sample {sample.file_path!r} is {sample.language}, KB target is {self.manifest.target_language}"
                )
            if sample.project_name in self.manifest.excluded_projects or sample.id in self._samples:
                continue
            self._samples[sample.id] = sample
            fresh.append(sample)
        if fresh:
            self._append(SAMPLES_FILE, (s.to_dict() for s in fresh))
            self._touch()
        return len(fresh)

    def add_translation_pair(self, pair: TranslationPair) -> str:
        if pair.verified is not True:
            raise UnverifiedPairError("unverified pair")
        if pair.id in self._pairs:
            return pair.id
        self._pairs[pair.id] = pair
        self._append(PAIRS_FILE, [pair.to_dict()])
        self._touch()
        return pair.id

    def add_dependency_examples(self, examples: Iterable[DependencyUsageExample]) -> int:
        """Store examples keyed by dependency code; on collision the smaller offset wins.

        An existing entry with an empty usage is always upgraded by a non-empty one.
        Returns the number of keys created or replaced.
        """
        changed = 0
        replaced = False
        appended: list[DependencyUsageExample] = []
        for ex in examples:
            current = self._usages.get(ex.dependency_code)
            if current is None:
                self._usages[ex.dependency_code] = ex
                appended.append(ex)
                changed += 1
                continue
            better = (not current.usage_example and ex.usage_example) or (
                bool(ex.usage_example) == bool(current.usage_example) and ex.byte_offset < current.byte_offset
            )
            if better:
                self._usages[ex.dependency_code] = ex
                replaced = True
                changed += 1
        if replaced:
            self._rewrite(USAGE_FILE, (u.to_dict() for u in self._usages.values()))
        elif appended:
            self._append(USAGE_FILE, (u.to_dict() for u in appended))
        if changed:
            self._touch()
        return changed

    def apply_exclusion(self, project_names: Iterable[str]) -> int:
        names = set(project_names)
        doomed = [sid for sid, s in self._samples.items() if s.project_name in names]
        for sid in doomed:
            del self._samples[sid]
        before = set(self.manifest.excluded_projects)
        self.manifest.excluded_projects |= names
        if doomed:
            self._rewrite(SAMPLES_FILE, (s.to_dict() for s in self._samples.values()))
        if doomed or self.manifest.excluded_projects != before:
            self._touch()
        return len(doomed)

    def stats(self) -> dict:
        return {
            "samples": len(self._samples),
            "pairs": len(self._pairs),
            "usages": len(self._usages),
            "usages_nonempty": sum(1 for u in self._usages.values() if u.usage_example),
            "projects": len({s.project_name for s in self._samples.values()}),
            "target_language": self.manifest.target_language,
            "schema_version": self.manifest.schema_version,
            "excluded_projects": sorted(self.manifest.excluded_projects),
            "updated_at": self.manifest.updated_at,
        }

    def __repr__(self) -> str:
        s = self.stats()
        return f"KnowledgeBase({str(self.root_path)!r}, samples={s['samples']}, pairs={s['pairs']}, usages={s['usages']})"


def open_kb(root_path: str | os.PathLike, target_language: str = "rust") -> KnowledgeBase:
    """Open (or create) the knowledge base at ``root_path``.

    ``target_language`` only applies when a fresh manifest has to be written.
    """
    root = Path(root_path)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise KbError(f"cannot create KB directory {root}: {exc}") from exc
    if not os.access(root, os.R_OK | os.X_OK):
        raise KbError(f"KB directory {root} is unreadable")
    manifest_path = root / MANIFEST_FILE
    if manifest_path.exists():
        try:
            data = json.loads(manifest_path.read_text(encoding="utf-8"))
            if not isinstance(data, dict):
                raise ValueError("not an object")
            version = int(data.get("schema_version", 0))
        except (OSError, ValueError, TypeError) as exc:
            raise ManifestError(f"manifest unreadable: {exc}") from exc
        if version > SCHEMA_VERSION:
            raise ManifestError(f"manifest schema_version {version} is newer than supported ({SCHEMA_VERSION})")
        try:
            manifest = KbManifest.from_dict(data)
        except (TypeError, ManifestError) as exc:
            raise ManifestError(f"manifest unreadable: {exc}") from exc
        kb = KnowledgeBase(root, manifest)
    else:
        kb = KnowledgeBase(root, KbManifest(target_language=target_language))
        kb.save_manifest()
    for rec in _read_jsonl(root / SAMPLES_FILE):
        s = CodeSample.from_dict(rec)
        kb._samples[s.id] = s
    for rec in _read_jsonl(root / PAIRS_FILE):
        p = TranslationPair.from_dict(rec)
        kb._pairs[p.id] = p
    for rec in _read_jsonl(root / USAGE_FILE):
        u = DependencyUsageExample.from_dict(rec)
        kb._usages[u.dependency_code] = u
    return kb


def add_code_samples(kb: KnowledgeBase, samples: Iterable[CodeSample]) -> int:
    return kb.add_code_samples(samples)


def add_translation_pair(kb: KnowledgeBase, pair: TranslationPair) -> str:
    return kb.add_translation_pair(pair)


def add_dependency_examples(kb: KnowledgeBase, examples: Iterable[DependencyUsageExample]) -> int:
    return kb.add_dependency_examples(examples)


def apply_exclusion(kb: KnowledgeBase, project_names: Iterable[str]) -> int:
    return kb.apply_exclusion(project_names)


def kb_stats(kb: KnowledgeBase) -> dict:
    return kb.stats()


def snapshot_fraction(
    kb: KnowledgeBase, fraction: float, seed: int, dest: str | os.PathLike | None = None
) -> KnowledgeBase:
    """Write a staged copy of ``kb`` retaining ``floor(fraction * n)`` of each store.

    Usage examples that are not retained keep their key with an empty usage; code
    samples are sampled by whole project; pairs are sampled individually. Records
    keep their original order, so ``fraction=1.0`` reproduces the stores exactly.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    dest = Path(dest) if dest is not None else kb.root_path.with_name(f"{kb.root_path.name}.f{fraction:g}-s{seed}")
    if dest.resolve() == kb.root_path.resolve():
        raise ValueError("snapshot destination must differ from the source KB")
    if dest.exists():
        shutil.rmtree(dest)
    dest.mkdir(parents=True)
    rng = random.Random(seed)

    def pick(keys: list[str]) -> set[str]:
        return set(rng.sample(sorted(keys), int(fraction * len(keys))))

    usages = kb.usages
    keep_usage = pick([u.dependency_code for u in usages if u.usage_example])
    projects = pick(sorted({s.project_name for s in kb.samples}))
    keep_pairs = pick([p.id for p in kb.pairs])

    manifest = KbManifest.from_dict(kb.manifest.to_dict())
    manifest.extra = {**manifest.extra, "snapshot_of": str(kb.root_path), "fraction": fraction, "seed": seed}
    snap = KnowledgeBase(dest, manifest)
    for s in kb.samples:
        if s.project_name in projects:
            snap._samples[s.id] = s
    for p in kb.pairs:
        if p.id in keep_pairs:
            snap._pairs[p.id] = p
    for u in usages:
        if u.dependency_code in keep_usage or not u.usage_example:
            snap._usages[u.dependency_code] = u
        else:
            snap._usages[u.dependency_code] = DependencyUsageExample(
                dependency_code=u.dependency_code, scope=u.scope, origin="none", file_path="", extra=dict(u.extra)
            )
    snap.save_manifest()
    snap._rewrite(SAMPLES_FILE, (s.to_dict() for s in snap._samples.values()))
    snap._rewrite(PAIRS_FILE, (p.to_dict() for p in snap._pairs.values()))
    snap._rewrite(USAGE_FILE, (u.to_dict() for u in snap._usages.values()))
    return snap
