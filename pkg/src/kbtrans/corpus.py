"""Turn project directories into code samples for the knowledge base."""

from __future__ import annotations

import os
from pathlib import Path

from .codeparse import get_language, language_for_path, parse_functions
from .depextract import SKIP_DIRS
from .kbstore import CodeSample


PROJECT_MARKERS = frozenset(
    {"Cargo.toml", "pyproject.toml", "setup.py", "pom.xml", "build.gradle", "Makefile", "CMakeLists.txt", "src"}
)


def is_project(path: Path) -> bool:
    return any((path / m).exists() for m in PROJECT_MARKERS) or any(
        language_for_path(f.name) for f in path.iterdir() if f.is_file()
    )


def corpus_projects(corpus_root: str | os.PathLike) -> list[tuple[str, Path]]:
    """``(project_name, path)`` pairs found under ``corpus_root``.

    A root that itself looks like a project (build manifest, ``src/`` or
    top-level sources) is one project; otherwise each subdirectory is one.
    """
    root = Path(corpus_root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise FileNotFoundError(f"corpus root {root} is not a readable directory")
    if is_project(root):
        return [(root.resolve().name, root)]
    return [
        (p.name, p) for p in sorted(root.iterdir()) if p.is_dir() and p.name not in SKIP_DIRS and not p.name.startswith(".")
    ]


def collect_samples(project_dir: str | os.PathLike, project_name: str, language: str) -> tuple[list[CodeSample], list[str]]:
    """Every named function in the project's ``language`` files, plus per-file problems."""
    spec = get_language(language)
    root = Path(project_dir)
    samples, problems = [], []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in SKIP_DIRS and not d.startswith("."))
        for name in sorted(filenames):
            path = Path(dirpath) / name
            found = language_for_path(name)
            if found is None or found.name != spec.name:
                continue
            rel = path.relative_to(root).as_posix()
            try:
                text = path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                problems.append(f"{project_name}/{rel}: unreadable: {exc}")
                continue
            for fn in parse_functions(text, spec.name):
                if not fn.is_closure:
                    samples.append(CodeSample(project_name, rel, fn.text, spec.name))
    return samples, problems
