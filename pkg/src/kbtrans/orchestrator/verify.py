"""Compile-and-test verification of a candidate inside a throwaway workspace."""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from ..codeparse import get_language, parse_tree
from ..task import TranslationTask

DEFAULT_TIMEOUT = 120.0
TIMEOUT_TEXT = "timeout"
_COPY_IGNORE = shutil.ignore_patterns(".git", ".hg", ".svn")


class WorkspaceError(RuntimeError):
    """The project could not be copied or the candidate could not be spliced in."""


@dataclass(frozen=True)
class VerificationResult:
    compiled: bool
    tests_passed: bool
    error_text: str = ""
    duration: float = field(default=0.0, compare=False)
    log: str = field(default="", compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.tests_passed and not self.compiled:
            raise ValueError("tests_passed requires compiled")
        if self.tests_passed == bool(self.error_text):
            raise ValueError("error_text must be empty exactly when tests pass")

    def to_dict(self) -> dict:
        return {"compiled": self.compiled, "tests_passed": self.tests_passed, "error_text": self.error_text}


class Verifier(Protocol):
    def verify(self, candidate_code: str, task: TranslationTask, workspace_root: Path | None = None) -> VerificationResult: ...


def splice(text: str, marker: str, candidate: str) -> str:
    count = text.count(marker)
    if count != 1:
        raise WorkspaceError(f"insertion marker {marker!r} found {count} times, expected exactly once")
    return text.replace(marker, candidate)


@dataclass
class _Phase:
    name: str
    command: str
    returncode: int | None
    output: str
    seconds: float

    @property
    def timed_out(self) -> bool:
        return self.returncode is None

    def render(self) -> str:
        status = "timeout" if self.timed_out else f"exit {self.returncode}"
        return f"== {self.name}: {self.command} ({status})\n{self.output}"


def _run(name: str, command: str, cwd: Path, timeout: float, env: dict) -> _Phase:
    start = time.monotonic()
    proc = subprocess.Popen(
        command,
        shell=True,
        cwd=cwd,
        env=env,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        start_new_session=True,
    )
    try:
        out, _ = proc.communicate(timeout=timeout)
        code: int | None = proc.returncode
    except subprocess.TimeoutExpired:
        os.killpg(proc.pid, signal.SIGKILL)
        out, _ = proc.communicate()
        code = None
    return _Phase(name, command, code, out.decode("utf-8", "replace"), time.monotonic() - start)


class CommandVerifier:
    """Copies the project, splices the candidate at the marker, then runs the
    build command (if any) and the test command, each under its own timeout."""

    def __init__(
        self,
        build_timeout: float = DEFAULT_TIMEOUT,
        test_timeout: float = DEFAULT_TIMEOUT,
        workspace_root: Path | None = None,
        keep_workspace: bool = False,
        env: dict[str, str] | None = None,
    ):
        self.build_timeout = build_timeout
        self.test_timeout = test_timeout
        self.workspace_root = workspace_root
        self.keep_workspace = keep_workspace
        self.env = env or {}

    def _prepare(self, candidate_code: str, task: TranslationTask, root: Path | None) -> tuple[Path, Path]:
        src = Path(task.project_path)
        if not src.is_dir():
            raise WorkspaceError(f"project path {src} is not a readable directory")
        if root is not None:
            Path(root).mkdir(parents=True, exist_ok=True)
        ws = Path(tempfile.mkdtemp(prefix="kbtrans-ws-", dir=root))
        project = ws / src.name
        try:
            shutil.copytree(src, project, ignore=_COPY_IGNORE, symlinks=True)
            target = project / task.insertion_point.file
            target.write_text(
                splice(target.read_text(encoding="utf-8"), task.insertion_point.marker, candidate_code),
                encoding="utf-8",
            )
        except (OSError, UnicodeDecodeError) as exc:
            shutil.rmtree(ws, ignore_errors=True)
            raise WorkspaceError(f"workspace setup failed: {exc}") from exc
        except WorkspaceError:
            shutil.rmtree(ws, ignore_errors=True)
            raise
        return ws, project

    def verify(self, candidate_code: str, task: TranslationTask, workspace_root: Path | None = None) -> VerificationResult:
        start = time.monotonic()
        ws, project = self._prepare(candidate_code, task, workspace_root or self.workspace_root)
        env = {**os.environ, **self.env}
        phases: list[_Phase] = []
        try:
            build = task.effective_build_command
            if build:
                phase = _run("build", build, project, self.build_timeout, env)
                phases.append(phase)
                if phase.timed_out:
                    return self._result(False, False, TIMEOUT_TEXT, start, phases)
                if phase.returncode != 0:
                    text = phase.output.strip() or f"build failed with exit code {phase.returncode}"
                    return self._result(False, False, text, start, phases)
                compiled = True
            else:
                # Interpreted targets have no build step; a syntax check stands in.
                compiled = not parse_tree(candidate_code, get_language(task.target_language)).root_node.has_error
            phase = _run("test", task.test_command, project, self.test_timeout, env)
            phases.append(phase)
            if phase.timed_out:
                return self._result(compiled, False, TIMEOUT_TEXT, start, phases)
            if phase.returncode != 0:
                text = phase.output.strip() or f"tests failed with exit code {phase.returncode}"
                return self._result(compiled, False, text, start, phases)
            return self._result(True, True, "", start, phases)
        finally:
            if not self.keep_workspace:
                shutil.rmtree(ws, ignore_errors=True)

    @staticmethod
    def _result(compiled: bool, passed: bool, error: str, start: float, phases: list[_Phase]) -> VerificationResult:
        log = "\n".join(p.render() for p in phases)
        return VerificationResult(compiled, passed, error, time.monotonic() - start, log)


def _normalize(code: str) -> str:
    return " ".join(code.split())


class ReferenceVerifier:
    """Toolchain-free stand-in: a candidate passes iff it matches the task's
    reference code up to whitespace; unparseable candidates do not compile."""

    def verify(self, candidate_code: str, task: TranslationTask, workspace_root: Path | None = None) -> VerificationResult:
        spec = get_language(task.target_language)
        if not candidate_code.strip() or parse_tree(candidate_code, spec).root_node.has_error:
            return VerificationResult(False, False, "error: candidate does not parse", log="stub: syntax")
        if task.reference_code is not None and _normalize(candidate_code) == _normalize(task.reference_code):
            return VerificationResult(True, True, log="stub: matches reference")
        return VerificationResult(True, False, "test failed: candidate differs from reference", log="stub: mismatch")


class CallableVerifier:
    """Wraps ``fn(candidate_code, task) -> VerificationResult`` for tests and scripted runs."""

    def __init__(self, fn: Callable[[str, TranslationTask], VerificationResult]):
        self.fn = fn

    def verify(self, candidate_code: str, task: TranslationTask, workspace_root: Path | None = None) -> VerificationResult:
        return self.fn(candidate_code, task)
