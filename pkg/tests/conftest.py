from __future__ import annotations

import hashlib
import os
import shutil
from pathlib import Path

import pytest

from kbtrans.kbstore import open_kb
from kbtrans.task import load_manifest, load_task

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent / "data"
RUST_PROJ = FIXTURES / "rust_proj"
TASKS = FIXTURES / "tasks"

GOOD_CHECKSUM = """pub fn checksum(data: &[u8]) -> u32 {
    let n = clamp_len(data.len(), 64);
    let mut acc = SEED;
    for b in &data[..n] {
        acc = mix(acc, *b);
    }
    acc
}"""


def find_cargo() -> str | None:
    found = shutil.which("cargo")
    if found:
        return found
    for cand in (Path(os.environ.get("CARGO_HOME", "~/.cargo")).expanduser() / "bin" / "cargo", Path("/opt/cargo/bin/cargo")):
        if cand.is_file():
            return str(cand)
    return None


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def fenced(code: str, tag: str = "rust") -> str:
    return f"Reasoning first.\n\n```{tag}\n{code}\n```\n"


@pytest.fixture
def kb(tmp_path):
    return open_kb(tmp_path / "kb")


@pytest.fixture
def checksum_task():
    return load_task(TASKS / "checksum.yaml")


@pytest.fixture
def window_task():
    return load_task(TASKS / "checksum_window.yaml")


@pytest.fixture
def fixture_tasks():
    return load_manifest(TASKS / "manifest.yaml")


@pytest.fixture
def cargo_env():
    cargo = find_cargo()
    if cargo is None:
        pytest.skip("cargo toolchain not installed")
    return {"PATH": f"{Path(cargo).parent}{os.pathsep}{os.environ.get('PATH', '')}"}


_CRITERIA: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _CRITERIA.append((status, marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, name in _CRITERIA:
        terminalreporter.write_line(f"{status} {name}")
