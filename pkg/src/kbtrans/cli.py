"""``kbtrans`` command line: KB lifecycle, batch translation and evaluation.

Exit codes: 0 success, 1 infrastructure failure, 2 invalid input.
"""

from __future__ import annotations

import functools
import json
import logging
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from .config import Config, ConfigError, load_config
from .corpus import collect_samples, corpus_projects, is_project
from .kbstore import (
    DependencyUsageExample,
    KbError,
    KnowledgeBase,
    LanguageMismatchError,
    ManifestError,
    TranslationPair,
    UnverifiedPairError,
    open_kb,
    snapshot_fraction,
)
from .metrics import format_replay, format_table, load_replay, read_outcomes, report
from .orchestrator import CommandVerifier, MockLlm, HttpLlm, ReferenceVerifier, RunDirectory, TaskError, load_manifest, run_batch
from .retrieval import KnowledgeRetriever

EXIT_OK, EXIT_INFRA, EXIT_INPUT = 0, 1, 2
logger = logging.getLogger("kbtrans")


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


class InfraError(click.ClickException):
    exit_code = EXIT_INFRA


def _guard(fn):
    """Map library exceptions onto the CLI exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ConfigError, TaskError, UnverifiedPairError, LanguageMismatchError) as exc:
            raise InputError(str(exc)) from exc
        except (ManifestError, KbError, OSError) as exc:
            raise InfraError(str(exc)) from exc
        except ValueError as exc:
            raise InputError(str(exc)) from exc

    return wrapper


class _State:
    def __init__(self, config: Config):
        self.config = config
        self._kb: KnowledgeBase | None = None

    def kb(self) -> KnowledgeBase:
        if self._kb is None:
            self._kb = open_kb(self.config.kb_path, self.config.target_language)
        return self._kb


def _state(ctx: click.Context) -> _State:
    return ctx.find_object(_State)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML or JSON config file.")
@click.option("--kb", "kb_path", type=click.Path(file_okay=False), help="Knowledge base directory.")
@click.option("-v", "--verbose", count=True, help="More logging (-vv for debug).")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, kb_path: str | None, verbose: int) -> None:
    """Repository-aware function translation with a self-evolving knowledge base."""
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = load_config(config_path).with_overrides(kb_path=kb_path)
    except ConfigError as exc:
        raise InputError(str(exc)) from exc
    ctx.obj = _State(config)


@main.group()
def kb() -> None:
    """Build, sync, stage and inspect the knowledge base."""


def _ingest_projects(kb: KnowledgeBase, projects: list[tuple[str, Path]]) -> tuple[int, list[str]]:
    added, problems = 0, []
    for name, path in projects:
        samples, errs = collect_samples(path, name, kb.target_language)
        problems.extend(errs)
        added += kb.add_code_samples(samples)
    return added, problems


@kb.command("build")
@click.argument("corpus_dirs", nargs=-1, required=True, type=click.Path())
@click.option("--exclude", "exclusions", multiple=True, help="Project name to exclude (repeatable).")
@click.pass_context
@_guard
def kb_build(ctx: click.Context, corpus_dirs: tuple[str, ...], exclusions: tuple[str, ...]) -> None:
    """Parse target-language functions under CORPUS_DIRS into code samples."""
    projects = []
    for d in corpus_dirs:
        try:
            projects.extend(corpus_projects(d))
        except FileNotFoundError as exc:
            raise InfraError(str(exc)) from exc
    kb = _state(ctx).kb()
    removed = kb.apply_exclusion(set(exclusions)) if exclusions else 0
    added, problems = _ingest_projects(kb, projects)
    for p in problems:
        click.echo(f"warning: {p}", err=True)
    KnowledgeRetriever(kb, _state(ctx).config.retrieval, _state(ctx).config.make_embedder()).rebuild()
    if removed:
        click.echo(f"{removed} samples removed by exclusion")
    click.echo(f"{added} samples added")


def _parse_time(ts: str) -> datetime | None:
    try:
        return datetime.fromisoformat(ts) if ts else None
    except ValueError:
        return None


@kb.command("sync")
@click.argument("sources", nargs=-1, type=click.Path())
@click.option("--force", is_flag=True, help="Ignore the manifest's update interval.")
@click.pass_context
@_guard
def kb_sync(ctx: click.Context, sources: tuple[str, ...], force: bool) -> None:
    """Ingest projects that appeared in the watched directories since the last sync."""
    cfg = _state(ctx).config
    kb = _state(ctx).kb()
    m = kb.manifest
    now = datetime.now(timezone.utc).replace(microsecond=0)
    last = _parse_time(m.last_sync)
    if not force and last is not None and (now - last).total_seconds() < m.update_interval:
        remaining = m.update_interval - (now - last).total_seconds()
        click.echo(f"sync skipped: next sync due in {int(remaining)}s (use --force to override)")
        return
    hook_failed = None
    if cfg.sync.hook:
        proc = subprocess.run(cfg.sync.hook, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            hook_failed = f"fetch hook exited with {proc.returncode}: {proc.stderr.strip()[-2000:]}"
            click.echo(f"error: {hook_failed}", err=True)
    watch = list(sources) or list(cfg.sync.watch)
    if not watch:
        raise InputError("no sources given and no sync.watch configured")
    seen = set(m.synced_projects)
    fresh = []
    for src in watch:
        root = Path(src)
        if not root.is_dir():
            click.echo(f"warning: watched source {src} is not a directory", err=True)
            continue
        candidates = [root] if is_project(root) else sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
        for path in candidates:
            key = str(path.resolve())
            if key not in seen:
                fresh.append((path.resolve().name, path))
                seen.add(key)
    added, problems = _ingest_projects(kb, fresh)
    for p in problems:
        click.echo(f"warning: {p}", err=True)
    m.synced_projects = sorted(seen)
    m.last_sync = now.isoformat()
    kb.save_manifest()
    click.echo(f"{len(fresh)} projects ingested ({added} samples added)")
    if hook_failed:
        raise InfraError("sync hook failed; ingested what was available")


@kb.command("sample")
@click.option("--fraction", type=float, required=True, help="Share of each store to retain, in [0, 1].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dest", type=click.Path(file_okay=False), help="Snapshot directory (default: sibling of the KB).")
@click.pass_context
@_guard
def kb_sample(ctx: click.Context, fraction: float, seed: int, dest: str | None) -> None:
    """Write a staged copy of the KB retaining FRACTION of each store."""
    if not 0.0 <= fraction <= 1.0:
        raise InputError(f"--fraction must be in [0, 1], got {fraction}")
    snap = snapshot_fraction(_state(ctx).kb(), fraction, seed, dest)
    s = snap.stats()
    click.echo(str(snap.root_path))
    click.echo(f"samples={s['samples']} pairs={s['pairs']} usages={s['usages']} usages_nonempty={s['usages_nonempty']}")


@kb.command("stats")
@click.pass_context
@_guard
def kb_stats(ctx: click.Context) -> None:
    """Print store counts and the manifest summary as JSON."""
    click.echo(json.dumps(_state(ctx).kb().stats(), indent=2, sort_keys=True))


def _jsonl(path: str) -> list[dict]:
    rows = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                rows.append(json.loads(line))
            except ValueError as exc:
                raise InputError(f"{path}:{n}: invalid JSON: {exc}") from exc
    return rows


@kb.command("ingest")
@click.option("--pairs", "pairs_file", type=click.Path(dir_okay=False), help="JSONL of verified translation pairs.")
@click.option("--usages", "usages_file", type=click.Path(dir_okay=False), help="JSONL of dependency usage examples.")
@click.option("--project", "projects", multiple=True, type=click.Path(file_okay=False), help="Project to (re)ingest.")
@click.pass_context
@_guard
def kb_ingest(ctx: click.Context, pairs_file: str | None, usages_file: str | None, projects: tuple[str, ...]) -> None:
    """Manually add developer-curated knowledge."""
    if not (pairs_file or usages_file or projects):
        raise InputError("nothing to ingest: pass --pairs, --usages or --project")
    kb = _state(ctx).kb()
    if pairs_file:
        before = len(kb.pairs)
        for row in _jsonl(pairs_file):
            row.setdefault("provenance", "imported")
            kb.add_translation_pair(TranslationPair.from_dict(row))
        click.echo(f"{len(kb.pairs) - before} pairs added")
    if usages_file:
        n = kb.add_dependency_examples(DependencyUsageExample.from_dict(r) for r in _jsonl(usages_file))
        click.echo(f"{n} usage examples stored")
    if projects:
        found = [(Path(p).resolve().name, Path(p)) for p in projects]
        for _, p in found:
            if not p.is_dir():
                raise InfraError(f"project {p} is not a directory")
        added, problems = _ingest_projects(kb, found)
        for p in problems:
            click.echo(f"warning: {p}", err=True)
        click.echo(f"{added} samples added")


@main.command()
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--mock-llm", "mock", type=click.Path(dir_okay=False), help="Scripted responses keyed by task id and round.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Concurrent tasks.")
@click.option("--run-dir", type=click.Path(file_okay=False), help="Artifact directory (default from config).")
@click.option("--stub-verifier", is_flag=True, help="Compare against reference_code instead of running the toolchain.")
@click.pass_context
@_guard
def translate(ctx: click.Context, manifest: str, mock: str | None, jobs: int, run_dir: str | None, stub_verifier: bool) -> None:
    """Translate every task in MANIFEST, evolving the KB as tasks pass."""
    cfg = _state(ctx).config.with_overrides(run_dir=run_dir)
    if not Path(manifest).is_file():
        raise InputError(f"manifest {manifest} not found")
    tasks = load_manifest(manifest)
    llm = MockLlm.from_file(mock) if mock else HttpLlm(cfg.llm)
    if stub_verifier or cfg.verifier == "reference":
        verifier = ReferenceVerifier()
    else:
        verifier = CommandVerifier(cfg.build_timeout, cfg.test_timeout)
    kb = _state(ctx).kb()
    rd = RunDirectory(cfg.run_dir)
    outcomes = run_batch(tasks, kb, llm, cfg.pipeline(), verifier, run_dir=rd, jobs=jobs, embedder=cfg.make_embedder())
    for o in outcomes:
        tail = f" ({o.diagnostic})" if o.diagnostic else ""
        click.echo(f"{o.task_id}: {o.final_status} attempts={len(o.attempts)} evolved={str(o.evolved).lower()}{tail}")
    _write_report(rd.root, cfg)
    click.echo(f"run directory: {rd.root}")


def _write_report(run_dir: Path, cfg: Config) -> str:
    records = read_outcomes(run_dir)
    if not records:
        (run_dir / "report.json").write_text(json.dumps({"n_tasks": 0}, indent=2) + "\n", encoding="utf-8")
        return "0 tasks\n"
    rep = report(records, cfg.codebleu_weights, label=run_dir.name)
    (run_dir / "report.json").write_text(rep.to_json(), encoding="utf-8")
    return format_table([rep])


@main.command()
@click.argument("target", type=click.Path())
@click.option("--tolerance", type=float, default=1e-3, show_default=True, help="RR agreement tolerance for replays.")
@click.pass_context
@_guard
def evaluate(ctx: click.Context, target: str, tolerance: float) -> None:
    """Report metrics for a run directory, or replay a JSON file of published columns."""
    path = Path(target)
    if path.is_dir():
        if not (path / "outcomes.jsonl").is_file():
            raise InputError(f"{path} has no outcomes.jsonl")
        click.echo(_write_report(path, _state(ctx).config), nl=False)
    elif path.is_file():
        try:
            rows = load_replay(path)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InputError(f"{path} is not a replay file: {exc}") from exc
        click.echo(format_replay(rows, tolerance), nl=False)
    else:
        raise InputError(f"{target} does not exist")


if __name__ == "__main__":
    main()
