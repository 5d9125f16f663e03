"""One task end to end (retrieve, translate, verify, repair) plus KB evolution
and the batch driver."""

from __future__ import annotations

import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .._validation import check_count
from ..codeparse import parse_functions
from ..depextract import extract_from_translation, index_project
from ..kbstore import KbError, KnowledgeBase, TranslationPair
from ..promptgen import (
    DEFAULT_ERROR_BUDGET,
    LlmResponse,
    NoContentError,
    PromptText,
    build_repair_prompt,
    build_translation_prompt,
    extract_code,
)
from ..retrieval import KnowledgeBundle, KnowledgeRetriever, RetrievalConfig
from ..task import TranslationTask
from .llm import LlmError, LlmProvider
from .verify import CommandVerifier, VerificationResult, Verifier, WorkspaceError

logger = logging.getLogger(__name__)

PASSED_INITIAL = "passed_initial"
PASSED_AFTER_REPAIR = "passed_after_repair"
FAILED = "failed"


@dataclass(frozen=True)
class PipelineConfig:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    repair_rounds: int = 1
    attach_bundle_on_repair: bool = False
    error_budget: int = DEFAULT_ERROR_BUDGET
    extract_prefer: str = "last"
    evolve: bool = True

    def __post_init__(self) -> None:
        check_count("repair_rounds", self.repair_rounds)
        check_count("error_budget", self.error_budget, minimum=1)
        if self.extract_prefer not in ("first", "last"):
            raise ValueError("extract_prefer must be 'first' or 'last'")


@dataclass(frozen=True)
class TranslationAttempt:
    round: int
    prompt: PromptText
    response: LlmResponse
    candidate_code: str
    verification: VerificationResult

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "candidate_code": self.candidate_code,
            "finish_reason": self.response.finish_reason,
            **self.verification.to_dict(),
        }


@dataclass
class TranslationOutcome:
    task_id: str
    attempts: list[TranslationAttempt] = field(default_factory=list)
    final_status: str = FAILED
    evolved: bool = False
    diagnostic: str = ""
    bundle: KnowledgeBundle | None = field(default=None, compare=False, repr=False)

    @property
    def final_candidate(self) -> str | None:
        return self.attempts[-1].candidate_code if self.attempts else None

    def to_record(self, task: TranslationTask) -> dict:
        """Flat record for ``outcomes.jsonl``; also what the metrics reader consumes."""
        first = self.attempts[0].verification if self.attempts else None
        passed_round = next((a.round for a in self.attempts if a.verification.tests_passed), None)
        return {
            "task_id": self.task_id,
            "source_language": task.source_language,
            "target_language": task.target_language,
            "final_status": self.final_status,
            "evolved": self.evolved,
            "diagnostic": self.diagnostic,
            "n": 1,
            "c": int(bool(first and first.tests_passed)),
            "compiled_first": bool(first and first.compiled),
            "passed_first": bool(first and first.tests_passed),
            "passed_after_debug": self.final_status != FAILED,
            "passed_round": passed_round,
            "candidate_code": self.final_candidate,
            "reference_code": task.reference_code,
            "attempts": [a.to_dict() for a in self.attempts],
        }


def _safe_name(task_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", task_id) or "_"


def _prefix(round: int) -> str:
    return "" if round == 0 else ("repair_" if round == 1 else f"repair{round}_")


class RunDirectory:
    """Artifact layout: ``tasks/<id>/{prompt.md, response.txt, candidate.txt,
    verify.log}`` (``repair_``-prefixed for the repair round), ``outcomes.jsonl``
    and ``report.json`` at the top."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "tasks").mkdir(parents=True, exist_ok=True)

    def task_dir(self, task_id: str) -> Path:
        d = self.root / "tasks" / _safe_name(task_id)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def write_bundle(self, task_id: str, bundle: KnowledgeBundle) -> None:
        (self.task_dir(task_id) / "bundle.json").write_text(bundle.to_json() + "\n", encoding="utf-8")

    def write_attempt(self, task_id: str, attempt: TranslationAttempt) -> None:
        d, p = self.task_dir(task_id), _prefix(attempt.round)
        v = attempt.verification
        (d / f"{p}prompt.md").write_text(attempt.prompt.text, encoding="utf-8")
        (d / f"{p}response.txt").write_text(attempt.response.raw_text, encoding="utf-8")
        (d / f"{p}candidate.txt").write_text(attempt.candidate_code, encoding="utf-8")
        log = [
            f"compiled: {str(v.compiled).lower()}",
            f"tests_passed: {str(v.tests_passed).lower()}",
            f"duration: {v.duration:.3f}s",
        ]
        if v.error_text:
            log += ["error:", v.error_text]
        if v.log:
            log += ["", v.log]
        (d / f"{p}verify.log").write_text("\n".join(log) + "\n", encoding="utf-8")

    def write_diagnostic(self, task_id: str, text: str) -> None:
        with (self.task_dir(task_id) / "diagnostic.txt").open("a", encoding="utf-8") as fh:
            fh.write(text.rstrip("\n") + "\n")

    def write_outcomes(self, records: list[dict]) -> Path:
        path = self.root / "outcomes.jsonl"
        with path.open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        return path


NO_CODE = "model response contained no code"


def _attempt(
    task: TranslationTask,
    round: int,
    prompt: PromptText,
    llm: LlmProvider,
    verifier: Verifier,
    config: PipelineConfig,
) -> TranslationAttempt:
    response = llm.complete(prompt, task_id=task.task_id, round=round)
    try:
        code = extract_code(response.raw_text, task.target_language, config.extract_prefer)
    except NoContentError:
        return TranslationAttempt(round, prompt, response, "", VerificationResult(False, False, NO_CODE))
    response = LlmResponse(response.raw_text, code, response.finish_reason)
    return TranslationAttempt(round, prompt, response, code, verifier.verify(code, task))


def translate_task(
    task: TranslationTask,
    kb: KnowledgeBase,
    llm: LlmProvider,
    config: PipelineConfig | None = None,
    verifier: Verifier | None = None,
    *,
    retriever: KnowledgeRetriever | None = None,
    run_dir: RunDirectory | None = None,
    kb_lock: threading.Lock | None = None,
) -> TranslationOutcome:
    """Retrieve, prompt, verify, and repair up to ``config.repair_rounds`` times.

    Provider and workspace failures end the task as ``failed`` with a
    diagnostic instead of propagating. Evolution runs on success.
    """
    config = config or PipelineConfig()
    verifier = verifier or CommandVerifier()
    retriever = retriever or KnowledgeRetriever(kb, config.retrieval)
    lock = kb_lock or threading.Lock()
    outcome = TranslationOutcome(task.task_id)

    def diagnose(msg: str) -> TranslationOutcome:
        logger.warning("task %s: %s", task.task_id, msg)
        outcome.diagnostic = msg
        if run_dir is not None:
            run_dir.write_diagnostic(task.task_id, msg)
        return outcome

    with lock:
        bundle = retriever.assemble(task)
    outcome.bundle = bundle
    if run_dir is not None:
        run_dir.write_bundle(task.task_id, bundle)

    prompt = build_translation_prompt(task, bundle)
    for round in range(config.repair_rounds + 1):
        if round > 0:
            last = outcome.attempts[-1]
            prompt = build_repair_prompt(
                task,
                last.candidate_code,
                last.verification.error_text,
                compiled=last.verification.compiled,
                error_budget=config.error_budget,
                bundle=bundle if config.attach_bundle_on_repair else None,
            )
        try:
            attempt = _attempt(task, round, prompt, llm, verifier, config)
        except LlmError as exc:
            return diagnose(f"LLM error in round {round}: {exc}")
        except WorkspaceError as exc:
            return diagnose(f"verification setup failed in round {round}: {exc}")
        outcome.attempts.append(attempt)
        if run_dir is not None:
            run_dir.write_attempt(task.task_id, attempt)
        if attempt.verification.tests_passed:
            outcome.final_status = PASSED_INITIAL if round == 0 else PASSED_AFTER_REPAIR
            break

    if config.evolve and outcome.final_status != FAILED:
        try:
            with lock:
                outcome.evolved = evolve(kb, task, outcome, retriever=retriever)
        except (KbError, OSError) as exc:
            diagnose(f"KB evolution write failed: {exc}")
    return outcome


def evolve(
    kb: KnowledgeBase,
    task: TranslationTask,
    outcome: TranslationOutcome,
    *,
    retriever: KnowledgeRetriever | None = None,
) -> bool:
    """Store the verified pair and usage examples mined from the final candidate.

    Returns whether anything was written. Failed outcomes never touch the KB.
    """
    if outcome.final_status == FAILED or not outcome.attempts:
        return False
    final = outcome.attempts[-1]
    if not final.verification.tests_passed:
        return False
    before = (len(kb.pairs), sum(1 for u in kb.usages if u.usage_example))
    kb.add_translation_pair(
        TranslationPair(task.source_language, task.target_language, task.source_code, final.candidate_code, "evolved", True)
    )
    index = retriever.project_index(task.project_path, task.target_language) if retriever else None
    if index is None:
        try:
            index = index_project(task.project_path, task.target_language)
        except (FileNotFoundError, ValueError) as exc:
            logger.warning("task %s: cannot index project for usage mining: %s", task.task_id, exc)
    if index is not None:
        examples = []
        for fn in parse_functions(final.candidate_code, task.target_language, task.scope):
            if not fn.is_closure:
                examples.extend(extract_from_translation(fn, index))
        if examples:
            kb.add_dependency_examples(examples)
    after = (len(kb.pairs), sum(1 for u in kb.usages if u.usage_example))
    return after != before


def run_batch(
    tasks: list[TranslationTask],
    kb: KnowledgeBase,
    llm: LlmProvider,
    config: PipelineConfig | None = None,
    verifier: Verifier | None = None,
    *,
    run_dir: RunDirectory | str | Path | None = None,
    jobs: int = 1,
    embedder=None,
) -> list[TranslationOutcome]:
    """Translate ``tasks`` in order so each task sees the evolution of the ones before.

    ``jobs > 1`` runs tasks concurrently; KB reads and writes are serialized
    and a write becomes visible to tasks that retrieve after it completes.
    Outcomes are returned (and recorded) in task order. ``embedder`` defaults
    to the builtin hashing embedder.
    """
    check_count("jobs", jobs, minimum=1)
    config = config or PipelineConfig()
    if run_dir is not None and not isinstance(run_dir, RunDirectory):
        run_dir = RunDirectory(run_dir)
    retriever = KnowledgeRetriever(kb, config.retrieval, embedder)
    lock = threading.Lock()

    def one(task: TranslationTask) -> TranslationOutcome:
        try:
            return translate_task(
                task, kb, llm, config, verifier, retriever=retriever, run_dir=run_dir, kb_lock=lock
            )
        except Exception as exc:  # isolate per-task failures
            logger.exception("task %s crashed", task.task_id)
            return TranslationOutcome(task.task_id, diagnostic=f"internal error: {type(exc).__name__}: {exc}")

    if jobs == 1:
        outcomes = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, tasks))
    if run_dir is not None:
        run_dir.write_outcomes([o.to_record(t) for o, t in zip(outcomes, tasks)])
    return outcomes
