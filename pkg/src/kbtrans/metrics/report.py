"""Aggregate metrics over task records, the text table and replay of published columns."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .codebleu import CodeBleuWeights, codebleu_components
from .execution import TaskRecord, compilation_at_k, dsr_at_k, pass_at_1, repairable_ratio

COLUMNS = ("Compilation@1", "Pass@1", "DSR@1", "RR", "CodeBLEU", "Match_ast")


@dataclass
class MetricsReport:
    compilation_at_1: float
    pass_at_1: float
    dsr_at_1: float
    repairable_ratio: float | None
    codebleu: float | None
    match_ast: float | None
    n_tasks: int
    per_task: list[dict] = field(default_factory=list)
    label: str = ""

    def __post_init__(self) -> None:
        if self.dsr_at_1 + 1e-12 < self.pass_at_1:
            raise ValueError("dsr_at_1 must be >= pass_at_1")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_tasks": self.n_tasks,
            "compilation_at_1": self.compilation_at_1,
            "pass_at_1": self.pass_at_1,
            "dsr_at_1": self.dsr_at_1,
            "repairable_ratio": self.repairable_ratio,
            "codebleu": self.codebleu,
            "match_ast": self.match_ast,
            "per_task": self.per_task,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def row(self) -> list[str]:
        return [
            _pct(self.compilation_at_1),
            _pct(self.pass_at_1),
            _pct(self.dsr_at_1),
            _pct(self.repairable_ratio),
            _num(self.codebleu),
            _num(self.match_ast),
        ]


def _pct(v: float | None) -> str:
    return "n/a" if v is None else f"{100 * v:.1f}%"


def _num(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.3f}"


def format_table(reports: Sequence[MetricsReport]) -> str:
    """Aligned text table, one row per report."""
    header = ["Run", *COLUMNS]
    rows = [[r.label or "-", *r.row()] for r in reports]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(line, widths))) for line in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report(records: Sequence[TaskRecord], weights: CodeBleuWeights | None = None, label: str = "") -> MetricsReport:
    """All metrics over ``records``; CodeBLEU and Match_ast are per-task means over
    tasks that have both a candidate and a reference."""
    if not records:
        raise ValueError("empty record set")
    weights = CodeBleuWeights.from_value(weights)
    per_task, cb, ma = [], [], []
    for r in records:
        entry = {
            "task_id": r.task_id,
            "compiled_first": r.compiled_first,
            "passed_first": r.passed_first,
            "passed_after_debug": r.passed_after_debug,
            "codebleu": None,
            "match_ast": None,
        }
        if r.candidate_code is not None and r.reference_code is not None:
            comp = codebleu_components(r.candidate_code, r.reference_code, r.target_language, weights)
            entry["codebleu"], entry["match_ast"] = comp.score, comp.match_ast
            cb.append(comp.score)
            ma.append(comp.match_ast)
        per_task.append(entry)
    p1 = pass_at_1(records)
    d1 = dsr_at_k(records, 1)
    return MetricsReport(
        compilation_at_1=compilation_at_k(records, 1),
        pass_at_1=p1,
        dsr_at_1=d1,
        repairable_ratio=repairable_ratio(d1, p1),
        codebleu=sum(cb) / len(cb) if cb else None,
        match_ast=sum(ma) / len(ma) if ma else None,
        n_tasks=len(records),
        per_task=per_task,
        label=label,
    )


def read_outcomes(run_dir: str | Path) -> list[TaskRecord]:
    path = Path(run_dir) / "outcomes.jsonl"
    if not path.is_file():
        raise FileNotFoundError(f"no outcomes.jsonl in {run_dir}")
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(TaskRecord.from_dict(json.loads(line)))
    return records


@dataclass(frozen=True)
class ReplayRow:
    label: str
    pass_at_1: float
    dsr_at_1: float
    published_rr: float | None
    computed_rr: float | None

    @property
    def deviation(self) -> float | None:
        if self.published_rr is None or self.computed_rr is None:
            return None
        return abs(self.published_rr - self.computed_rr)


def replay(rows: Sequence[dict]) -> list[ReplayRow]:
    """Recompute RR from published (Pass@1, DSR@1) columns.

    Each row is ``{"label", "pass_at_1", "dsr_at_1", "rr"?}`` with values in [0, 1].
    """
    out = []
    for row in rows:
        p, d = float(row["pass_at_1"]), float(row["dsr_at_1"])
        rr = row.get("rr")
        out.append(ReplayRow(str(row.get("label", "")), p, d, None if rr is None else float(rr), repairable_ratio(d, p)))
    return out


def load_replay(path: str | Path) -> list[ReplayRow]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return replay(data["rows"] if isinstance(data, dict) else data)


def format_replay(rows: Sequence[ReplayRow], tolerance: float = 1e-3) -> str:
    header = ["Run", "Pass@1", "DSR@1", "RR (given)", "RR (computed)", "ok"]
    body = []
    for r in rows:
        dev = r.deviation
        body.append(
            [r.label, _pct(r.pass_at_1), _pct(r.dsr_at_1), _pct(r.published_rr), _pct(r.computed_rr),
             "-" if dev is None else ("yes" if dev <= tolerance else "NO")]
        )
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(line, widths))) for line in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
