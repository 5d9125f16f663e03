"""Execution-based metrics: Compilation@k, Pass@k, DSR@k and the repairable ratio."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    n: int = 1
    c: int = 0
    compiled_first: bool = False
    passed_first: bool = False
    passed_after_debug: bool = False
    candidate_code: str | None = None
    reference_code: str | None = None
    target_language: str = "rust"
    # Debug round in which the task first passed (0 = initial); derived when omitted.
    passed_round: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"{self.task_id}: n must be >= 1")
        if not 0 <= self.c <= self.n:
            raise ValueError(f"{self.task_id}: need 0 <= c <= n")
        if self.passed_first and not self.compiled_first:
            raise ValueError(f"{self.task_id}: passed_first requires compiled_first")
        if self.passed_first and not self.passed_after_debug:
            raise ValueError(f"{self.task_id}: passed_first requires passed_after_debug")
        if self.passed_round is None:
            derived = 0 if self.passed_first else (1 if self.passed_after_debug else None)
            object.__setattr__(self, "passed_round", derived)
        elif (self.passed_round == 0) != self.passed_first:
            raise ValueError(f"{self.task_id}: passed_round 0 must agree with passed_first")

    @classmethod
    def from_dict(cls, data: dict) -> "TaskRecord":
        passed_first = bool(data.get("passed_first", False))
        return cls(
            task_id=str(data["task_id"]),
            n=int(data.get("n", 1)),
            c=int(data.get("c", int(passed_first))),
            compiled_first=bool(data.get("compiled_first", passed_first)),
            passed_first=passed_first,
            passed_after_debug=bool(data.get("passed_after_debug", passed_first)),
            candidate_code=data.get("candidate_code"),
            reference_code=data.get("reference_code"),
            target_language=data.get("target_language", "rust"),
            passed_round=data.get("passed_round"),
        )


def _pass_at_k_exact(n: int, c: int, k: int) -> Fraction:
    if not (isinstance(n, int) and isinstance(c, int) and isinstance(k, int)):
        raise TypeError("n, c and k must be integers")
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got n={n}, c={c}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if n - c < k:
        return Fraction(1)
    # C(n-c, k) / C(n, k) == prod_{i=n-c+1}^{n} (1 - k/i)
    miss = Fraction(1)
    for i in range(n - c + 1, n + 1):
        miss *= Fraction(i - k, i)
    return 1 - miss


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased pass@k estimate ``1 - C(n-c, k) / C(n, k)``.

    Evaluated as a product of ratios in exact rational arithmetic, so there is
    no overflow and no cancellation for large ``n``.
    """
    return float(_pass_at_k_exact(n, c, k))


def _check_records(records: Sequence[TaskRecord]) -> None:
    if not records:
        raise ValueError("empty record set")


def compilation_at_k(records: Sequence[TaskRecord], k: int = 1) -> float:
    """Fraction of tasks whose first-round candidate compiled. Only ``k = 1`` is recorded."""
    _check_records(records)
    if k != 1:
        raise ValueError("only k = 1 is supported: one generation round is recorded per task")
    return sum(r.compiled_first for r in records) / len(records)


def pass_at_1(records: Sequence[TaskRecord]) -> float:
    _check_records(records)
    return sum(pass_at_k(r.n, r.c, 1) for r in records) / len(records)


def dsr_at_k(records: Sequence[TaskRecord], k: int = 1) -> float:
    """Fraction of tasks passing initially or within ``k`` debug rounds."""
    _check_records(records)
    if k < 0:
        raise ValueError("k must be >= 0")
    return sum(r.passed_round is not None and r.passed_round <= k for r in records) / len(records)


def repairable_ratio(dsr1: float, pass1: float) -> float | None:
    """Share of initially failing tasks recovered by debugging.

    Returns ``None`` (not applicable) when every task passed initially.
    """
    for name, v in (("dsr1", dsr1), ("pass1", pass1)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    if pass1 > dsr1:
        raise ValueError(f"pass1 ({pass1}) exceeds dsr1 ({dsr1})")
    if pass1 == 1.0:
        return None
    return (dsr1 - pass1) / (1.0 - pass1)
