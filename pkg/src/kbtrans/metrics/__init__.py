from .codebleu import (
    KEYWORD_WEIGHT,
    CodeBleuScore,
    CodeBleuWeights,
    bleu,
    code_tokens,
    codebleu,
    codebleu_components,
    dataflow_edges,
    dataflow_match,
    match_ast,
    weighted_bleu,
)
from .execution import TaskRecord, compilation_at_k, dsr_at_k, pass_at_1, pass_at_k, repairable_ratio
from .report import (
    COLUMNS,
    MetricsReport,
    ReplayRow,
    format_replay,
    format_table,
    load_replay,
    read_outcomes,
    replay,
    report,
)

__all__ = [
    "COLUMNS",
    "KEYWORD_WEIGHT",
    "CodeBleuScore",
    "CodeBleuWeights",
    "MetricsReport",
    "ReplayRow",
    "TaskRecord",
    "bleu",
    "code_tokens",
    "codebleu",
    "codebleu_components",
    "compilation_at_k",
    "dataflow_edges",
    "dataflow_match",
    "dsr_at_k",
    "format_replay",
    "format_table",
    "load_replay",
    "match_ast",
    "pass_at_1",
    "pass_at_k",
    "read_outcomes",
    "repairable_ratio",
    "replay",
    "report",
    "weighted_bleu",
]
