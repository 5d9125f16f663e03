from ..task import InsertionPoint, TaskError, TranslationTask, load_manifest, load_task
from .llm import (
    API_KEY_ENV,
    HttpLlm,
    LlmBudgetExhausted,
    LlmError,
    LlmParams,
    LlmProtocolError,
    LlmProvider,
    LlmTimeoutError,
    LlmTransportError,
    MockLlm,
    complete,
)
from .pipeline import (
    FAILED,
    PASSED_AFTER_REPAIR,
    PASSED_INITIAL,
    PipelineConfig,
    RunDirectory,
    TranslationAttempt,
    TranslationOutcome,
    evolve,
    run_batch,
    translate_task,
)
from .verify import (
    CallableVerifier,
    CommandVerifier,
    ReferenceVerifier,
    VerificationResult,
    Verifier,
    WorkspaceError,
    splice,
)

__all__ = [
    "API_KEY_ENV",
    "CallableVerifier",
    "CommandVerifier",
    "FAILED",
    "HttpLlm",
    "InsertionPoint",
    "LlmBudgetExhausted",
    "LlmError",
    "LlmParams",
    "LlmProtocolError",
    "LlmProvider",
    "LlmTimeoutError",
    "LlmTransportError",
    "MockLlm",
    "PASSED_AFTER_REPAIR",
    "PASSED_INITIAL",
    "PipelineConfig",
    "ReferenceVerifier",
    "RunDirectory",
    "TaskError",
    "TranslationAttempt",
    "TranslationOutcome",
    "TranslationTask",
    "VerificationResult",
    "Verifier",
    "WorkspaceError",
    "complete",
    "evolve",
    "load_manifest",
    "load_task",
    "run_batch",
    "splice",
    "translate_task",
]
