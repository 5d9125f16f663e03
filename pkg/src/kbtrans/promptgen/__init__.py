from .extract import LANGUAGE_TAGS, LlmResponse, NoContentError, extract_code, parse_response
from .prompts import (
    DEFAULT_ERROR_BUDGET,
    REPAIR_SECTIONS,
    TEMPLATE_VERSION,
    TRANSLATION_SECTIONS,
    PromptText,
    build_repair_prompt,
    build_translation_prompt,
    fence,
    load_template,
    truncate_tail,
)

__all__ = [
    "DEFAULT_ERROR_BUDGET",
    "LANGUAGE_TAGS",
    "LlmResponse",
    "NoContentError",
    "PromptText",
    "REPAIR_SECTIONS",
    "TEMPLATE_VERSION",
    "TRANSLATION_SECTIONS",
    "build_repair_prompt",
    "build_translation_prompt",
    "extract_code",
    "fence",
    "load_template",
    "parse_response",
    "truncate_tail",
]
