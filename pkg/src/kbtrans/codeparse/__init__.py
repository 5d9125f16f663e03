from .fingerprint import DEFAULT_MIN_DEPTH, SubtreeFingerprint, ast_subtrees
from .grammars import (
    LanguageSpec,
    UnsupportedLanguageError,
    get_language,
    language_for_path,
    register_language,
    registered_languages,
)
from .parse import (
    CLOSURE_NAME,
    CallStatement,
    Diagnostic,
    FunctionDef,
    ParsedFile,
    collect_diagnostics,
    extract_call_statements,
    extract_execution_statements,
    module_scope,
    parse_file,
    parse_functions,
    parse_tree,
    statement_identifiers,
    top_level_definitions,
)

__all__ = [
    "CLOSURE_NAME",
    "CallStatement",
    "DEFAULT_MIN_DEPTH",
    "Diagnostic",
    "FunctionDef",
    "LanguageSpec",
    "ParsedFile",
    "SubtreeFingerprint",
    "UnsupportedLanguageError",
    "ast_subtrees",
    "collect_diagnostics",
    "extract_call_statements",
    "extract_execution_statements",
    "get_language",
    "language_for_path",
    "module_scope",
    "parse_file",
    "parse_functions",
    "parse_tree",
    "register_language",
    "registered_languages",
    "statement_identifiers",
    "top_level_definitions",
]
