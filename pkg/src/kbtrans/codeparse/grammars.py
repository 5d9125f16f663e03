"""Grammar registry: per-language tree-sitter grammars plus the node-kind tables
the rest of the package queries."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import tree_sitter
import tree_sitter_c
import tree_sitter_java
import tree_sitter_python
import tree_sitter_rust


class UnsupportedLanguageError(ValueError):
    """Raised when no grammar is registered for a language tag."""


@dataclass(frozen=True)
class LanguageSpec:
    name: str
    grammar: Callable[[], object]
    extensions: tuple[str, ...]
    function_kinds: frozenset[str]
    call_kinds: frozenset[str]
    # Direct children of these are "statements" for execution-statement extraction.
    block_kinds: frozenset[str]
    closure_kinds: frozenset[str] = frozenset()
    # Nodes that open a nested namespace (`mod` blocks, classes).
    scope_kinds: frozenset[str] = frozenset()
    # Single statements; the nearest one of these encloses a call's usage text.
    statement_kinds: frozenset[str] = frozenset()
    # Control-flow constructs; a call inside their header is reported by itself.
    compound_kinds: frozenset[str] = frozenset()
    # Top-level declarations that define a named global (variables, constants, types).
    global_kinds: frozenset[str] = frozenset()
    # kind -> field holding the defined name(s), for data-flow analysis.
    assign_fields: dict[str, str] = field(default_factory=dict)
    parameter_kinds: frozenset[str] = frozenset()
    keywords: frozenset[str] = frozenset()
    scope_separator: str = "::"
    comment_kinds: frozenset[str] = frozenset({"comment", "line_comment", "block_comment"})

    def language(self) -> tree_sitter.Language:
        return _language(self.name)

    def new_parser(self) -> tree_sitter.Parser:
        return tree_sitter.Parser(self.language())


_RUST_KEYWORDS = frozenset(
    """as async await break const continue crate dyn else enum extern false fn for if impl in
    let loop match mod move mut pub ref return self Self static struct super trait true type
    unsafe use where while abstract become box do final macro override priv typeof unsized
    virtual yield try union""".split()
)
_C_KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern float for goto
    if inline int long register restrict return short signed sizeof static struct switch
    typedef union unsigned void volatile while _Bool _Complex _Imaginary bool true false NULL""".split()
)
_JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue default do
    double else enum extends final finally float for goto if implements import instanceof int
    interface long native new package private protected public return short static strictfp
    super switch synchronized this throw throws transient try void volatile while var record
    yield true false null""".split()
)
_PYTHON_KEYWORDS = frozenset(
    """False None True and as assert async await break class continue def del elif else
    except finally for from global if import in is lambda nonlocal not or pass raise return
    try while with yield match case self""".split()
)

_REGISTRY: dict[str, LanguageSpec] = {}
_ALIASES = {"rs": "rust", "py": "python", "h": "c"}
_LANG_CACHE: dict[str, tree_sitter.Language] = {}
_LANG_LOCK = threading.Lock()


def register_language(spec: LanguageSpec) -> None:
    _REGISTRY[spec.name] = spec


def get_language(tag: str) -> LanguageSpec:
    name = _ALIASES.get(tag.lower(), tag.lower()) if tag else tag
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnsupportedLanguageError(f"no grammar registered for language {tag!r}") from None


def registered_languages() -> list[str]:
    return sorted(_REGISTRY)


def language_for_path(path: str) -> LanguageSpec | None:
    lower = path.lower()
    for spec in _REGISTRY.values():
        if lower.endswith(spec.extensions):
            return spec
    return None


def _language(name: str) -> tree_sitter.Language:
    with _LANG_LOCK:
        if name not in _LANG_CACHE:
            _LANG_CACHE[name] = tree_sitter.Language(_REGISTRY[name].grammar())
        return _LANG_CACHE[name]


register_language(
    LanguageSpec(
        name="rust",
        grammar=tree_sitter_rust.language,
        extensions=(".rs",),
        function_kinds=frozenset({"function_item"}),
        call_kinds=frozenset({"call_expression", "macro_invocation"}),
        block_kinds=frozenset({"block"}),
        closure_kinds=frozenset({"closure_expression"}),
        scope_kinds=frozenset({"mod_item"}),
        statement_kinds=frozenset(
            {"expression_statement", "let_declaration", "return_expression", "const_item", "static_item"}
        ),
        compound_kinds=frozenset(
            {"if_expression", "while_expression", "for_expression", "loop_expression", "match_expression"}
        ),
        global_kinds=frozenset({"const_item", "static_item", "struct_item", "enum_item", "type_item"}),
        assign_fields={
            "let_declaration": "pattern",
            "assignment_expression": "left",
            "compound_assignment_expr": "left",
            "for_expression": "pattern",
        },
        parameter_kinds=frozenset({"parameter", "closure_parameters"}),
        keywords=_RUST_KEYWORDS,
    )
)
register_language(
    LanguageSpec(
        name="c",
        grammar=tree_sitter_c.language,
        extensions=(".c", ".h"),
        function_kinds=frozenset({"function_definition"}),
        call_kinds=frozenset({"call_expression"}),
        block_kinds=frozenset({"compound_statement"}),
        statement_kinds=frozenset({"expression_statement", "declaration", "return_statement"}),
        compound_kinds=frozenset(
            {"if_statement", "while_statement", "for_statement", "do_statement", "switch_statement"}
        ),
        global_kinds=frozenset({"declaration", "type_definition", "struct_specifier", "enum_specifier"}),
        assign_fields={
            "init_declarator": "declarator",
            "assignment_expression": "left",
            "update_expression": "argument",
        },
        parameter_kinds=frozenset({"parameter_declaration"}),
        keywords=_C_KEYWORDS,
        scope_separator="/",
    )
)
register_language(
    LanguageSpec(
        name="java",
        grammar=tree_sitter_java.language,
        extensions=(".java",),
        function_kinds=frozenset({"method_declaration", "constructor_declaration"}),
        call_kinds=frozenset({"method_invocation", "object_creation_expression"}),
        block_kinds=frozenset({"block", "constructor_body"}),
        closure_kinds=frozenset({"lambda_expression"}),
        scope_kinds=frozenset({"class_declaration", "interface_declaration", "enum_declaration"}),
        statement_kinds=frozenset(
            {"expression_statement", "local_variable_declaration", "return_statement", "throw_statement"}
        ),
        compound_kinds=frozenset(
            {"if_statement", "while_statement", "for_statement", "enhanced_for_statement", "do_statement",
             "switch_expression", "try_statement"}
        ),
        global_kinds=frozenset({"field_declaration"}),
        assign_fields={
            "variable_declarator": "name",
            "assignment_expression": "left",
            "update_expression": "",
            "enhanced_for_statement": "name",
        },
        parameter_kinds=frozenset({"formal_parameter", "spread_parameter"}),
        keywords=_JAVA_KEYWORDS,
        scope_separator=".",
    )
)
register_language(
    LanguageSpec(
        name="python",
        grammar=tree_sitter_python.language,
        extensions=(".py",),
        function_kinds=frozenset({"function_definition"}),
        call_kinds=frozenset({"call"}),
        block_kinds=frozenset({"block"}),
        closure_kinds=frozenset({"lambda"}),
        scope_kinds=frozenset({"class_definition"}),
        statement_kinds=frozenset(
            {"expression_statement", "return_statement", "assert_statement", "raise_statement", "delete_statement"}
        ),
        compound_kinds=frozenset(
            {"if_statement", "while_statement", "for_statement", "with_statement", "try_statement", "match_statement"}
        ),
        global_kinds=frozenset({"expression_statement", "class_definition"}),
        assign_fields={"assignment": "left", "augmented_assignment": "left", "for_statement": "left"},
        parameter_kinds=frozenset({"parameters", "lambda_parameters"}),
        keywords=_PYTHON_KEYWORDS,
        scope_separator=".",
    )
)
