"""Function, call-statement and execution-statement extraction over tree-sitter trees."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import PurePosixPath

import tree_sitter

from .grammars import LanguageSpec, get_language

_local = threading.local()

CLOSURE_NAME = "<closure>"


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "error" or "missing"
    byte_offset: int
    message: str


@dataclass(frozen=True)
class FunctionDef:
    """One function definition located in a source file.

    ``byte_range`` spans the whole definition, so ``text`` equals the file bytes over
    that range; ``body_text`` is the body block inside it.
    """

    name: str
    scope: str
    signature_text: str
    body_text: str
    byte_range: tuple[int, int]
    language: str
    text: str
    body_range: tuple[int, int] = (0, 0)
    _source: bytes = field(default=b"", repr=False, compare=False)

    @property
    def is_closure(self) -> bool:
        return self.name == CLOSURE_NAME


@dataclass(frozen=True)
class CallStatement:
    callee_name: str
    statement_text: str
    byte_offset: int
    enclosing_function: str


@dataclass
class ParsedFile:
    language: str
    functions: list[FunctionDef]
    diagnostics: list[Diagnostic]


def parse_tree(source: str | bytes, language: str | LanguageSpec) -> tree_sitter.Tree:
    spec = language if isinstance(language, LanguageSpec) else get_language(language)
    data = source.encode("utf-8") if isinstance(source, str) else source
    parsers = getattr(_local, "parsers", None)
    if parsers is None:
        parsers = _local.parsers = {}
    parser = parsers.get(spec.name)
    if parser is None:
        parser = parsers[spec.name] = spec.new_parser()
    return parser.parse(data)


def node_text(node: tree_sitter.Node, source: bytes) -> str:
    return source[node.start_byte : node.end_byte].decode("utf-8", errors="replace")


def collect_diagnostics(root: tree_sitter.Node) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    if not root.has_error:
        return out
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_missing:
            out.append(Diagnostic("missing", node.start_byte, f"missing {node.type}"))
        elif node.type == "ERROR":
            out.append(Diagnostic("error", node.start_byte, "syntax error"))
        if node.has_error:
            stack.extend(reversed(node.children))
    out.sort(key=lambda d: d.byte_offset)
    return out


def _function_name(node: tree_sitter.Node, spec: LanguageSpec, source: bytes) -> str:
    if node.type in spec.closure_kinds:
        return CLOSURE_NAME
    name = node.child_by_field_name("name")
    if name is not None:
        return node_text(name, source)
    # C: the name sits at the bottom of a declarator chain.
    decl = node.child_by_field_name("declarator")
    while decl is not None:
        if "identifier" in decl.type:
            return node_text(decl, source)
        inner = decl.child_by_field_name("declarator")
        if inner is None:
            for child in decl.named_children:
                if "identifier" in child.type:
                    return node_text(child, source)
            break
        decl = inner
    return ""


def _scope_name(node: tree_sitter.Node, source: bytes) -> str:
    name = node.child_by_field_name("name")
    return node_text(name, source) if name is not None else ""


def _join_scope(base: str, part: str, sep: str) -> str:
    if not part:
        return base
    return f"{base}{sep}{part}" if base else part


def parse_file(source_text: str | bytes, language: str, module_scope: str = "") -> ParsedFile:
    """Parse a whole file and return every function definition in source order."""
    spec = get_language(language)
    source = source_text.encode("utf-8") if isinstance(source_text, str) else source_text
    tree = parse_tree(source, spec)
    functions: list[FunctionDef] = []

    def visit(node: tree_sitter.Node, scope: str) -> None:
        for child in node.children:
            if child.type in spec.scope_kinds:
                visit(child, _join_scope(scope, _scope_name(child, source), spec.scope_separator))
                continue
            if child.type in spec.function_kinds or child.type in spec.closure_kinds:
                body = child.child_by_field_name("body")
                if body is not None:
                    start, end = child.start_byte, child.end_byte
                    functions.append(
                        FunctionDef(
                            name=_function_name(child, spec, source),
                            scope=scope,
                            signature_text=source[start : body.start_byte].decode("utf-8", "replace").strip(),
                            body_text=node_text(body, source),
                            byte_range=(start, end),
                            language=spec.name,
                            text=source[start:end].decode("utf-8", "replace"),
                            body_range=(body.start_byte, body.end_byte),
                            _source=source,
                        )
                    )
            visit(child, scope)

    visit(tree.root_node, module_scope)
    return ParsedFile(spec.name, functions, collect_diagnostics(tree.root_node))


def parse_functions(source_text: str | bytes, language: str, module_scope: str = "") -> list[FunctionDef]:
    return parse_file(source_text, language, module_scope).functions


def _function_node(fn: FunctionDef, spec: LanguageSpec) -> tuple[tree_sitter.Node, bytes, int]:
    """Locate ``fn`` in a fresh tree; returns (node, source, offset base)."""
    if fn._source:
        source, base = fn._source, 0
    else:
        source, base = fn.text.encode("utf-8"), fn.byte_range[0]
    tree = parse_tree(source, spec)
    start, end = fn.byte_range[0] - base, fn.byte_range[1] - base
    node = tree.root_node.descendant_for_byte_range(start, end)
    while node is not None and not (
        node.start_byte == start
        and node.end_byte == end
        and (node.type in spec.function_kinds or node.type in spec.closure_kinds)
    ):
        node = node.parent
    if node is None:
        # Source no longer lines up with the recorded range; reparse the text alone.
        source, base = fn.text.encode("utf-8"), fn.byte_range[0]
        tree = parse_tree(source, spec)
        node = tree.root_node
        for child in _walk(tree.root_node):
            if child.type in spec.function_kinds or child.type in spec.closure_kinds:
                node = child
                break
    return node, source, base


def _walk(node: tree_sitter.Node):
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(current.children))


def _own_nodes(fn_node: tree_sitter.Node, spec: LanguageSpec):
    """Nodes inside ``fn_node`` that do not belong to a nested definition."""
    nested = spec.function_kinds | spec.closure_kinds
    stack = list(reversed(fn_node.children))
    while stack:
        node = stack.pop()
        if node.type in nested:
            continue
        yield node
        stack.extend(reversed(node.children))


def _callee_node(call: tree_sitter.Node, spec: LanguageSpec) -> tree_sitter.Node | None:
    if call.type == "macro_invocation":
        target = call.child_by_field_name("macro")
    elif call.type == "object_creation_expression":
        target = call.child_by_field_name("type")
    elif call.type == "method_invocation":
        return call.child_by_field_name("name")
    else:
        target = call.child_by_field_name("function")
    while target is not None:
        if "identifier" in target.type and target.child_count == 0:
            return target
        nxt = None
        for fname in ("field", "attribute", "name", "function", "type"):
            nxt = target.child_by_field_name(fname)
            if nxt is not None:
                break
        if nxt is None:
            idents = [c for c in _walk(target) if "identifier" in c.type and c.child_count == 0]
            return idents[-1] if idents else None
        target = nxt
    return None


def _statement_for(call: tree_sitter.Node, fn_node: tree_sitter.Node, spec: LanguageSpec) -> tree_sitter.Node:
    stop = spec.compound_kinds | spec.block_kinds | spec.closure_kinds | spec.function_kinds
    node = call.parent
    while node is not None and node.id != fn_node.id:
        if node.type in spec.statement_kinds:
            return node
        if node.type in stop:
            break
        node = node.parent
    return call


def extract_call_statements(fn: FunctionDef) -> list[CallStatement]:
    """Every call expression in ``fn`` (excluding nested definitions), in source order.

    ``byte_offset`` is the absolute offset of the callee name, so chained calls such
    as ``a.b(c).d(e)`` get distinct, increasing offsets.
    """
    spec = get_language(fn.language)
    fn_node, source, base = _function_node(fn, spec)
    calls: list[CallStatement] = []
    for node in _own_nodes(fn_node, spec):
        if node.type not in spec.call_kinds:
            continue
        callee = _callee_node(node, spec)
        if callee is None:
            continue
        stmt = _statement_for(node, fn_node, spec)
        calls.append(
            CallStatement(
                callee_name=node_text(callee, source),
                statement_text=node_text(stmt, source),
                byte_offset=callee.start_byte + base,
                enclosing_function=fn.name,
            )
        )
    calls.sort(key=lambda c: c.byte_offset)
    return calls


def _body_statements(fn: FunctionDef, spec: LanguageSpec):
    fn_node, source, base = _function_node(fn, spec)
    body = fn_node.child_by_field_name("body")
    if body is None:
        return [], source, base
    if body.type not in spec.block_kinds:
        # Expression-bodied closures: the expression is the single statement.
        return [body], source, base
    stmts = [c for c in body.named_children if c.type not in spec.comment_kinds]
    return stmts, source, base


def extract_execution_statements(fn: FunctionDef) -> list[tuple[str, int]]:
    """Direct statement children of the function body as (text, absolute byte offset)."""
    spec = get_language(fn.language)
    stmts, source, base = _body_statements(fn, spec)
    return [(node_text(s, source), s.start_byte + base) for s in stmts]


def statement_identifiers(fn: FunctionDef) -> list[tuple[str, int, frozenset[str]]]:
    """Execution statements paired with the whole identifiers each one mentions."""
    spec = get_language(fn.language)
    stmts, source, base = _body_statements(fn, spec)
    out = []
    for s in stmts:
        names = frozenset(
            node_text(n, source) for n in _walk(s) if "identifier" in n.type and n.child_count == 0
        )
        out.append((node_text(s, source), s.start_byte + base, names))
    return out


def top_level_definitions(source_text: str | bytes, language: str) -> list[tuple[str, str, int]]:
    """Named global declarations (constants, statics, types, module variables).

    Returns (name, definition text, byte offset) for each one outside any function.
    """
    spec = get_language(language)
    source = source_text.encode("utf-8") if isinstance(source_text, str) else source_text
    tree = parse_tree(source, spec)
    nested = spec.function_kinds | spec.closure_kinds
    out: list[tuple[str, str, int]] = []

    def names_of(node: tree_sitter.Node) -> list[str]:
        name = node.child_by_field_name("name")
        if name is not None:
            return [node_text(name, source)]
        found = []
        for sub in _walk(node):
            if sub.type in nested:
                continue
            if sub.type in spec.assign_fields:
                fname = spec.assign_fields[sub.type]
                target = sub.child_by_field_name(fname) if fname else sub
                if target is not None:
                    found.extend(
                        node_text(i, source)
                        for i in _walk(target)
                        if i.type in ("identifier", "type_identifier") and i.child_count == 0
                    )
        return found

    def visit(node: tree_sitter.Node) -> None:
        for child in node.named_children:
            if child.type in nested:
                continue
            if child.type in spec.global_kinds:
                for name in names_of(child):
                    out.append((name, node_text(child, source), child.start_byte))
            if child.type in spec.scope_kinds or child.type in ("declaration_list", "class_body", "block"):
                visit(child)

    visit(tree.root_node)
    return out


def module_scope(rel_path: str, language: str, source_text: str | bytes | None = None) -> str:
    """Module / namespace path of a file relative to its project root."""
    spec = get_language(language)
    parts = list(PurePosixPath(rel_path.replace("\\", "/")).with_suffix("").parts)
    if spec.name == "rust":
        if parts and parts[0] == "src":
            parts = parts[1:]
        if parts and parts[-1] in ("lib", "main", "mod"):
            parts = parts[:-1]
        return "::".join(["crate", *parts])
    if spec.name == "python":
        if parts and parts[0] == "src":
            parts = parts[1:]
        if parts and parts[-1] == "__init__":
            parts = parts[:-1]
        return ".".join(parts)
    if spec.name == "java" and source_text is not None:
        source = source_text.encode("utf-8") if isinstance(source_text, str) else source_text
        tree = parse_tree(source, spec)
        for child in tree.root_node.named_children:
            if child.type == "package_declaration":
                for sub in child.named_children:
                    if sub.type in ("scoped_identifier", "identifier"):
                        return node_text(sub, source)
        return ".".join(parts[:-1])
    return spec.scope_separator.join(parts)
