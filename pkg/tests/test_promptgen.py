import copy

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbtrans.kbstore import CodeSample, DependencyUsageExample, TranslationPair
from kbtrans.promptgen import (
    REPAIR_SECTIONS,
    TRANSLATION_SECTIONS,
    NoContentError,
    build_repair_prompt,
    build_translation_prompt,
    extract_code,
    fence,
    truncate_tail,
)
from kbtrans.retrieval import KnowledgeBundle

from kbtrans.task import load_task

from conftest import TASKS

KNOWLEDGE = ("dependency_examples", "code_samples", "translation_pair")
TASK = load_task(TASKS / "checksum.yaml")


def full_bundle():
    return KnowledgeBundle(
        dependency_examples=[
            DependencyUsageExample("pub fn mix(acc: u32, byte: u8) -> u32", "acc = mix(acc, *b);", "crate", 5),
            DependencyUsageExample("pub const SEED: u32 = 17;", "", "crate", 0, origin="none"),
        ],
        code_samples=[CodeSample("p", "a.rs", "fn helper() -> u32 { 3 }", "rust")],
        translation_pair=TranslationPair("c", "rust", "int one(void) { return 1; }", "fn one() -> i32 { 1 }"),
    )


def test_section_order_and_directives(checksum_task):
    p = build_translation_prompt(checksum_task, full_bundle())
    starts = [p.section_map[s][0] for s in TRANSLATION_SECTIONS]
    assert starts == sorted(starts)
    assert "Do not perform a simple one-to-one translation; instead, consider the functional consistency of the code" in p.section("instructions")
    steps = p.section("steps").lower()
    assert "confirm the functionality to be implemented" in steps
    assert "enumerate all used dependencies" in steps
    assert checksum_task.source_code.strip() in p.section("source_function")
    assert checksum_task.target_signature in p.section("target_signature")


def test_empty_bundle_marks_unavailable(checksum_task):
    p = build_translation_prompt(checksum_task, KnowledgeBundle())
    for s in KNOWLEDGE:
        assert "none available" in p.section(s).lower()


def test_dependency_and_usage_verbatim(checksum_task):
    p = build_translation_prompt(checksum_task, full_bundle())
    sec = p.section("dependency_examples")
    assert "pub fn mix(acc: u32, byte: u8) -> u32" in sec
    assert "acc = mix(acc, *b);" in sec
    assert "usage: none available" in sec.lower()


def test_deterministic_and_pure(checksum_task):
    bundle = full_bundle()
    snapshot = copy.deepcopy(bundle)
    a = build_translation_prompt(checksum_task, bundle)
    b = build_translation_prompt(checksum_task, bundle)
    assert a.text == b.text
    assert bundle == snapshot


def test_each_element_in_one_section(checksum_task):
    p = build_translation_prompt(checksum_task, full_bundle())
    for needle in ("fn helper() -> u32 { 3 }", "int one(void) { return 1; }", "acc = mix(acc, *b);"):
        assert sum(needle in p.section(s) for s in KNOWLEDGE) == 1


def test_fence_survives_backticks():
    f = fence("let s = \"```\";", "rust")
    assert f.startswith("````rust\n")
    assert extract_code("answer\n" + f, "rust") == "let s = \"```\";"


def test_repair_prompt_contents(checksum_task):
    err = "error[E0425]: cannot find value `acc` in this scope\n --> src/checksum.rs:9:5"
    p = build_repair_prompt(checksum_task, "fn broken() {", err)
    assert list(p.section_map) == [s for s in REPAIR_SECTIONS if s != "knowledge"]
    assert err in p.text
    assert "fn broken() {" in p.section("failed_code")
    assert checksum_task.target_signature in p.section("target_signature")
    assert "Compilation error" in p.section("error")
    assert "corrected complete function" in p.section("instructions").lower()


def test_repair_functional_failure_label(checksum_task):
    p = build_repair_prompt(checksum_task, "fn f() {}", "test t ... FAILED", compiled=True)
    assert "Functional failure" in p.section("error")


def test_repair_bundle_attached_only_on_request(checksum_task):
    assert "knowledge" not in build_repair_prompt(checksum_task, "x", "e").section_map
    p = build_repair_prompt(checksum_task, "x", "e", bundle=full_bundle())
    assert "fn helper() -> u32 { 3 }" in p.section("knowledge")


def test_repair_rejects_empty_error(checksum_task):
    with pytest.raises(ValueError):
        build_repair_prompt(checksum_task, "x", "  \n")


def test_error_budget_keeps_tail(checksum_task):
    budget = 256
    lines = [f"line {i:04d} ................" for i in range(40)]
    text = "\n".join(lines)
    assert len(text.encode()) >= 2 * budget
    cut = truncate_tail(text, budget)
    assert cut.endswith(lines[-1])
    assert lines[0] not in cut
    assert "elided" in cut
    p = build_repair_prompt(checksum_task, "x", text, error_budget=budget)
    assert lines[-1] in p.text and lines[0] not in p.text


def test_truncate_noop_under_budget():
    assert truncate_tail("short", 100) == "short"


def test_extract_single_fence():
    assert extract_code("```rust\nfn a() {}\n```", "rust") == "fn a() {}"


def test_extract_last_of_two():
    text = "First draft:\n```rust\nfn a() {}\n```\nFinal:\n```rust\nfn b() {}\n```\n"
    assert extract_code(text, "rust") == "fn b() {}"
    assert extract_code(text, "rust", prefer="first") == "fn a() {}"


def test_extract_prefers_tagged_over_untagged():
    text = "```rust\nfn tagged() {}\n```\n```\nplain\n```\n"
    assert extract_code(text, "rust") == "fn tagged() {}"
    assert extract_code("```\nplain\n```", "rust") == "plain"
    assert extract_code("```rs\nfn x() {}\n```", "rust") == "fn x() {}"


def test_extract_fallback_and_empty():
    assert extract_code("   fn a() {}  \n", "rust") == "fn a() {}"
    with pytest.raises(NoContentError, match="no content"):
        extract_code("", "rust")


_code_chars = st.characters(blacklist_categories=("Cs",), blacklist_characters="`\r")


@settings(max_examples=150, deadline=None)
@given(st.text(_code_chars, max_size=200), st.sampled_from(["rust", "c", "java", "python"]))
def test_extract_inverts_fencing(code, lang):
    assert extract_code(f"```{lang}\n{code}\n```", lang) == code


_snippet = st.text(st.characters(min_codepoint=32, max_codepoint=126, blacklist_characters="`$"), min_size=1, max_size=60).filter(
    lambda s: s.strip() != ""
)


@settings(max_examples=60, deadline=None)
@given(
    deps=st.lists(st.tuples(_snippet, st.one_of(st.just(""), _snippet)), max_size=3),
    samples=st.lists(_snippet, max_size=2),
    pair=st.one_of(st.none(), st.tuples(_snippet, _snippet)),
)
def test_every_bundle_element_appears_verbatim(deps, samples, pair):
    bundle = KnowledgeBundle(
        dependency_examples=[DependencyUsageExample(c, u) for c, u in deps],
        code_samples=[CodeSample("p", f"{i}.rs", s, "rust") for i, s in enumerate(samples)],
        translation_pair=TranslationPair("c", "rust", *pair) if pair else None,
    )
    text = build_translation_prompt(TASK, bundle).text
    for c, u in deps:
        assert c in text and u in text
    for s in samples:
        assert s in text
    if pair:
        assert pair[0] in text and pair[1] in text
