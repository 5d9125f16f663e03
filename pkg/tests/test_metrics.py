import json
import math
import random
from collections import Counter
from fractions import Fraction
from itertools import combinations

import pytest

from kbtrans.metrics import (
    CodeBleuWeights,
    MetricsReport,
    TaskRecord,
    bleu,
    code_tokens,
    codebleu,
    codebleu_components,
    compilation_at_k,
    dataflow_edges,
    dataflow_match,
    dsr_at_k,
    format_table,
    load_replay,
    match_ast,
    pass_at_1,
    pass_at_k,
    repairable_ratio,
    report,
    weighted_bleu,
)
from kbtrans.metrics.execution import _pass_at_k_exact

from conftest import DATA

# -- pass@k ----------------------------------------------------------------


def _enumerate(n, c, k):
    """Share of k-subsets of n samples (first c correct) containing a correct one."""
    subsets = list(combinations(range(n), k))
    return Fraction(sum(any(i < c for i in s) for s in subsets), len(subsets))


def test_pass_at_k_matches_enumeration():
    for n in range(1, 9):
        for c in range(n + 1):
            for k in range(1, n + 1):
                assert _pass_at_k_exact(n, c, k) == _enumerate(n, c, k), (n, c, k)


@pytest.mark.parametrize("n,c,k,expected", [(1, 1, 1, 1.0), (1, 0, 1, 0.0), (10, 3, 1, 0.3), (5, 2, 2, 0.7), (4, 1, 4, 1.0)])
def test_pass_at_k_examples(n, c, k, expected):
    assert pass_at_k(n, c, k) == pytest.approx(expected, abs=1e-12)


def test_pass_at_k_monotone_in_k_and_large_n():
    for k in range(1, 10):
        assert pass_at_k(10, 2, k) <= pass_at_k(10, 2, k + 1)
    assert 0.0 < pass_at_k(5000, 1, 7) < 1.0
    assert pass_at_k(5000, 1, 7) == pytest.approx(7 / 5000)


@pytest.mark.parametrize("args", [(3, 4, 1), (3, -1, 1), (3, 1, 0), (3, 1, 4)])
def test_pass_at_k_rejects_bad_args(args):
    with pytest.raises(ValueError):
        pass_at_k(*args)


# -- execution aggregates ----------------------------------------------------


def _rec(i, compiled, first, after):
    return TaskRecord(f"t{i}", c=int(first), compiled_first=compiled, passed_first=first, passed_after_debug=after)


FOUR = [_rec(0, True, True, True), _rec(1, True, False, True), _rec(2, False, False, True), _rec(3, True, False, False)]


def test_execution_aggregates():
    assert compilation_at_k(FOUR) == 0.75
    assert pass_at_1(FOUR) == 0.25
    assert dsr_at_k(FOUR, 1) == 0.75
    assert dsr_at_k(FOUR, 0) == 0.25
    with pytest.raises(ValueError):
        compilation_at_k(FOUR, 2)
    with pytest.raises(ValueError):
        pass_at_1([])


def test_record_invariants():
    with pytest.raises(ValueError):
        TaskRecord("x", passed_first=True, compiled_first=False, passed_after_debug=True)
    with pytest.raises(ValueError):
        TaskRecord("x", passed_first=True, compiled_first=True, passed_after_debug=False)
    assert TaskRecord("x", compiled_first=True, passed_after_debug=True).passed_round == 1


@pytest.mark.parametrize("pass1,dsr1,rr", [(0.677, 0.821, 0.446), (0.611, 0.744, 0.342), (0.475, 0.568, 0.177), (0.5, 0.5, 0.0)])
def test_repairable_ratio_examples(pass1, dsr1, rr):
    assert repairable_ratio(dsr1, pass1) == pytest.approx(rr, abs=1e-3)


def test_repairable_ratio_edges():
    assert repairable_ratio(1.0, 1.0) is None
    assert repairable_ratio(1.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        repairable_ratio(0.4, 0.5)
    with pytest.raises(ValueError):
        repairable_ratio(1.2, 0.5)


def test_replay_table():
    rows = load_replay(DATA / "rr_columns.json")
    assert len(rows) == 15
    assert max(r.deviation for r in rows) <= 1e-3


# -- BLEU --------------------------------------------------------------------

CAND = "a = b + c ;"
REF = "a = b + d ;"


def test_hand_counted_bleu():
    # 6 tokens each. Matches: 1-grams 5/6, 2-grams 3/5, 3-grams 2/4, 4-grams 1/3.
    # Add-one smoothing above unigrams: 4/6, 3/5, 2/4. Equal lengths: BP = 1.
    expected = (Fraction(5, 6) * Fraction(4, 6) * Fraction(3, 5) * Fraction(2, 4))
    expected = float(expected) ** 0.25
    assert code_tokens(CAND) == ["a", "=", "b", "+", "c", ";"]
    assert bleu(CAND, REF) == pytest.approx(expected, abs=1e-6)
    assert codebleu(CAND, REF, "rust", CodeBleuWeights(1, 0, 0, 0)) == pytest.approx(expected, abs=1e-6)


def test_brevity_penalty():
    short = bleu("a = b", "a = b + c ;")
    assert short == pytest.approx(math.exp(1 - 6 / 3) * (1 * (3 / 3) * (2 / 2) * (1 / 1)) ** 0.25)
    assert bleu("", "a") == 0.0


def test_weighted_bleu_favors_keywords():
    ref = "let x = if y { 1 } else { 2 } ;"
    keyword_hit = "let q = if r { 3 } else { 4 } ;"
    assert weighted_bleu(keyword_hit, ref, "rust") > bleu(keyword_hit, ref)
    assert weighted_bleu(ref, ref, "rust") == pytest.approx(1.0)


def test_weights_validation():
    with pytest.raises(ValueError):
        CodeBleuWeights(0.5, 0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        CodeBleuWeights(-0.5, 0.5, 0.5, 0.5)
    assert CodeBleuWeights.from_value({"alpha": 1, "beta": 0, "gamma": 0, "delta": 0}).alpha == 1


# -- randomized self-similarity ---------------------------------------------


def _rust_fixture(rng: random.Random) -> str:
    params = [f"p{i}" for i in range(rng.randint(1, 3))]
    lines = [f"pub fn f{rng.randint(0, 99)}({', '.join(p + ': i64' for p in params)}) -> i64 {{"]
    names = list(params)
    for j in range(rng.randint(1, 6)):
        a, b = rng.choice(names), rng.choice(names)
        op = rng.choice(["+", "-", "*"])
        kind = rng.randint(0, 3)
        if kind == 0:
            lines.append(f"    let mut v{j} = {a} {op} {b};")
            names.append(f"v{j}")
        elif kind == 1:
            lines.append(f"    let v{j} = if {a} > {rng.randint(0, 9)} {{ {a} }} else {{ {b} {op} 1 }};")
            names.append(f"v{j}")
        elif kind == 2:
            lines.append(f"    let mut v{j} = 0;\n    for i in 0..{rng.randint(1, 5)} {{ v{j} += i * {a}; }}")
            names.append(f"v{j}")
        else:
            lines.append(f"    let v{j} = helper({a}, {b});")
            names.append(f"v{j}")
    lines.append(f"    {rng.choice(names)}\n}}")
    return "\n".join(lines) + "\n"


def _python_fixture(rng: random.Random) -> str:
    params = [f"p{i}" for i in range(rng.randint(1, 3))]
    lines = [f"def g{rng.randint(0, 99)}({', '.join(params)}):"]
    names = list(params)
    for j in range(rng.randint(1, 5)):
        a, b = rng.choice(names), rng.choice(names)
        if rng.random() < 0.5:
            lines.append(f"    v{j} = {a} {rng.choice('+-*')} {b}")
        else:
            lines.append(f"    v{j} = [x for x in range({a}) if x != {b}]")
        names.append(f"v{j}")
    lines.append(f"    return {rng.choice(names)}")
    return "\n".join(lines) + "\n"


FIXTURES = [
    (_rust_fixture(random.Random(s)), "rust") if s % 2 == 0 else (_python_fixture(random.Random(s)), "python")
    for s in range(20)
]


@pytest.mark.parametrize("code,lang", FIXTURES)
def test_self_similarity(code, lang):
    assert match_ast(code, code, lang) == 1.0
    assert codebleu(code, code, lang) == pytest.approx(1.0, abs=1e-12)


JAVA_REF = """int length(String s) {
    if (s == null) {
        return 0;
    }
    return s.length();
}
"""
JAVA_CAND = """int length(String s) {
    return s.length();
}
"""
JAVA_DISJOINT = """void loop(int[] xs) {
    for (int i = 0; i < xs.length; i++) {
        xs[i] *= 2;
    }
}
"""


def test_match_ast_null_check_is_between_bounds():
    identical = match_ast(JAVA_REF, JAVA_REF, "java")
    disjoint = match_ast(JAVA_DISJOINT, JAVA_REF, "java")
    partial = match_ast(JAVA_CAND, JAVA_REF, "java")
    assert disjoint < partial < identical


def test_match_ast_is_rename_invariant_and_unparseable_zero():
    renamed = JAVA_REF.replace("s", "t").replace("length", "size")
    assert match_ast(renamed.replace("t.size()", "t.length()"), JAVA_REF, "java") > 0.5
    assert match_ast("int f( {", JAVA_REF, "java") == 0.0


# -- dataflow ---------------------------------------------------------------


def test_dataflow_edges_and_renaming():
    a = "fn f(x: i32) -> i32 { let y = x + 1; let mut z = y; z += x; z }"
    b = "fn g(p: i32) -> i32 { let q = p + 1; let mut r = q; r += p; r }"
    edges = dataflow_edges(a, "rust")
    assert edges == dataflow_edges(b, "rust")
    assert edges[("v1", "v0")] == 1 and edges[("v2", "v2")] == 1 and edges[("v2", "v0")] == 1
    assert dataflow_match(b, a, "rust") == 1.0


def test_dataflow_zero_edges():
    assert dataflow_match("fn f() {}", "fn g() {}", "rust") == 1.0
    assert dataflow_match("fn f() { let a = 1; }", "fn g() {}", "rust") is None
    comp = codebleu_components("fn f() { let a = 1; }", "fn g() {}", "rust")
    assert comp.dataflow_match is None
    assert comp.score == pytest.approx((comp.bleu + comp.weighted_bleu + comp.match_ast) / 3)
    assert codebleu("fn f() { let a = 1; }", "fn g() {}", "rust", CodeBleuWeights(0, 0, 0, 1)) == 0.0


def test_dataflow_swapped_sources_partial():
    ref = "def f(a, b):\n    c = a\n    d = b\n    return c + d\n"
    swapped = "def f(a, b):\n    c = b\n    d = a\n    return c + d\n"
    m = dataflow_match(swapped, ref, "python")
    assert 0.0 < m < 1.0


# -- report -----------------------------------------------------------------


def test_report_single_all_pass():
    code = "fn f() -> i32 { 1 }\n"
    r = report([TaskRecord("a", c=1, compiled_first=True, passed_first=True, passed_after_debug=True, candidate_code=code, reference_code=code)])
    assert r.repairable_ratio is None and r.codebleu == pytest.approx(1.0)
    assert "n/a" in format_table([r])


def test_report_two_records_hand_computed():
    recs = [
        TaskRecord("a", c=0, compiled_first=True, passed_first=False, passed_after_debug=True),
        TaskRecord("b", c=0, compiled_first=False, passed_first=False, passed_after_debug=False),
    ]
    r = report(recs, label="x")
    assert (r.compilation_at_1, r.pass_at_1, r.dsr_at_1, r.repairable_ratio) == (0.5, 0.0, 0.5, 0.5)
    assert r.codebleu is None and r.match_ast is None
    assert json.loads(r.to_json())["dsr_at_1"] == 0.5
    with pytest.raises(ValueError):
        report([])


def test_corpus_scores_are_task_means():
    a, b = "fn f() -> i32 { 1 }\n", "fn g(x: i32) -> i32 { let y = x * 2; y + 1 }\n"
    recs = [
        TaskRecord("a", candidate_code=a, reference_code=a),
        TaskRecord("b", candidate_code=a, reference_code=b),
    ]
    r = report(recs)
    assert r.codebleu == pytest.approx((codebleu(a, a, "rust") + codebleu(a, b, "rust")) / 2)


def test_report_rejects_inconsistent_columns():
    with pytest.raises(ValueError):
        MetricsReport(0.5, 0.6, 0.5, None, None, None, 2)
