"""Markdown prompt construction for translation and repair rounds."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template

from ..retrieval.bundle import KnowledgeBundle
from ..task import TranslationTask

TEMPLATE_VERSION = "v1"
TRANSLATION_SECTIONS = (
    "instructions",
    "steps",
    "dependency_examples",
    "code_samples",
    "translation_pair",
    "source_function",
    "target_signature",
    "target_dependencies",
)
REPAIR_SECTIONS = ("instructions", "failed_code", "error", "target_signature", "target_dependencies", "knowledge")
DEFAULT_ERROR_BUDGET = 8 * 1024

FENCE_TAGS = {"rust": "rust", "c": "c", "java": "java", "python": "python"}
_MARKER_RE = re.compile(r"^<!-- (section|item): (\w+) -->\n", re.MULTILINE)


@dataclass(frozen=True)
class PromptText:
    text: str
    section_map: dict[str, tuple[int, int]] = field(default_factory=dict)

    def section(self, name: str) -> str:
        start, end = self.section_map[name]
        return self.text[start:end]

    def __str__(self) -> str:
        return self.text


@lru_cache(maxsize=None)
def load_template(name: str, version: str = TEMPLATE_VERSION) -> dict[str, dict[str, Template]]:
    """Parse ``templates/<name>.<version>.md`` into section and item templates."""
    raw = resources.files("kbtrans.promptgen").joinpath("templates", f"{name}.{version}.md").read_text("utf-8")
    parts: dict[str, dict[str, Template]] = {"section": {}, "item": {}}
    matches = list(_MARKER_RE.finditer(raw))
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
        parts[m.group(1)][m.group(2)] = Template(raw[m.end() : end])
    return parts


def fence(code: str, language: str) -> str:
    """Fenced block whose fence is longer than any backtick run inside ``code``."""
    longest = max((len(r) for r in re.findall(r"`+", code)), default=0)
    ticks = "`" * max(3, longest + 1)
    body = code if code.endswith("\n") else code + "\n"
    return f"{ticks}{FENCE_TAGS.get(language, language)}\n{body}{ticks}"


def _compose(template: dict, order: tuple[str, ...], bodies: dict[str, str], common: dict) -> PromptText:
    chunks: list[str] = []
    section_map: dict[str, tuple[int, int]] = {}
    pos = 0
    for name in order:
        if name not in bodies:
            continue
        text = template["section"][name].substitute(common, body=bodies[name])
        section_map[name] = (pos, pos + len(text))
        chunks.append(text)
        pos += len(text)
    return PromptText("".join(chunks), section_map)


def _common(task: TranslationTask) -> dict:
    return {
        "source_language": task.source_language,
        "target_language": task.target_language,
        "target_fence": FENCE_TAGS.get(task.target_language, task.target_language),
    }


def _dependency_list(task: TranslationTask, items: dict[str, Template]) -> str:
    if not task.dependencies:
        return items["none"].substitute()
    return "\n".join(fence(d.code, task.target_language) for d in task.dependencies) + "\n"


def build_translation_prompt(task: TranslationTask, bundle: KnowledgeBundle, version: str = TEMPLATE_VERSION) -> PromptText:
    tpl = load_template("translate", version)
    items = tpl["item"]
    common = _common(task)
    tgt = task.target_language
    none = items["none"].substitute()

    deps = []
    for i, ex in enumerate(bundle.dependency_examples, 1):
        if ex.usage_example:
            deps.append(
                items["dependency"].substitute(
                    index=i, code=fence(ex.dependency_code, tgt), usage=fence(ex.usage_example, tgt)
                )
            )
        else:
            deps.append(items["dependency_unused"].substitute(index=i, code=fence(ex.dependency_code, tgt)))
    samples = [
        items["sample"].substitute(index=i, code=fence(s.function_text, tgt))
        for i, s in enumerate(bundle.code_samples, 1)
    ]
    pair = bundle.translation_pair
    bodies = {
        "instructions": "",
        "steps": "",
        "dependency_examples": "".join(deps) if deps else none,
        "code_samples": "".join(samples) if samples else none,
        "translation_pair": (
            items["pair"].substitute(
                common,
                source=fence(pair.source_function, pair.source_language),
                target=fence(pair.target_function, pair.target_language),
            )
            if pair is not None
            else none
        ),
        "source_function": fence(task.source_code, task.source_language) + "\n",
        "target_signature": fence(task.target_signature, tgt) + "\n",
        "target_dependencies": _dependency_list(task, items),
    }
    return _compose(tpl, TRANSLATION_SECTIONS, bodies, common)


def truncate_tail(text: str, budget: int = DEFAULT_ERROR_BUDGET) -> str:
    """Keep the last ``budget`` bytes of ``text``, noting how much was elided."""
    data = text.encode("utf-8")
    if len(data) <= budget:
        return text
    tail = data[-budget:].decode("utf-8", errors="ignore")
    return f"[... {len(data) - len(tail.encode('utf-8'))} bytes elided ...]\n{tail}"


def build_repair_prompt(
    task: TranslationTask,
    failed_code: str,
    error_text: str,
    *,
    compiled: bool = False,
    error_budget: int = DEFAULT_ERROR_BUDGET,
    bundle: KnowledgeBundle | None = None,
    version: str = TEMPLATE_VERSION,
) -> PromptText:
    """Repair prompt for a failed candidate.

    ``compiled`` distinguishes a functional (test) failure from a build failure.
    The knowledge bundle is only attached when passed explicitly.
    """
    if not error_text.strip():
        raise ValueError("error_text must be non-empty")
    tpl = load_template("repair", version)
    common = _common(task)
    if compiled:
        common.update(failure_summary="compiles but fails its tests", failure_label="Functional failure: test output")
    else:
        common.update(failure_summary="fails to compile", failure_label="Compilation error: compiler output")
    bodies = {
        "instructions": "",
        "failed_code": fence(failed_code, task.target_language) + "\n",
        "error": fence(truncate_tail(error_text, error_budget), "text") + "\n",
        "target_signature": fence(task.target_signature, task.target_language) + "\n",
        "target_dependencies": _dependency_list(task, load_template("translate", version)["item"]),
    }
    if bundle is not None:
        knowledge = build_translation_prompt(task, bundle, version)
        bodies["knowledge"] = "".join(
            knowledge.section(s) for s in ("dependency_examples", "code_samples", "translation_pair")
        )
    return _compose(tpl, REPAIR_SECTIONS, bodies, common)
