"""Alignment checks between a main file and its dependencies.

Two layers: a static pass that resolves relative JS-family imports
against the project tree, and a model judge that answers ``True`` or
``False`` followed by a corrected main file.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from . import prompts
from ._text import first_fenced_block
from .backend import Backend, CompletionRequest, Phase
from .tree import ProjectTree
from .workspace import CodeUnit

VERDICT_SENTINEL = "(verdict)"
RESOLVE_SUFFIXES = ("", ".js", ".jsx", ".ts", ".json", "/index.js")

_IMPORT_PATTERNS = (
    re.compile(r"""\bfrom\s*(['"])(\.{1,2}/[^'"\n]*)\1"""),            # import/export ... from '...'
    re.compile(r"""\bimport\s*(['"])(\.{1,2}/[^'"\n]*)\1"""),          # import './side-effect'
    re.compile(r"""\brequire\s*\(\s*(['"])(\.{1,2}/[^'"\n]*)\1\s*\)"""),
)


class FindingKind(str, Enum):
    UNRESOLVED_IMPORT = "unresolved_import"
    VERDICT_PARSE_ERROR = "verdict_parse_error"
    JUDGE_FLAG = "judge_flag"


class VerdictSource(str, Enum):
    STATIC = "static"
    LLM = "llm"
    COMPOSITE = "composite"


class ValidationMode(str, Enum):
    STATIC_ONLY = "static_only"
    LLM_ONLY = "llm_only"
    BOTH = "both"


@dataclass(frozen=True)
class Finding:
    file: str
    kind: FindingKind
    detail: str


@dataclass(frozen=True)
class Verdict:
    aligned: bool
    modified_main: str | None = None
    source: VerdictSource = VerdictSource.LLM
    findings: tuple[Finding, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.aligned and self.modified_main is not None:
            raise ValueError("an aligned verdict cannot carry a rewrite")
        if self.source is VerdictSource.STATIC and self.modified_main is not None:
            raise ValueError("static verdicts never rewrite code")


# -- static layer ----------------------------------------------------------------

def relative_imports(source: str) -> list[str]:
    """Relative module specifiers in ``source``, in order of appearance."""
    hits: list[tuple[int, str]] = []
    for pattern in _IMPORT_PATTERNS:
        hits.extend((m.start(), m.group(2)) for m in pattern.finditer(source))
    return [spec for _, spec in sorted(hits)]


def resolve_import(importer: str, spec: str, tree: ProjectTree) -> str | None:
    """Tree path that ``spec`` imported from ``importer`` refers to, if any."""
    joined = posixpath.normpath(posixpath.join(posixpath.dirname(importer), spec))
    if joined == ".." or joined.startswith("../"):
        return None
    for suffix in RESOLVE_SUFFIXES:
        candidate = joined + suffix
        if tree.is_file(candidate):
            return candidate
    return None


def static_check(main: CodeUnit, deps: Sequence[CodeUnit], tree: ProjectTree) -> list[Finding]:
    findings = []
    for unit in (main, *deps):
        for spec in relative_imports(unit.content):
            if resolve_import(unit.path, spec, tree) is None:
                findings.append(Finding(unit.path, FindingKind.UNRESOLVED_IMPORT, spec))
    return findings


# -- judge layer -------------------------------------------------------------------

_FALSE_RE = re.compile(r"false\b[\s.,;:!-]*", re.IGNORECASE)


def parse_verdict(text: str) -> Verdict:
    """Decode a judge reply. Never raises.

    ``True`` on the first non-blank line (any case, trailing punctuation
    ignored) means aligned. A first line starting with ``False`` means
    misaligned; the rewrite is the first fenced block after it, or else
    whatever text follows the keyword. Anything else is misaligned with a
    parse-error finding.
    """
    lines = text.splitlines()
    idx = next((i for i, ln in enumerate(lines) if ln.strip()), None)
    if idx is None:
        return _unparseable(text)
    first = lines[idx].strip()
    if first.rstrip(".!,;:").strip().lower() == "true":
        return Verdict(True)
    m = _FALSE_RE.match(first)
    if not m:
        return _unparseable(text)
    rest = "\n".join([first[m.end():], *lines[idx + 1:]])
    block = first_fenced_block(rest)
    if block is None:
        block = rest.strip()
    return Verdict(False, modified_main=block if block.strip() else None)


def _unparseable(text: str) -> Verdict:
    snippet = text.strip().splitlines()[0][:80] if text.strip() else "(empty reply)"
    return Verdict(False, findings=(Finding(VERDICT_SENTINEL, FindingKind.VERDICT_PARSE_ERROR, snippet),))


def judge_prompt(main: CodeUnit, deps: Sequence[CodeUnit]) -> str:
    return prompts.render(
        "judge",
        MAIN_PATH=main.path,
        MAIN_CODE=main.content,
        DEPS_BLOCK=prompts.files_block((d.path, d.content) for d in deps),
    )


def llm_validate(
    main: CodeUnit,
    deps: Sequence[CodeUnit],
    backend: Backend,
    round: int = 0,
    path: str | None = None,
) -> Verdict:
    """One judge call tagged ``validate``; ``path`` defaults to the main file."""
    result = backend.complete(CompletionRequest(
        system_text=prompts.system_text(),
        user_text=judge_prompt(main, deps),
        phase=Phase.VALIDATE,
        path=path or main.path,
        round=round,
    ))
    return parse_verdict(result.text)


def validate(
    main: CodeUnit,
    deps: Sequence[CodeUnit],
    tree: ProjectTree,
    backend: Backend | None,
    mode: ValidationMode | str = ValidationMode.BOTH,
    round: int = 0,
    path: str | None = None,
) -> Verdict:
    mode = ValidationMode(mode)
    if mode is ValidationMode.LLM_ONLY:
        return llm_validate(main, deps, backend, round, path)

    findings = tuple(static_check(main, deps, tree))
    if findings or mode is ValidationMode.STATIC_ONLY:
        return Verdict(not findings, source=VerdictSource.STATIC, findings=findings)

    verdict = llm_validate(main, deps, backend, round, path)
    return Verdict(verdict.aligned, verdict.modified_main, VerdictSource.COMPOSITE, verdict.findings)
