"""Versioned file contents for a run, mirrored to disk, plus the
inter-round distance used for convergence checks."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import PathSetMismatch, UnknownPath
from .tree import MainPlan, ProjectTree


class UnitPhase(str, Enum):
    SEE = "see"
    SAW = "saw"
    VALIDATOR_REWRITE = "validator_rewrite"
    STANDARD = "standard"


@dataclass(frozen=True)
class CodeUnit:
    path: str
    role: str
    content: str = ""
    revision: int = 0
    last_phase: UnitPhase | None = None


@dataclass(frozen=True)
class WorkspaceSnapshot:
    round_index: int
    units: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", MappingProxyType(dict(self.units)))


def _levenshtein(a: list[str], b: list[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


# ASCII whitespace only; str.split() would also break on Unicode spaces
_TOKEN_RE = re.compile(r"[^ \t\n\r\x0b\x0c]+")


def tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def distance(a: str, b: str) -> float:
    """Token-level Levenshtein distance normalised to [0, 1].

    Divides the edit distance over whitespace-delimited tokens by the longer
    token count. Two empty texts are at distance 0.
    """
    ta, tb = tokens(a), tokens(b)
    if ta == tb:
        return 0.0
    return _levenshtein(ta, tb) / max(len(ta), len(tb))


def aggregate_delta(prev: WorkspaceSnapshot, nxt: WorkspaceSnapshot) -> float:
    """Sum of per-file distances between two snapshots of the same files."""
    if set(prev.units) != set(nxt.units):
        raise PathSetMismatch(
            f"snapshots differ in paths: {sorted(set(prev.units) ^ set(nxt.units))}"
        )
    return sum(distance(prev.units[p], nxt.units[p]) for p in prev.units)


class Workspace:
    """Current :class:`CodeUnit` for every file of a plan.

    When ``out_dir`` is set each write is mirrored to
    ``out_dir/<tree path>`` as UTF-8.
    """

    def __init__(self, tree: ProjectTree, plan: MainPlan, out_dir: str | Path | None = None):
        self.tree = tree
        self.plan = plan
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.units: dict[str, CodeUnit] = {}
        for path in tree.files():
            role = plan.role_of(path)
            if role is not None:
                self.units[path] = CodeUnit(path, role)

    def get(self, path: str) -> CodeUnit:
        try:
            return self.units[path]
        except KeyError:
            raise UnknownPath(f"{path!r} is not a file in the plan") from None

    def content(self, path: str) -> str:
        return self.get(path).content

    def put_unit(self, path: str, content: str, phase: UnitPhase | str) -> CodeUnit:
        old = self.get(path)
        unit = CodeUnit(path, old.role, content, old.revision + 1, UnitPhase(phase))
        if self.out_dir is not None:
            target = self.out_dir / path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(content.encode("utf-8"))
        self.units[path] = unit
        return unit

    def snapshot(self, paths: Iterable[str], round_index: int) -> WorkspaceSnapshot:
        return WorkspaceSnapshot(round_index, {p: self.get(p).content for p in paths})

    def generated(self, paths: Iterable[str]) -> list[CodeUnit]:
        """Units among ``paths`` that have been written at least once."""
        return [u for u in (self.get(p) for p in paths) if u.revision > 0]
