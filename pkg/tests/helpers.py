"""Script and tree builders shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from seesaw.backend import Phase, ScriptEntry
from seesaw.tree import NodeKind, ProjectTree, TreeNode

FIXTURES = Path(__file__).parent / "fixtures"
LISTING = (FIXTURES / "ecommerce_tree.txt").read_text(encoding="utf-8")
BACKEND_SUBTREE = FIXTURES / "backend_subtree"


def entry(phase, text, path=None, round=None, ordinal=None, p=10, c=5, lat=0.0, rep=False):
    return ScriptEntry(
        phase=Phase(phase), response_text=text, prompt_tokens=p, completion_tokens=c,
        latency_s=lat, path=path, round=round, ordinal=ordinal, repeatable=rep,
    )


def content_for(path: str, tag: str = "") -> str:
    """Placeholder file body without relative imports."""
    return f"// {path} {tag}\nmodule.exports = {{ name: '{path}' }};\n"


def flat_tree(groups: dict[str, list[str]], root: str = "proj") -> ProjectTree:
    """Tree with one top-level directory per group and flat file lists."""
    dirs = tuple(
        TreeNode(g, NodeKind.DIRECTORY, tuple(TreeNode(f"{g}/{f}", NodeKind.FILE) for f in files))
        for g, files in groups.items()
    )
    return ProjectTree(root, TreeNode("", NodeKind.DIRECTORY, dirs))


def group_tree(n_per_group: list[int]) -> ProjectTree:
    """Groups g0, g1, ... each with main app.js and n dependencies."""
    return flat_tree({f"g{i}": ["app.js"] + [f"d{j}.js" for j in range(n)] for i, n in enumerate(n_per_group)})


def happy_entries(plan, p=10, c=5, lat=0.0, judge="True") -> list[ScriptEntry]:
    """One see, then saw + validate per dependency, every verdict ``judge``."""
    out = []
    for g in plan.groups:
        out.append(entry("see", content_for(g.main), g.main, 0, p=p, c=c, lat=lat))
        for d in g.dependencies:
            out.append(entry("saw", content_for(d), d, 0, p=p, c=c, lat=lat))
            out.append(entry("validate", judge, d, 0, p=p, c=c, lat=lat))
    return out


def standard_entries(plan, p=10, c=5, lat=0.0) -> list[ScriptEntry]:
    out = []
    for g in plan.groups:
        out.append(entry("see", content_for(g.main, "std"), g.main, 0, p=p, c=c, lat=lat))
        out += [entry("saw", content_for(d, "std"), d, 0, p=p, c=c, lat=lat) for d in g.dependencies]
    return out


def trace(backend) -> list[tuple[str, str | None, int]]:
    return [(r.phase.value, r.path, r.round) for r in backend.requests]
