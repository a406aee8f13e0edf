"""Project tree model, ASCII listing parser/renderer and main-file planning.

Listing format::

    project/
    |-- backend
    |   |-- app.js
    |   |-- routes
    |       |-- index.js
    |-- README.md

Each level below the root adds a four-column prefix unit, ``"|   "`` when
the ancestor at that level still has siblings to come and four spaces
otherwise. A node is a directory when deeper entries follow it or when its
name ends with ``/``.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass, field
from enum import Enum
from fnmatch import fnmatchcase
from functools import cached_property
from typing import Iterator, Mapping

from ._text import strip_fence
from .backend import CompletionRequest, Phase
from .errors import EmptyPlan, InvalidOverride, MalformedTree

TREE_PROMPT = """Generate a project structure for a web-based
e-commerce platform. The project should include directories for:
1. Frontend (using React.js).
2. Backend (using Node.js and Express).
3. Database (using MongoDB).
4. Authentication system.
5. Unit and integration tests.
6. Deployment scripts (CI/CD).
For each directory, list the specific files required, including components, routes,
models, controllers, test files, and configuration files"""

TREE_SYSTEM = (
    "You are a software architect. Answer with the project tree only, as a "
    "plain ASCII listing: the root directory on the first line followed by "
    "one '|-- name' entry per line, indented by four columns per level."
)

MAIN_PRIORITY = ("app.*", "index.*", "main.*")
ROOT_GROUP = "."

_ROOT_RE = re.compile(r"^[^\s|`├└│]+/?$")
_ENTRY_RE = re.compile(
    r"^(?P<prefix>(?:[|│ ] {3})*)(?P<marker>\|-- |`-- |\+-- |├── |└── )(?P<name>.*)$"
)
_COMMENT_RE = re.compile(r"\s+#.*$")


class NodeKind(str, Enum):
    DIRECTORY = "directory"
    FILE = "file"


@dataclass(frozen=True)
class TreeNode:
    path: str
    kind: NodeKind
    children: tuple[TreeNode, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is NodeKind.FILE and self.children:
            raise MalformedTree(f"file {self.path!r} cannot have children")

    @property
    def name(self) -> str:
        return self.path.rsplit("/", 1)[-1]

    @property
    def is_dir(self) -> bool:
        return self.kind is NodeKind.DIRECTORY

    def walk(self) -> Iterator[TreeNode]:
        """Pre-order traversal, self first."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ProjectTree:
    """A parsed project tree.

    The root node has the empty path; every other path is relative to it,
    so ``backend/app.js`` rather than ``project/backend/app.js``.
    """

    name: str
    root: TreeNode
    file_count: int = field(init=False)
    dir_count: int = field(init=False)

    def __post_init__(self) -> None:
        nodes = list(self.root.walk())
        files = sum(1 for n in nodes if n.kind is NodeKind.FILE)
        object.__setattr__(self, "file_count", files)
        object.__setattr__(self, "dir_count", len(nodes) - files - 1)

    @cached_property
    def _index(self) -> dict[str, TreeNode]:
        return {n.path: n for n in self.root.walk()}

    def nodes(self) -> list[TreeNode]:
        return list(self.root.walk())

    def files(self) -> list[str]:
        """File paths in listing order."""
        return [n.path for n in self.root.walk() if n.kind is NodeKind.FILE]

    def directories(self) -> list[str]:
        return [n.path for n in self.root.walk() if n.is_dir and n is not self.root]

    def node(self, path: str) -> TreeNode | None:
        return self._index.get(path)

    def is_file(self, path: str) -> bool:
        n = self._index.get(path)
        return n is not None and n.kind is NodeKind.FILE

    def __contains__(self, path: object) -> bool:
        return path in self._index


@dataclass
class _Draft:
    name: str
    line: int
    explicit_dir: bool
    children: list[_Draft] = field(default_factory=list)

    def freeze(self, parent_path: str) -> TreeNode:
        path = f"{parent_path}/{self.name}" if parent_path else self.name
        kids = tuple(c.freeze(path) for c in self.children)
        is_dir = self.explicit_dir or bool(kids)
        return TreeNode(path, NodeKind.DIRECTORY if is_dir else NodeKind.FILE, kids)


def parse_tree(text: str) -> ProjectTree:
    """Parse an ASCII listing into a :class:`ProjectTree`.

    One surrounding code fence is stripped first. Raises
    :class:`MalformedTree` on indentation jumps, duplicate siblings, and
    lines that are not tree entries.
    """
    body = strip_fence(text)
    lines = [(i, ln.rstrip()) for i, ln in enumerate(body.splitlines(), 1)]
    lines = [(i, ln) for i, ln in lines if ln.strip()]
    if not lines:
        raise MalformedTree("no tree lines found")

    root_line, root_text = lines[0]
    root_text = _COMMENT_RE.sub("", root_text.strip())
    if not _ROOT_RE.match(root_text):
        raise MalformedTree(f"expected a root entry, got {root_text!r}", root_line)
    root_name = root_text.rstrip("/")
    root = _Draft(root_name, root_line, explicit_dir=True)

    stack: list[_Draft] = [root]  # stack[d] is the open node at depth d
    for lineno, raw in lines[1:]:
        m = _ENTRY_RE.match(raw)
        if not m:
            raise MalformedTree(f"not a tree entry: {raw.strip()!r}", lineno)
        depth = len(m.group("prefix")) // 4 + 1
        if depth > len(stack):
            raise MalformedTree("indentation skips a level", lineno)
        name = _COMMENT_RE.sub("", m.group("name")).strip()
        explicit_dir = name.endswith("/")
        name = name.rstrip("/")
        if not name or "/" in name or name in (".", ".."):
            raise MalformedTree(f"invalid entry name {m.group('name')!r}", lineno)

        del stack[depth:]
        parent = stack[-1]
        if any(c.name == name for c in parent.children):
            raise MalformedTree(f"duplicate entry {name!r} under {parent.name!r}", lineno)
        node = _Draft(name, lineno, explicit_dir)
        parent.children.append(node)
        stack.append(node)

    frozen = TreeNode("", NodeKind.DIRECTORY, tuple(c.freeze("") for c in root.children))
    return ProjectTree(root_name, frozen)


def render_tree(tree: ProjectTree) -> str:
    """Render ``tree`` in the listing format; inverse of :func:`parse_tree`.

    Childless directories get a trailing ``/`` so they survive a re-parse.
    """
    lines = [f"{tree.name}/"]

    def emit(node: TreeNode, prefix: str) -> None:
        last = len(node.children) - 1
        for i, child in enumerate(node.children):
            label = child.name
            if child.is_dir and not child.children:
                label += "/"
            lines.append(f"{prefix}|-- {label}")
            emit(child, prefix + ("    " if i == last else "|   "))

    emit(tree.root, "")
    return "\n".join(lines)


# -- main-file planning --------------------------------------------------------

@dataclass(frozen=True)
class Group:
    """One main file and the dependencies generated against it."""

    key: str
    main: str
    dependencies: tuple[str, ...]

    @property
    def paths(self) -> tuple[str, ...]:
        return (self.main, *self.dependencies)


@dataclass(frozen=True)
class MainPlan:
    groups: tuple[Group, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for g in self.groups:
            if g.main in g.dependencies:
                raise InvalidOverride(f"{g.main!r} is both main and dependency")
            for p in g.paths:
                if p in seen:
                    raise InvalidOverride(f"{p!r} appears in more than one group")
                seen.add(p)

    @property
    def covers(self) -> frozenset[str]:
        return frozenset(p for g in self.groups for p in g.paths)

    def group_of(self, path: str) -> Group | None:
        for g in self.groups:
            if path in g.paths:
                return g
        return None

    def role_of(self, path: str) -> str | None:
        g = self.group_of(path)
        if g is None:
            return None
        return "main" if g.main == path else "dependency"


def _pick_main(paths: list[str]) -> str:
    for pattern in MAIN_PRIORITY:
        hits = [p for p in paths if fnmatchcase(posixpath.basename(p), pattern)]
        if hits:
            return min(hits, key=lambda p: (p.count("/"), p))
    return min(paths)


def designate_mains(tree: ProjectTree, overrides: Mapping[str, str] | None = None) -> MainPlan:
    """Split the tree's files into main/dependency groups.

    Files are grouped by top-level directory (files sitting directly under
    the root share the ``"."`` group). Within a group the main file is the
    shallowest match of ``app.*``, then ``index.*``, then ``main.*``, falling
    back to the lexicographically first path. ``overrides`` maps a group key
    to an explicit main path and always wins.
    """
    buckets: dict[str, list[str]] = {}
    for path in tree.files():
        key = path.split("/", 1)[0] if "/" in path else ROOT_GROUP
        buckets.setdefault(key, []).append(path)
    if not buckets:
        raise EmptyPlan("tree has no files")

    overrides = dict(overrides or {})
    for key, main in overrides.items():
        if key not in buckets:
            raise InvalidOverride(f"no group named {key!r}")
        if not tree.is_file(main):
            raise InvalidOverride(f"{main!r} is not a file in the tree")
        if main not in buckets[key]:
            raise InvalidOverride(f"{main!r} is outside group {key!r}")

    groups = []
    for key, paths in buckets.items():
        main = overrides.get(key) or _pick_main(paths)
        groups.append(Group(key, main, tuple(p for p in paths if p != main)))
    return MainPlan(tuple(groups))


def generate_tree_text(backend, prompt: str = TREE_PROMPT) -> str:
    """Ask ``backend`` for a project tree and return the raw completion."""
    result = backend.complete(
        CompletionRequest(system_text=TREE_SYSTEM, user_text=prompt, phase=Phase.TREE)
    )
    return result.text
