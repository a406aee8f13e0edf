from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import entry
from seesaw.backend import ScriptedBackend
from seesaw.errors import EmptyPlan, InvalidOverride, MalformedTree
from seesaw.tree import (
    TREE_PROMPT,
    NodeKind,
    ProjectTree,
    TreeNode,
    designate_mains,
    generate_tree_text,
    parse_tree,
    render_tree,
)

BACKEND_FILES = [
    "backend/app.js",
    "backend/config/db.js",
    "backend/controllers/authController.js",
    "backend/controllers/productController.js",
    "backend/middleware/authMiddleware.js",
    "backend/models/Product.js",
    "backend/models/User.js",
    "backend/routes/auth.js",
    "backend/routes/index.js",
    "backend/routes/products.js",
]


def test_listing_counts(ecommerce):
    assert ecommerce.file_count == 30
    assert ecommerce.dir_count == 18
    assert ecommerce.name == "project"
    assert len(ecommerce.nodes()) == 30 + 18 + 1


def test_listing_structure(ecommerce):
    assert [n.name for n in ecommerce.root.children] == [
        "auth", "backend", "database", "deployment", "frontend", "tests",
    ]
    assert ecommerce.is_file("deployment/Dockerfile")
    assert ecommerce.node("frontend/src/components/Auth").kind is NodeKind.DIRECTORY
    assert ecommerce.is_file("tests/integration/productRoutes.test.js")
    assert [p for p in ecommerce.files() if p.startswith("backend/")] == BACKEND_FILES


def test_render_reproduces_listing(listing, ecommerce):
    assert render_tree(ecommerce) == listing.rstrip("\n")


def test_root_only():
    t = parse_tree("project/")
    assert (t.file_count, t.dir_count) == (0, 0)
    assert render_tree(t) == "project/"


def test_single_file_render():
    t = parse_tree("project/\n|-- x.js\n")
    assert render_tree(t) == "project/\n|-- x.js"
    assert t.files() == ["x.js"]


@pytest.mark.parametrize(
    "text",
    [
        "project/\n|-- a\n|       |-- b.js\n",          # skips a level
        "project/\n|   |-- b.js\n",                      # first entry too deep
        "project/\n|-- a.js\n|-- a.js\n",                # duplicate sibling
        "Here is the structure you asked for:\nsrc/ main.py",
        "",
        "   \n\n",
        "project/\nsome prose line\n",
    ],
)
def test_malformed(text):
    with pytest.raises(MalformedTree):
        parse_tree(text)


def test_fence_is_stripped(listing):
    fenced = "Sure, here it is:\n```text\n" + listing + "```\nLet me know!"
    t = parse_tree(fenced)
    assert (t.file_count, t.dir_count) == (30, 18)


def test_unicode_markers_and_comments():
    text = "app/\n├── src\n│   └── main.js  # entry\n└── README.md\n"
    t = parse_tree(text)
    assert t.files() == ["src/main.js", "README.md"]


def test_trailing_slash_marks_empty_directory():
    t = parse_tree("p/\n|-- assets/\n|-- a.js\n")
    assert t.node("assets").kind is NodeKind.DIRECTORY
    assert t.dir_count == 1
    assert parse_tree(render_tree(t)) == t


def test_file_node_rejects_children():
    with pytest.raises(MalformedTree):
        TreeNode("a.js", NodeKind.FILE, (TreeNode("a.js/b", NodeKind.FILE),))


# -- round-trip property -------------------------------------------------------------

_names = st.text(alphabet="abcXYZ019._-", min_size=1, max_size=6).filter(lambda s: s not in (".", ".."))


@st.composite
def _children(draw, parent: str, depth: int):
    names = draw(st.lists(_names, max_size=4, unique=True))
    kids = []
    for name in names:
        path = f"{parent}/{name}" if parent else name
        if depth < 3 and draw(st.booleans()):
            kids.append(TreeNode(path, NodeKind.DIRECTORY, draw(_children(path, depth + 1))))
        else:
            kids.append(TreeNode(path, NodeKind.FILE))
    return tuple(kids)


@st.composite
def trees(draw):
    return ProjectTree(draw(_names), TreeNode("", NodeKind.DIRECTORY, draw(_children("", 0))))


@settings(max_examples=200)
@given(trees())
def test_render_parse_round_trip(tree):
    again = parse_tree(render_tree(tree))
    assert again == tree
    assert again.file_count + again.dir_count + 1 == len(again.nodes())


@settings(max_examples=100)
@given(trees())
def test_plan_partitions_files(tree):
    if tree.file_count == 0:
        with pytest.raises(EmptyPlan):
            designate_mains(tree)
        return
    plan = designate_mains(tree)
    listed = [p for g in plan.groups for p in g.paths]
    assert sorted(listed) == sorted(tree.files())
    assert all(g.main not in g.dependencies for g in plan.groups)
    assert designate_mains(tree) == plan


# -- main designation -----------------------------------------------------------------

def test_backend_group(ecommerce):
    plan = designate_mains(ecommerce)
    backend = next(g for g in plan.groups if g.key == "backend")
    assert backend.main == "backend/app.js"
    # the subtree holds ten files, so app.js leaves nine dependencies
    assert backend.dependencies == tuple(BACKEND_FILES[1:])


def test_default_mains(ecommerce):
    plan = designate_mains(ecommerce)
    assert {g.key: g.main for g in plan.groups} == {
        "auth": "auth/passport.js",
        "backend": "backend/app.js",
        "database": "database/init.js",
        "deployment": "deployment/Dockerfile",
        "frontend": "frontend/public/index.html",
        "tests": "tests/backend/authController.test.js",
    }
    assert len(plan.groups) == 6
    assert plan.covers == frozenset(ecommerce.files())


def test_single_file_project():
    plan = designate_mains(parse_tree("p/\n|-- x.js\n"))
    assert len(plan.groups) == 1
    assert plan.groups[0].main == "x.js"
    assert plan.groups[0].dependencies == ()


def test_root_files_form_one_group():
    plan = designate_mains(parse_tree("p/\n|-- lib\n|   |-- a.js\n|-- z.js\n|-- index.js\n"))
    assert [(g.key, g.main, g.dependencies) for g in plan.groups] == [
        ("lib", "lib/a.js", ()),
        (".", "index.js", ("z.js",)),
    ]


def test_override_wins(ecommerce):
    plan = designate_mains(ecommerce, {"frontend": "frontend/src/index.js"})
    fe = next(g for g in plan.groups if g.key == "frontend")
    assert fe.main == "frontend/src/index.js"
    assert "frontend/public/index.html" in fe.dependencies


@pytest.mark.parametrize(
    "overrides",
    [
        {"frontend": "frontend/src/nope.js"},
        {"frontend": "backend/app.js"},
        {"nosuchgroup": "backend/app.js"},
        {"frontend": "frontend/src"},
    ],
)
def test_bad_override(ecommerce, overrides):
    with pytest.raises(InvalidOverride):
        designate_mains(ecommerce, overrides)


def test_shallowest_priority_match_wins():
    plan = designate_mains(parse_tree("p/\n|-- s\n    |-- deep\n    |   |-- app.js\n    |-- app.ts\n"))
    assert plan.groups[0].main == "s/app.ts"


# -- tree generation --------------------------------------------------------------------

def test_generate_sends_prompt_verbatim(listing):
    backend = ScriptedBackend([entry("tree", listing, p=120, c=480)])
    text = generate_tree_text(backend)
    t = parse_tree(text)
    assert (t.file_count, t.dir_count) == (30, 18)
    (req,) = backend.requests
    assert req.user_text == TREE_PROMPT
    assert req.user_text.startswith("Generate a project structure for")
    assert backend.ledger.records[0].phase == "tree"
    assert backend.ledger.total_tokens == 600


def test_generate_prose_is_malformed():
    backend = ScriptedBackend([entry("tree", "I would organise it into a frontend and a backend.")])
    with pytest.raises(MalformedTree):
        parse_tree(generate_tree_text(backend))


def test_generate_fenced(listing):
    backend = ScriptedBackend([entry("tree", "```\n" + listing + "```")])
    t = parse_tree(generate_tree_text(backend))
    assert t.file_count == 30
