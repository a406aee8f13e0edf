"""Acceptance checks, one test per criterion.

Each test carries a ``criterion`` marker; the ``criterion`` fixture turns
its outcome into a PASS/FAIL line printed in the terminal summary.
"""

from __future__ import annotations

import json
import re
import time
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import FIXTURES, LISTING, content_for, entry, flat_tree, group_tree, happy_entries, standard_entries, trace
from seesaw.backend import ScriptedBackend, load_script
from seesaw.cli import main
from seesaw.engine import ConvergencePolicy, GroupStatus, run_group, run_seesaw, run_standard
from seesaw.metrics import CSV_KINDS, TIME_ROW, TOKEN_ROW, csv_text, export_csv, read_calls_csv, summarize
from seesaw.tree import designate_mains, parse_tree, render_tree
from seesaw.validator import FindingKind, parse_verdict, static_check
from seesaw.workspace import CodeUnit, Workspace, distance

SEESAW_SCRIPT = FIXTURES / "ecommerce_seesaw.jsonl"
STANDARD_SCRIPT = FIXTURES / "ecommerce_standard.jsonl"


def script_token_sum(path: Path) -> int:
    """Independent sum straight from the JSON lines."""
    total = 0
    for line in path.read_text().splitlines():
        if line.strip():
            d = json.loads(line)
            total += d.get("prompt_tokens", 0) + d.get("completion_tokens", 0)
    return total


class timed:
    def __init__(self, limit: float):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.3f}s, limit {self.limit}s"


@pytest.mark.criterion("1 tree fidelity")
def test_c1_tree_fidelity(criterion):
    with timed(1.0):
        tree = parse_tree(LISTING)
        assert (tree.file_count, tree.dir_count) == (30, 18)
        rendered = render_tree(tree)
        assert rendered == LISTING.rstrip("\n")
        assert parse_tree(rendered) == tree
        assert render_tree(parse_tree(rendered)) == rendered


@pytest.mark.criterion("2 standard-mode call law")
def test_c2_standard_call_law(criterion):
    with timed(1.0):
        for ns in ([0], [1], [3], [10], [0, 1, 3, 10]):
            tree = group_tree(ns)
            plan = designate_mains(tree)
            b = ScriptedBackend(standard_entries(plan))
            run_standard(tree, plan, b)
            phases = Counter(r.phase.value for r in b.requests)
            assert len(b.requests) == sum(1 + n for n in ns)
            assert phases["validate"] == 0
            assert phases["see"] == len(ns)


@pytest.mark.criterion("3 see-saw happy path")
def test_c3_happy_path(criterion):
    with timed(1.0):
        ns = [0, 1, 3, 10]
        tree = group_tree(ns)
        plan = designate_mains(tree)
        b = ScriptedBackend(happy_entries(plan))
        report = run_seesaw(tree, plan, b)
        assert all(o["status"] == "aligned" and o["rounds_used"] == 1 for o in report.outcomes)
        for g, n in zip(plan.groups, ns):
            per = Counter(r.phase.value for r in b.requests if r.path in g.paths)
            assert (per["see"], per["saw"], per["validate"]) == (1, n, n)


@pytest.mark.criterion("4 restart semantics")
def test_c4_restart_trace(criterion):
    expected = json.loads((FIXTURES / "restart_trace.json").read_text())
    with timed(1.0):
        tree = flat_tree({"svc": ["app.js", "a.js", "b.js", "c.js"]})
        plan = designate_mains(tree)
        g = plan.groups[0]
        b = ScriptedBackend([
            entry("see", "const app = 1;", g.main, 0),
            entry("validate", "False, Modified Main Code\n```\nconst app = 2;\n```", expected["fail_at"], 0),
            entry("validate", "True", rep=True),
            *(entry("saw", content_for(d, f"r{r}"), d, r) for r in (0, 1) for d in g.dependencies),
        ])
        out = run_group(Workspace(tree, plan), g, b)
        assert out.status is GroupStatus.ALIGNED
        assert out.rounds_used == expected["rounds_used"] == 2
        assert trace(b) == [tuple(c) for c in expected["calls"]]


@pytest.mark.criterion("5 fixed point and round limit")
def test_c5_fixed_point(criterion):
    tree = flat_tree({"svc": ["app.js", "a.js", "b.js"]})
    plan = designate_mains(tree)
    b = ScriptedBackend([
        entry("see", "const app = 1;", rep=True),
        entry("saw", "module.exports = {};", rep=True),
        entry("validate", "False", rep=True),
    ])
    out = run_group(Workspace(tree, plan), plan.groups[0], b, ConvergencePolicy(max_rounds_per_group=5))
    assert out.status is GroupStatus.FIXED_POINT_UNALIGNED
    assert out.final_delta == 0.0
    assert out.rounds_used <= 2

    entries = [entry("validate", "False", rep=True)]
    for r in range(3):
        entries.append(entry("see", f"const app = {r}; // pass {r}", round=r))
        entries += [entry("saw", f"module.exports = {r}; // {d} {r}", d, r) for d in plan.groups[0].dependencies]
    out = run_group(Workspace(tree, plan), plan.groups[0], ScriptedBackend(entries),
                    ConvergencePolicy(max_rounds_per_group=3))
    assert out.status is GroupStatus.ROUND_LIMIT
    assert out.rounds_used == 3


@pytest.mark.criterion("6 token conservation")
def test_c6_token_conservation(criterion):
    tree = parse_tree(LISTING)
    plan = designate_mains(tree)
    assert script_token_sum(SEESAW_SCRIPT) == 9064
    b = load_script(SEESAW_SCRIPT)
    report = run_seesaw(tree, plan, b)
    assert report.total_tokens == 9064
    assert b.unused == []

    # smaller runs across both modes and several shapes
    for ns in ([0], [2, 1], [3, 0, 4]):
        t = group_tree(ns)
        p = designate_mains(t)
        for runner, entries in ((run_seesaw, happy_entries(p, p=13, c=7)), (run_standard, standard_entries(p, p=11))):
            b = ScriptedBackend(entries)
            assert runner(t, p, b).total_tokens == sum(e.prompt_tokens + e.completion_tokens for e in entries)


_words = st.lists(st.sampled_from(["a", "b", "c", "x"]), max_size=8).map(" ".join)


@pytest.mark.criterion("7 distance metric")
def test_c7_distance(criterion):
    @settings(max_examples=200)
    @given(_words, _words)
    def laws(x, y):
        assert distance(x, x) == 0.0
        assert distance(x, y) == distance(y, x)
        assert 0.0 <= distance(x, y) <= 1.0

    laws()
    assert abs(distance("a b c", "a b d") - 1 / 3) <= 1e-12


VERDICTS = [
    ("True", True, None),
    ("true", True, None),
    ("TRUE.", True, None),
    ("True\nLooks consistent.", True, None),
    ("False\n```\nconst app = 1;\n```", False, "const app = 1;"),
    ("False\n```javascript\nconst a = 1;\n```\nnote", False, "const a = 1;"),
    ("False, const app = express();", False, "const app = express();"),
    ("false, x = 1;", False, "x = 1;"),
    ("FALSE", False, None),
    ("garbage", False, None),
    ("", False, None),
    ("I think so", False, None),
]


@pytest.mark.criterion("8 validator protocol")
def test_c8_validator(criterion, ecommerce):
    assert len(VERDICTS) == 12
    for reply, aligned, modified in VERDICTS:
        v = parse_verdict(reply)
        assert (v.aligned, v.modified_main) == (aligned, modified), reply
    for reply in ("garbage", "", "I think so"):
        assert parse_verdict(reply).findings[0].kind is FindingKind.VERDICT_PARSE_ERROR

    units = [
        CodeUnit(f"backend/{f.relative_to(FIXTURES / 'backend_subtree').as_posix()}", "dependency", f.read_text(), 1)
        for f in sorted((FIXTURES / "backend_subtree").rglob("*.js"))
    ]
    main = next(u for u in units if u.path == "backend/app.js")
    deps = [u for u in units if u is not main]
    assert static_check(main, deps, ecommerce) == []
    planted = [CodeUnit(d.path, d.role, d.content + "\nrequire('../models/Order');\n", 2) for d in deps[:1]] + deps[1:]
    findings = static_check(main, planted, ecommerce)
    assert [(f.kind, f.detail) for f in findings] == [(FindingKind.UNRESOLVED_IMPORT, "../models/Order")]


@pytest.mark.criterion("9 CSV and report determinism")
def test_c9_csv_determinism(criterion, tmp_path):
    tree = parse_tree(LISTING)
    b = load_script(SEESAW_SCRIPT)
    report = run_seesaw(tree, designate_mains(tree), b)
    for kind in CSV_KINDS:
        again = summarize(b.ledger, report.outcomes, report.mode, wall_time=report.wall_time)
        first = export_csv(report, kind, tmp_path / f"a.{kind}.csv").read_bytes()
        assert export_csv(again, kind, tmp_path / f"b.{kind}.csv").read_bytes() == first
        assert csv_text(again, kind).encode() == first
    assert read_calls_csv(tmp_path / "a.calls.csv") == list(b.ledger.records)


@pytest.mark.criterion("10 end-to-end offline")
def test_c10_end_to_end(criterion, tmp_path, capsys):
    (tmp_path / "tree.txt").write_text(LISTING)
    with timed(10.0):
        for mode, script in (("seesaw", SEESAW_SCRIPT), ("standard", STANDARD_SCRIPT)):
            rc = main(["run", "--mode", mode, "--tree", str(tmp_path / "tree.txt"), "--script", str(script),
                       "--out", str(tmp_path / mode), "--report", str(tmp_path / f"{mode}.json")])
            assert rc == 0
            written = sorted(p.relative_to(tmp_path / mode).as_posix()
                             for p in (tmp_path / mode).rglob("*") if p.is_file())
            assert written == sorted(parse_tree(LISTING).files())
            assert len(written) == 30
        capsys.readouterr()
        assert main(["report", str(tmp_path / "seesaw.json"), str(tmp_path / "standard.json")]) == 0
    out = capsys.readouterr().out
    tok = next(line for line in out.splitlines() if TOKEN_ROW in line)
    tim = next(line for line in out.splitlines() if TIME_ROW in line)
    assert re.findall(r"\d[\d,]*", tok) == ["9,064", "2,769"]
    assert len(re.findall(r"\d[\d,]*\.\d\d", tim)) == 2
