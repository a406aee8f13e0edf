"""``seesaw`` command line: tree handling, runs, reports and replay.

Exit codes: 0 success, 1 configuration error, 2 parse error, 3 backend
failure, 4 a group did not converge to an aligned state.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .backend import API_KEY_ENV, Backend, HttpBackend, load_script
from .engine import ConvergencePolicy, GroupStatus, MisalignmentAction, run_seesaw, run_standard
from .errors import (
    BackendError,
    ConfigError,
    EmptyLedger,
    EmptyPlan,
    InvalidOverride,
    MalformedTree,
    ScriptParseError,
)
from .metrics import (
    CSV_KINDS,
    Ledger,
    RunReport,
    comparison_table,
    export_csv,
    read_calls_csv,
    report_charts,
    summarize,
)
from .tree import designate_mains, generate_tree_text, parse_tree, render_tree
from .validator import ValidationMode

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_BACKEND, EXIT_NONCONVERGED = 0, 1, 2, 3, 4

log = logging.getLogger("seesaw")


@dataclass
class RunConfig:
    mode: str = "seesaw"
    tree: str | None = None
    generate_tree: bool = False
    backend: str | None = None
    script: str | None = None
    base_url: str | None = None
    model: str | None = None
    out: str = "generated"
    report: str | None = None
    epsilon: float = 0.01
    max_rounds: int = 5
    validation: str = ValidationMode.BOTH.value
    misalignment_action: str = MisalignmentAction.ADOPT_REWRITE_THEN_RESTART.value
    mains: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        # accept the policy block nested or flat
        data = {**data.pop("policy", {}), **data}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def validate(self) -> None:
        if self.mode not in ("seesaw", "standard"):
            raise ConfigError(f"mode must be seesaw or standard, not {self.mode!r}")
        if self.backend is None:
            self.backend = "script" if self.script else "http"
        if self.backend == "script":
            if not self.script:
                raise ConfigError("script backend needs --script")
        elif self.backend == "http":
            if not (self.base_url and self.model):
                raise ConfigError("http backend needs --base-url and --model")
            if not os.environ.get(API_KEY_ENV):
                raise ConfigError(f"http backend needs {API_KEY_ENV} in the environment")
        else:
            raise ConfigError(f"backend must be http or script, not {self.backend!r}")
        if not self.tree and not self.generate_tree:
            raise ConfigError("give --tree or --generate-tree")
        try:
            self.policy()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def policy(self) -> ConvergencePolicy:
        return ConvergencePolicy(
            epsilon=self.epsilon,
            max_rounds_per_group=self.max_rounds,
            misalignment_action=self.misalignment_action,
            validation_mode=self.validation,
        )

    @property
    def report_path(self) -> Path:
        return Path(self.report) if self.report else Path(f"{self.out}.report.json")


def make_backend(backend: str | None, script: str | None, base_url: str | None, model: str | None) -> Backend:
    if backend == "script" or (backend is None and script):
        if not script:
            raise ConfigError("script backend needs --script")
        return load_script(script)
    if not (base_url and model):
        raise ConfigError("http backend needs --base-url and --model")
    return HttpBackend(base_url, model)


def _write_report(report: RunReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    report.write_json(path)
    stem = path.with_suffix("")
    for kind in CSV_KINDS:
        export_csv(report, kind, f"{stem}.{kind}.csv")


# -- commands -----------------------------------------------------------------------

def cmd_tree(args) -> int:
    if args.action in ("parse", "render"):
        try:
            tree = parse_tree(Path(args.file).read_text(encoding="utf-8"))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except MalformedTree as exc:
            print(f"malformed tree: {exc}", file=sys.stderr)
            return EXIT_PARSE
        if args.action == "parse":
            print(f"files={tree.file_count} dirs={tree.dir_count}")
        else:
            print(render_tree(tree))
        return EXIT_OK

    try:
        backend = make_backend(args.backend, args.script, args.base_url, args.model)
        text = generate_tree_text(backend)
        tree = parse_tree(text)
    except (ConfigError, ScriptParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_PARSE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except MalformedTree as exc:
        print(f"malformed tree: {exc}", file=sys.stderr)
        return EXIT_PARSE
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(render_tree(tree) + "\n", encoding="utf-8")
    if args.report:
        _write_report(summarize(backend.ledger, mode="tree"), Path(args.report))
    print(f"wrote {args.out}: files={tree.file_count} dirs={tree.dir_count}")
    return EXIT_OK


def _run_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for name in ("mode", "tree", "backend", "script", "base_url", "model", "out", "report",
                 "epsilon", "max_rounds", "validation", "misalignment_action"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if args.generate_tree:
        cfg.generate_tree = True
    for item in args.main or ():
        key, sep, path = item.partition("=")
        if not sep:
            raise ConfigError(f"--main expects GROUP=PATH, got {item!r}")
        cfg.mains[key] = path
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _run_config(args)
        backend = make_backend(cfg.backend, cfg.script, cfg.base_url, cfg.model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScriptParseError as exc:
        print(f"script error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    try:
        if cfg.tree:
            tree = parse_tree(Path(cfg.tree).read_text(encoding="utf-8"))
        else:
            tree = parse_tree(generate_tree_text(backend))
        plan = designate_mains(tree, cfg.mains)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MalformedTree as exc:
        print(f"malformed tree: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvalidOverride, EmptyPlan) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND

    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    try:
        if cfg.mode == "seesaw":
            report = run_seesaw(tree, plan, backend, cfg.policy(), out_dir=cfg.out)
        else:
            report = run_standard(tree, plan, backend, out_dir=cfg.out)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        if exc.report is not None:
            _write_report(exc.report, cfg.report_path)
            print(f"partial report: {cfg.report_path}", file=sys.stderr)
        return EXIT_BACKEND

    _write_report(report, cfg.report_path)
    print(comparison_table([report]))
    for o in report.outcomes:
        print(f"{o['main']}: {o['status']} after {o['rounds_used']} round(s)")
    print(f"report: {cfg.report_path}")
    if any(o["status"] != GroupStatus.ALIGNED.value for o in report.outcomes):
        return EXIT_NONCONVERGED
    return EXIT_OK


def _load_report(path: str) -> RunReport:
    p = Path(path)
    if p.suffix == ".csv":
        calls = read_calls_csv(p)
        return summarize(Ledger(calls), mode=p.name.split(".", 1)[0])
    return RunReport.read_json(p)


def cmd_report(args) -> int:
    try:
        reports = [_load_report(p) for p in args.reports]
    except (OSError, ValueError, KeyError, TypeError, EmptyLedger) as exc:
        print(f"unreadable report: {exc}", file=sys.stderr)
        return EXIT_PARSE
    print(comparison_table(reports))
    if args.svg_dir:
        for path in report_charts(reports, args.svg_dir):
            print(f"chart: {path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    """Re-summarise a stored ledger (JSON report or calls CSV) offline."""
    p = Path(args.source)
    try:
        if p.suffix == ".csv":
            calls, mode, outcomes, wall, loc = read_calls_csv(p), args.mode, [], None, None
        else:
            stored = RunReport.read_json(p)
            calls, mode, outcomes = stored.calls, stored.mode, stored.outcomes
            wall, loc = stored.wall_time, stored.loc_by_file
        report = summarize(Ledger(calls), outcomes, mode, wall_time=wall, loc_by_file=loc)
    except (OSError, ValueError, KeyError, TypeError, EmptyLedger) as exc:
        print(f"unreadable ledger: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.report:
        _write_report(report, Path(args.report))
    print(comparison_table([report]))
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("http", "script"))
    p.add_argument("--script", help="JSON-lines script for the offline backend")
    p.add_argument("--base-url", help="OpenAI-compatible API root, e.g. https://api.openai.com/v1")
    p.add_argument("--model")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seesaw", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tree", help="parse, render or generate a project tree")
    t.add_argument("action", choices=("parse", "render", "generate"))
    t.add_argument("file", nargs="?", help="tree file (parse/render)")
    t.add_argument("--out", default="tree.txt", help="where generate writes the tree")
    t.add_argument("--report", help="write a metrics report for the generate call")
    _backend_flags(t)
    t.set_defaults(func=cmd_tree)

    r = sub.add_parser("run", help="generate a project in seesaw or standard mode")
    r.add_argument("--config", help="JSON run configuration; flags override it")
    r.add_argument("--mode", choices=("seesaw", "standard"))
    r.add_argument("--tree", help="tree listing file")
    r.add_argument("--generate-tree", action="store_true", help="ask the backend for the tree first")
    _backend_flags(r)
    r.add_argument("--out", help="output directory for generated files")
    r.add_argument("--report", help="JSON report path (CSV exports go next to it)")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--max-rounds", type=int)
    r.add_argument("--validation", choices=[m.value for m in ValidationMode])
    r.add_argument("--misalignment-action", choices=[m.value for m in MisalignmentAction])
    r.add_argument("--main", action="append", metavar="GROUP=PATH", help="override a group's main file")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="print the token/time comparison table")
    rep.add_argument("reports", nargs="+", help="JSON reports (or calls CSVs)")
    rep.add_argument("--svg-dir", help="also write SVG charts here")
    rep.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", help="re-summarise a stored ledger without a backend")
    rp.add_argument("source", help="JSON report or calls CSV")
    rp.add_argument("--mode", default="seesaw", help="mode label when replaying a CSV")
    rp.add_argument("--report", help="write the re-summarised report here")
    rp.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "tree" and args.action in ("parse", "render") and not args.file:
        parser.error(f"tree {args.action} needs a file")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
