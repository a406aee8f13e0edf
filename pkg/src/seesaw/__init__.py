"""Recursive multi-file code generation that alternates main-file and
dependency generation with alignment checks, plus a single-pass baseline."""

from .backend import (
    Backend,
    CompletionRequest,
    CompletionResult,
    HttpBackend,
    Phase,
    ScriptEntry,
    ScriptedBackend,
    load_script,
)
from .engine import (
    ConvergencePolicy,
    GroupOutcome,
    GroupStatus,
    MisalignmentAction,
    classify_convergence,
    run_group,
    run_seesaw,
    run_standard,
    saw_step,
    see_step,
)
from .metrics import Ledger, RunReport, export_csv, loc_report, summarize
from .tree import MainPlan, ProjectTree, designate_mains, generate_tree_text, parse_tree, render_tree
from .validator import ValidationMode, Verdict, parse_verdict, static_check, validate
from .workspace import Workspace, aggregate_delta, distance

__version__ = "0.1.0"
