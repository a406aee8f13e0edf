"""See-Saw generation loop and the single-pass Standard baseline.

A group is one main file M and its dependencies D_1..D_n. Round 0 opens
with a See call that writes M. Each dependency then gets a Saw call and is
validated straight away. The first misaligned verdict ends the round: M
is replaced (by the judge's rewrite or a fresh See call) and the next
round restarts at D_1, or resumes at the failed dependency under the
``..._then_resume`` policy. After every round the group's files are
snapshotted and compared with the previous round's snapshot. The group
stops when a round finishes with every verdict true, when the change
between rounds drops below epsilon, or when the round cap is reached.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import prompts
from ._text import strip_fence
from .backend import Backend, CompletionRequest, Phase
from .errors import BackendError, EmptyPlan, UnknownPath
from .metrics import RunReport, loc_report, summarize
from .tree import Group, MainPlan, ProjectTree, render_tree
from .validator import ValidationMode, Verdict, validate
from .workspace import CodeUnit, UnitPhase, Workspace, aggregate_delta

log = logging.getLogger(__name__)


class MisalignmentAction(str, Enum):
    ADOPT_REWRITE_THEN_RESTART = "adopt_rewrite_then_restart"
    REGENERATE_MAIN_THEN_RESTART = "regenerate_main_then_restart"
    REGENERATE_MAIN_THEN_RESUME = "regenerate_main_then_resume"


class GroupStatus(str, Enum):
    ALIGNED = "aligned"
    FIXED_POINT_UNALIGNED = "fixed_point_unaligned"
    ROUND_LIMIT = "round_limit"


class Convergence(str, Enum):
    ALIGNED = "aligned"
    FIXED_POINT_UNALIGNED = "fixed_point_unaligned"
    CONTRACTING = "contracting"
    ROUND_LIMIT = "round_limit"


@dataclass(frozen=True)
class ConvergencePolicy:
    epsilon: float = 0.01
    max_rounds_per_group: int = 5
    misalignment_action: MisalignmentAction = MisalignmentAction.ADOPT_REWRITE_THEN_RESTART
    validation_mode: ValidationMode = ValidationMode.BOTH

    def __post_init__(self) -> None:
        object.__setattr__(self, "misalignment_action", MisalignmentAction(self.misalignment_action))
        object.__setattr__(self, "validation_mode", ValidationMode(self.validation_mode))
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_rounds_per_group < 1:
            raise ValueError("max_rounds_per_group must be >= 1")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    aggregate_delta: float
    aligned: bool


@dataclass
class GroupOutcome:
    main: str
    status: GroupStatus
    rounds_used: int
    final_delta: float
    history: list[RoundRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status.value
        return d


@dataclass
class SessionState:
    """Where the engine was; attached to errors as ``exc.session``."""

    plan: MainPlan
    workspace: Workspace
    policy: ConvergencePolicy | None
    group_index: int = 0
    round: int = 0
    phase: str = "see"
    outcomes: list[GroupOutcome] = field(default_factory=list)


def classify_convergence(
    deltas: Sequence[float], aligned: bool, epsilon: float = 0.01
) -> Convergence:
    """Label a delta history.

    Aligned wins outright; otherwise a last delta under ``epsilon`` is a
    fixed point, a strictly decreasing history is contracting, and
    anything else is treated as hitting the round limit.
    """
    if not deltas:
        raise ValueError("delta history is empty")
    if aligned:
        return Convergence.ALIGNED
    if deltas[-1] < epsilon:
        return Convergence.FIXED_POINT_UNALIGNED
    if all(a > b for a, b in zip(deltas, deltas[1:])):
        return Convergence.CONTRACTING
    return Convergence.ROUND_LIMIT


# -- single steps -----------------------------------------------------------------

def _complete(backend: Backend, user_text: str, phase: Phase, path: str, round: int) -> str:
    result = backend.complete(CompletionRequest(
        system_text=prompts.system_text(),
        user_text=user_text,
        phase=phase,
        path=path,
        round=round,
    ))
    return strip_fence(result.text)


def see_prompt(workspace: Workspace, group: Group, round: int, context: str = "") -> str:
    if round == 0:
        deps = "\n".join(f"- {p}" for p in group.dependencies) or "(none)"
    else:
        deps = prompts.files_block((p, workspace.content(p)) for p in group.dependencies)
    return prompts.render(
        "see",
        TREE=render_tree(workspace.tree),
        MAIN_PATH=group.main,
        DEPS_BLOCK=deps,
        CONTEXT_BLOCK=context,
    )


def see_step(
    workspace: Workspace,
    group: Group,
    backend: Backend,
    round: int,
    context: str = "",
    unit_phase: UnitPhase = UnitPhase.SEE,
) -> CodeUnit:
    """Generate or refine the group's main file.

    Round 0 lists the dependency paths only; later rounds embed their
    current contents.
    """
    text = _complete(backend, see_prompt(workspace, group, round, context), Phase.SEE, group.main, round)
    return workspace.put_unit(group.main, text, unit_phase)


def saw_prompt(
    workspace: Workspace, group: Group, target: str, include_siblings: bool = True, context: str = ""
) -> str:
    siblings = ""
    if include_siblings:
        others = [u for u in workspace.generated(group.dependencies) if u.path != target]
        siblings = prompts.files_block((u.path, u.content) for u in others)
    return prompts.render(
        "saw",
        TREE=render_tree(workspace.tree),
        MAIN_PATH=group.main,
        MAIN_CODE=workspace.content(group.main),
        SIBLINGS_BLOCK=siblings or "(none)",
        TARGET_PATH=target,
        CONTEXT_BLOCK=context,
    )


def saw_step(
    workspace: Workspace,
    group: Group,
    target: str,
    backend: Backend,
    round: int,
    include_siblings: bool = True,
    context: str = "",
    unit_phase: UnitPhase = UnitPhase.SAW,
) -> CodeUnit:
    """Generate one dependency from the current main file.

    With ``include_siblings`` the prompt also carries the latest contents
    of every other generated dependency, never the target's own.
    """
    if target not in group.dependencies:
        raise UnknownPath(f"{target!r} is not a dependency of {group.main!r}")
    if workspace.get(group.main).revision < 1:
        raise ValueError(f"main file {group.main!r} has not been generated yet")
    prompt = saw_prompt(workspace, group, target, include_siblings, context)
    text = _complete(backend, prompt, Phase.SAW, target, round)
    return workspace.put_unit(target, text, unit_phase)


def _context_block(workspace: Workspace, done: Sequence[Group]) -> str:
    paths = [p for g in done for p in g.paths]
    if not paths:
        return ""
    body = prompts.files_block((p, workspace.content(p)) for p in paths)
    return f"\nAlready generated files from other components (read-only):\n{body}\n"


# -- loops --------------------------------------------------------------------------

def run_group(
    workspace: Workspace,
    group: Group,
    backend: Backend,
    policy: ConvergencePolicy | None = None,
    context: str = "",
    state: SessionState | None = None,
) -> GroupOutcome:
    policy = policy or ConvergencePolicy()
    if state is None:
        state = SessionState(workspace.plan, workspace, policy)
    deps = group.dependencies
    prev = workspace.snapshot(group.paths, -1)
    history: list[RoundRecord] = []

    try:
        state.round, state.phase = 0, "see"
        see_step(workspace, group, backend, 0, context)
        rnd, start = 0, 0
        while True:
            state.round = rnd
            verdict: Verdict | None = None
            failed_at = None
            for i in range(start, len(deps)):
                state.phase = "saw"
                saw_step(workspace, group, deps[i], backend, rnd, context=context)
                state.phase = "validate"
                verdict = validate(
                    workspace.get(group.main),
                    workspace.generated(deps),
                    workspace.tree,
                    backend,
                    policy.validation_mode,
                    round=rnd,
                    path=deps[i],
                )
                if not verdict.aligned:
                    failed_at = i
                    break

            snap = workspace.snapshot(group.paths, rnd)
            delta = aggregate_delta(prev, snap)
            history.append(RoundRecord(rnd, delta, failed_at is None))
            log.info("group %s round %d: delta=%.4f aligned=%s", group.main, rnd, delta, failed_at is None)

            if failed_at is None:
                status = GroupStatus.ALIGNED
            elif delta < policy.epsilon:
                status = GroupStatus.FIXED_POINT_UNALIGNED
            elif rnd + 1 >= policy.max_rounds_per_group:
                status = GroupStatus.ROUND_LIMIT
            else:
                status = None
            if status is not None:
                return GroupOutcome(group.main, status, rnd + 1, delta, history)

            rnd += 1
            state.round, state.phase = rnd, "see"
            action = policy.misalignment_action
            if action is MisalignmentAction.ADOPT_REWRITE_THEN_RESTART and verdict.modified_main is not None:
                workspace.put_unit(group.main, verdict.modified_main, UnitPhase.VALIDATOR_REWRITE)
            else:
                see_step(workspace, group, backend, rnd, context)
            start = failed_at if action is MisalignmentAction.REGENERATE_MAIN_THEN_RESUME else 0
            prev = snap
    except BackendError as exc:
        exc.session = state
        raise


def _partial_report(mode, backend, outcomes, started, workspace, error) -> RunReport | None:
    if not len(backend.ledger):
        return None
    report = summarize(
        backend.ledger, outcomes, mode,
        wall_time=backend.clock.now() - started,
        loc_by_file=loc_report(workspace),
    )
    report.error = error
    return report


def _check_plan(tree: ProjectTree, plan: MainPlan) -> None:
    if not plan.groups:
        raise EmptyPlan("plan has no groups")
    missing = set(tree.files()) - plan.covers
    if missing:
        raise ValueError(f"plan does not cover {sorted(missing)}")


def run_seesaw(
    tree: ProjectTree,
    plan: MainPlan,
    backend: Backend,
    policy: ConvergencePolicy | None = None,
    out_dir: str | Path | None = None,
    workspace: Workspace | None = None,
) -> RunReport:
    """Run every group in plan order and summarise the backend ledger.

    Later groups see earlier groups' files as read-only context. A backend
    error aborts the run; the exception carries ``session`` and a partial
    ``report``.
    """
    _check_plan(tree, plan)
    policy = policy or ConvergencePolicy()
    workspace = workspace or Workspace(tree, plan, out_dir)
    state = SessionState(plan, workspace, policy)
    started = backend.clock.now()
    try:
        for gi, group in enumerate(plan.groups):
            state.group_index = gi
            context = _context_block(workspace, plan.groups[:gi])
            state.outcomes.append(run_group(workspace, group, backend, policy, context, state))
    except BackendError as exc:
        exc.report = _partial_report("seesaw", backend, state.outcomes, started, workspace, str(exc))
        raise
    return summarize(
        backend.ledger, state.outcomes, "seesaw",
        wall_time=backend.clock.now() - started,
        loc_by_file=loc_report(workspace),
    )


def run_standard(
    tree: ProjectTree,
    plan: MainPlan,
    backend: Backend,
    out_dir: str | Path | None = None,
    workspace: Workspace | None = None,
) -> RunReport:
    """Baseline: one See per group, then each dependency from M alone.

    Exactly ``1 + n`` completions per group and no validation.
    """
    _check_plan(tree, plan)
    workspace = workspace or Workspace(tree, plan, out_dir)
    state = SessionState(plan, workspace, None)
    started = backend.clock.now()
    try:
        for gi, group in enumerate(plan.groups):
            state.group_index, state.phase = gi, "see"
            see_step(workspace, group, backend, 0, unit_phase=UnitPhase.STANDARD)
            for dep in group.dependencies:
                state.phase = "saw"
                saw_step(workspace, group, dep, backend, 0, include_siblings=False,
                         unit_phase=UnitPhase.STANDARD)
    except BackendError as exc:
        exc.session = state
        exc.report = _partial_report("standard", backend, [], started, workspace, str(exc))
        raise
    return summarize(
        backend.ledger, [], "standard",
        wall_time=backend.clock.now() - started,
        loc_by_file=loc_report(workspace),
    )
