"""The plan, validate, feed back and retry loop.

Each scene gets at most K planner calls. A rejected plan is thrown away
entirely and the next round plans the whole scene again from the scene's
entry environment; only accepted scenes are committed to the task graph.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Sequence
from dataclasses import dataclass

from foonplan.core import EnvironmentState, TargetState
from foonplan.errors import BindingError, ParseError, UnknownObject
from foonplan.graph import TaskGraph, append_unit
from foonplan.motions import FunctionalUnit, instantiate
from foonplan.orchestrator.config import PlannerConfig
from foonplan.orchestrator.feedback import render_feedback
from foonplan.orchestrator.planners import Planner, PlannerRequest
from foonplan.orchestrator.prompts import (
    Message,
    PromptMessages,
    build_action_prompt,
    build_target_prompt,
)
from foonplan.planio import ActionPlan, TargetEstimate, parse_planner_response
from foonplan.segmenter import SceneRecord
from foonplan.validator import (
    Diagnosis,
    DiagnosisKind,
    GoalReport,
    apply_action,
    check_action,
    check_goal,
    replay,
    validate_plan,
)

Failure = Diagnosis | GoalReport | ParseError


@dataclass(frozen=True)
class RoundRecord:
    """One planner call: what was asked, what came back, what was wrong."""

    round: int
    prompt: PromptMessages
    response: str
    feedback: str | None = None

    def to_doc(self) -> dict:
        return {
            "round": self.round,
            "prompt": self.prompt.to_doc(),
            "response": self.response,
            "feedback": self.feedback,
        }


@dataclass(frozen=True)
class SceneResult:
    """Outcome of one scene.

    On success ``units`` is the committed fragment and ``graph`` the task
    graph after appending it. On exhaustion ``failure`` is the last problem
    found and ``units`` is empty.
    """

    scene_id: int
    success: bool
    rounds: int
    units: tuple[FunctionalUnit, ...]
    transcript: tuple[RoundRecord, ...]
    failure: Failure | None = None
    graph: TaskGraph | None = None

    def __post_init__(self) -> None:
        if len(self.transcript) != self.rounds:
            raise ValueError("transcript length must equal the rounds used")

    @property
    def replanning_rounds(self) -> int:
        return max(self.rounds - 1, 0)

    def to_doc(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "outcome": "success" if self.success else "exhausted",
            "rounds": self.rounds,
            "steps": [u.step for u in self.units],
            "failure": render_feedback(self.failure) if self.failure is not None else None,
        }


@dataclass(frozen=True)
class RecipeResult:
    """Outcome of a whole recipe.

    ``audit`` lists the steps that a replay of the final graph found
    infeasible; it is empty in validated mode by construction.
    """

    scenes: tuple[SceneResult, ...]
    graph: TaskGraph
    env: EnvironmentState
    success: bool
    validated: bool = True
    audit: tuple[Diagnosis, ...] = ()

    @property
    def rounds(self) -> int:
        return sum(s.rounds for s in self.scenes)

    @property
    def replanning_rounds(self) -> int:
        return sum(s.replanning_rounds for s in self.scenes)

    def report_doc(self) -> dict:
        return {
            "mode": "validated" if self.validated else "baseline",
            "success": self.success,
            "scenes": [s.to_doc() for s in self.scenes],
            "rounds": self.rounds,
            "replanning_rounds": self.replanning_rounds,
            "audit": [render_feedback(d) for d in self.audit],
        }

    def transcript_doc(self) -> dict:
        return {
            "scenes": [
                {"scene_id": s.scene_id, "rounds": [r.to_doc() for r in s.transcript]}
                for s in self.scenes
            ]
        }


def estimate_targets(
    scene: SceneRecord,
    planner: Planner,
    config: PlannerConfig,
    images: Sequence[str] = (),
) -> tuple[TargetEstimate | None, tuple[RoundRecord, ...]]:
    """Ask for a scene's target state, retrying unparsable answers up to K times."""
    records: list[RoundRecord] = []
    feedback = None
    for rnd in range(1, config.budget + 1):
        prompt = build_target_prompt(scene, config, images)
        if feedback:
            extra = f"Your previous answer was unusable:\n{feedback}"
            prompt = PromptMessages((*prompt.messages, Message("user", extra)))
        response = planner.respond(
            PlannerRequest("targets", scene.scene_id, rnd, prompt, feedback)
        )
        try:
            estimate = parse_planner_response(response, TargetEstimate)
        except ParseError as exc:
            feedback = render_feedback(exc)
            records.append(RoundRecord(rnd, prompt, response, feedback))
            continue
        records.append(RoundRecord(rnd, prompt, response))
        return estimate, tuple(records)
    return None, tuple(records)


def run_scene(
    env: EnvironmentState,
    target: TargetState,
    planner: Planner,
    config: PlannerConfig,
    graph: TaskGraph | None = None,
) -> tuple[SceneResult, EnvironmentState]:
    """Plan one scene, replanning from ``env`` until valid or out of budget.

    ``graph`` is the task graph built so far; an accepted fragment is
    appended to it. Returns the scene result and the environment after the
    scene (``env`` itself when the budget ran out).
    """
    base = graph if graph is not None else TaskGraph()
    records: list[RoundRecord] = []
    feedback: str | None = None
    failure: Failure | None = None
    for rnd in range(1, config.budget + 1):
        prompt = build_action_prompt(env, target, feedback, config)
        response = planner.respond(
            PlannerRequest("actions", target.scene_id, rnd, prompt, feedback, env, target)
        )
        try:
            plan = parse_planner_response(response, ActionPlan)
        except ParseError as exc:
            failure = exc
        else:
            result = validate_plan(env, plan.steps, config.library, base)
            if result.ok:
                report = check_goal(result.env, target)
                if report.satisfied:
                    records.append(RoundRecord(rnd, prompt, response))
                    scene = SceneResult(
                        target.scene_id, True, rnd, result.units, tuple(records),
                        graph=result.graph,
                    )
                    return scene, result.env
                failure = report
            else:
                failure = result.diagnosis
        feedback = render_feedback(failure)
        records.append(RoundRecord(rnd, prompt, response, feedback))
    scene = SceneResult(
        target.scene_id, False, config.budget, (), tuple(records), failure, base
    )
    return scene, env


def _baseline_scene(
    env: EnvironmentState,
    target: TargetState,
    planner: Planner,
    config: PlannerConfig,
    graph: TaskGraph,
) -> tuple[SceneResult, EnvironmentState, TaskGraph]:
    """Single unchecked round: every bindable step goes into the graph.

    The environment advances by replay, so an infeasible step leaves it
    unchanged. The scene counts as a success only if no step was invalid
    and the target holds afterwards.
    """
    prompt = build_action_prompt(env, target, None, config)
    request = PlannerRequest("actions", target.scene_id, 1, prompt, None, env, target)
    response = planner.respond(request)
    failure: Failure | None = None
    units: list[FunctionalUnit] = []
    try:
        plan = parse_planner_response(response, ActionPlan)
    except ParseError as exc:
        plan, failure = ActionPlan(), exc
    for i, step in enumerate(plan.steps):
        try:
            unit = instantiate(config.library, step)
        except BindingError as exc:
            kind = (
                DiagnosisKind.BINDING_ERROR
                if step.motion in config.library
                else DiagnosisKind.UNKNOWN_MOTION
            )
            failure = failure or Diagnosis(i, str(step), kind, (), str(exc))
            continue
        try:
            problem = check_action(env, unit)
        except UnknownObject as exc:
            problem = Diagnosis(i, unit.step, DiagnosisKind.UNKNOWN_OBJECT, (), str(exc))
            post = env
        else:
            post = env if problem is not None else apply_action(env, unit)
        if problem is not None:
            failure = failure or dataclasses.replace(problem, index=i)
        graph = append_unit(graph, unit, env, post)
        units.append(unit)
        env = post
    if failure is None:
        report = check_goal(env, target)
        if not report.satisfied:
            failure = report
    record = RoundRecord(1, prompt, response)
    scene = SceneResult(target.scene_id, failure is None, 1, tuple(units), (record,), failure, graph)
    return scene, env, graph


def run_recipe(
    env: EnvironmentState,
    targets: Sequence[TargetState],
    planner: Planner,
    config: PlannerConfig,
) -> RecipeResult:
    """Run every scene in order, threading the environment through.

    Validated mode stops at the first scene that exhausts its budget. With
    ``config.validate`` off the loop becomes the unchecked baseline: one
    round per scene, everything appended, then a replay audit of the graph.
    """
    ids = [t.scene_id for t in targets]
    if ids != sorted(ids):
        raise ValueError("targets must be ordered by scene id")
    graph = TaskGraph()
    scenes: list[SceneResult] = []
    start = env
    if config.validate:
        for target in targets:
            scene, env = run_scene(env, target, planner, config, graph)
            scenes.append(scene)
            if not scene.success:
                break
            graph = scene.graph
        success = len(scenes) == len(targets) and all(s.success for s in scenes)
        return RecipeResult(tuple(scenes), graph, env, success)

    for target in targets:
        scene, env, graph = _baseline_scene(env, target, planner, config, graph)
        scenes.append(scene)
    _, audit = replay(start, graph.units)
    success = all(s.success for s in scenes)
    return RecipeResult(tuple(scenes), graph, env, success, validated=False, audit=tuple(audit))
