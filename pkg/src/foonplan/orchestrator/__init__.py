"""Prompting, planners, the replanning loop and the search oracle."""

from foonplan.orchestrator.config import PlannerConfig
from foonplan.orchestrator.feedback import render_feedback
from foonplan.orchestrator.loop import (
    RecipeResult,
    RoundRecord,
    SceneResult,
    estimate_targets,
    run_recipe,
    run_scene,
)
from foonplan.orchestrator.planners import (
    CorrectingPlanner,
    FaultyPlanner,
    OraclePlanner,
    PlannerRequest,
    RemotePlanner,
    ScriptedPlanner,
    make_planner,
)
from foonplan.orchestrator.prompts import (
    Message,
    PromptMessages,
    build_action_prompt,
    build_target_prompt,
)
from foonplan.orchestrator.search import ground_actions, oracle_plan

__all__ = [
    "CorrectingPlanner",
    "FaultyPlanner",
    "Message",
    "OraclePlanner",
    "PlannerConfig",
    "PlannerRequest",
    "PromptMessages",
    "RecipeResult",
    "RemotePlanner",
    "RoundRecord",
    "SceneResult",
    "ScriptedPlanner",
    "build_action_prompt",
    "build_target_prompt",
    "estimate_targets",
    "ground_actions",
    "make_planner",
    "oracle_plan",
    "render_feedback",
    "run_recipe",
    "run_scene",
]
