"""Prompt construction for the two planner stages.

Stage one asks the planner which object states a video scene ends in
(a TargetEstimate); stage two asks for the actions that reach that target
from the current environment (an ActionPlan). Image references are carried
through untouched; nothing here looks at pixels.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from foonplan.core import ATTRIBUTE_KEYS, CATEGORIES, REGIONS, EnvironmentState, TargetState
from foonplan.motions import MotionLibrary
from foonplan.orchestrator.config import PlannerConfig
from foonplan.planio import env_to_doc, target_state_to_doc
from foonplan.segmenter import SceneRecord

ROLES = ("system", "user")
ALLOWED_ACTIONS_HEADER = "Allowed actions:"
FEEDBACK_HEADER = "Error correction:"


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    images: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        object.__setattr__(self, "images", tuple(self.images))

    def to_doc(self) -> dict:
        doc: dict = {"role": self.role, "content": self.content}
        if self.images:
            doc["images"] = list(self.images)
        return doc


@dataclass(frozen=True)
class PromptMessages:
    """One system message followed by one or more user messages."""

    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        roles = [m.role for m in self.messages]
        if not roles or roles[0] != "system" or "system" in roles[1:]:
            raise ValueError("exactly one system message is required, and it must come first")
        if len(roles) < 2:
            raise ValueError("at least one user message is required")

    @property
    def system(self) -> Message:
        return self.messages[0]

    @property
    def user(self) -> Message:
        return self.messages[-1]

    def to_doc(self) -> list[dict]:
        return [m.to_doc() for m in self.messages]


@lru_cache(maxsize=1)
def _fewshot_text() -> str:
    return resources.files("foonplan.data").joinpath("fewshot.json").read_text("utf-8")


def fewshot_examples() -> dict:
    """Bundled worked examples for both stages."""
    return json.loads(_fewshot_text())


def _json_block(doc: object) -> str:
    return "```json\n" + json.dumps(doc, indent=2, ensure_ascii=False) + "\n```"


def allowed_actions(library: MotionLibrary) -> str:
    lines = [ALLOWED_ACTIONS_HEADER]
    lines.extend(f"- {t.signature}" for t in library)
    return "\n".join(lines)


def parse_allowed_actions(text: str) -> list[str]:
    """Motion names listed in a rendered allowed-actions block."""
    names: list[str] = []
    inside = False
    for line in text.splitlines():
        if line.strip() == ALLOWED_ACTIONS_HEADER:
            inside = True
            continue
        if inside:
            if not line.startswith("- "):
                break
            names.append(line[2:].split("|")[0].strip())
    return names


def _attribute_schema() -> str:
    return "\n".join([
        "Object node attributes:",
        "- name: object name as it appears in the environment",
        f"- category: one of {', '.join(CATEGORIES)}",
        f"- place: {', '.join(REGIONS)}, InHand(Left|Right), In(<object>) or On(<object>)",
        "- status: list of state words such as raw, chopped, mixed, cooked, empty",
        "- contents: list of object names inside a container",
        f"Only the attributes you list are checked ({', '.join(ATTRIBUTE_KEYS)}).",
    ])


_TARGET_SYSTEM = """\
You are the planning assistant of a kitchen robot that learns recipes by watching cooking videos.

Task: for one scene of the video, describe the state every affected object is in when the scene ends.

Think it through in order: read the subtitles, decide which cooking action the scene shows, \
list the objects that action touches, then write down their final attributes.

Constraints:
- Answer with a single JSON object and nothing else.
- Use {"targets": [...]} with one entry per affected object.
- If the scene shows no cooking action (greetings, commentary, tasting), answer {"unnecessary": true}.
- Use only the attributes and actions listed by the user."""

_ACTION_SYSTEM = """\
You are the planning assistant of a kitchen robot. The robot has two hands and works on symbolic object states.

Task: produce the sequence of actions that turns the environment into the target state.

Think it through in order: compare each target object with the environment, find the attributes that differ, \
choose actions whose preconditions hold at that point, and track what each hand holds after every step.

Constraints:
- Answer with a single JSON object of the form {"plan": ["Motion | arg | arg", ...]}.
- Each step is one allowed action with its arguments in the listed order, separated by " | ".
- Hands are written "Left hand" or "Right hand"; places as in the environment (e.g. "Right storage", "In(Bowl)")."""


def build_target_prompt(
    scene: SceneRecord, config: PlannerConfig, images: Sequence[str] = ()
) -> PromptMessages:
    examples = fewshot_examples()["targets"]
    shots = "\n\n".join(
        f"Subtitles: {ex['subtitles']}\nAnswer:\n{_json_block(ex['response'])}" for ex in examples
    )
    parts = [
        allowed_actions(config.library),
        _attribute_schema(),
        f"Examples:\n\n{shots}",
        f"Scene {scene.scene_id} subtitles:\n{scene.text}",
    ]
    if images:
        parts.append("Scene images:\n" + "\n".join(f"- {ref}" for ref in images))
    parts.append('Answer with {"targets": [...]} or {"unnecessary": true}.')
    return PromptMessages((
        Message("system", _TARGET_SYSTEM),
        Message("user", "\n\n".join(parts), tuple(images)),
    ))


def build_action_prompt(
    env: EnvironmentState,
    target: TargetState,
    feedback: str | None,
    config: PlannerConfig,
) -> PromptMessages:
    examples = fewshot_examples()["actions"]
    shots = "\n\n".join(
        f"Target:\n{_json_block(ex['target'])}\nAnswer:\n{_json_block(ex['response'])}"
        for ex in examples
    )
    parts = [
        allowed_actions(config.library),
        _attribute_schema(),
        f"Examples:\n\n{shots}",
        f"Environment:\n{_json_block(env_to_doc(env))}",
        f"Target:\n{_json_block(target_state_to_doc(target))}",
    ]
    if feedback:
        parts.append(
            f"{FEEDBACK_HEADER}\nYour previous plan failed validation:\n{feedback}\n"
            "Write a corrected plan for the whole scene."
        )
    parts.append('Answer with {"plan": [...]}.')
    return PromptMessages((
        Message("system", _ACTION_SYSTEM),
        Message("user", "\n\n".join(parts)),
    ))
