"""Pluggable planners.

Every planner answers a :class:`PlannerRequest` with raw response text, just
as a chat model would. Besides the remote HTTP client there are offline
stand-ins used for tests and reproducible runs:

* ``ScriptedPlanner`` replays canned responses round by round.
* ``CorrectingPlanner`` starts from a correct script with injected faults and
  repairs one fault per round using the feedback it is given.
* ``FaultyPlanner`` corrupts steps at random and never learns.
* ``OraclePlanner`` answers with a breadth-first search plan.
"""

from __future__ import annotations

import json
import random
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from foonplan.core import HANDS, EnvironmentState, Location, TargetState, hand_token
from foonplan.errors import ParseError, PlannerTransport, SlotDomainError
from foonplan.motions import MotionLibrary, Slot, bind_token
from foonplan.orchestrator.config import PlannerConfig
from foonplan.orchestrator.feedback import failed_action, render_feedback
from foonplan.orchestrator.prompts import PromptMessages
from foonplan.orchestrator.search import candidate_locations, oracle_plan
from foonplan.planio import PlanStep, parse_plan_line
from foonplan.validator import check_goal, validate_plan

STAGES = ("targets", "actions")
FAULT_KINDS = ("hand", "object", "place", "omit")
_SLOT_OF = {"hand": "hand", "object": "object", "place": "location"}


@dataclass(frozen=True)
class PlannerRequest:
    """Everything a planner may look at for one call.

    ``round`` counts from 1 within a scene. ``env`` and ``target`` are only
    set for the action stage; offline planners use them, remote ones see
    only ``messages``.
    """

    stage: str
    scene_id: int
    round: int
    messages: PromptMessages
    feedback: str | None = None
    env: EnvironmentState | None = None
    target: TargetState | None = None

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.round < 1:
            raise ValueError("rounds count from 1")


class Planner(Protocol):
    def respond(self, request: PlannerRequest) -> str: ...


def plan_response(steps: Sequence[PlanStep | str]) -> str:
    return json.dumps({"plan": [str(s) for s in steps]}, ensure_ascii=False)


# -- fixtures


def _as_text(response: Any) -> str:
    return response if isinstance(response, str) else json.dumps(response, ensure_ascii=False)


@dataclass(frozen=True)
class Script:
    """Parsed planner fixture: per-scene response lists plus optional extras."""

    scenes: Mapping[int, tuple[str, ...]]
    targets: Mapping[int, str] = field(default_factory=dict)
    faults: tuple[Mapping, ...] = ()

    @classmethod
    def from_doc(cls, doc: Any, source: str = "$") -> Script:
        if not isinstance(doc, Mapping) or not isinstance(doc.get("scenes"), Mapping):
            raise ParseError("fixture needs a 'scenes' object", source)
        scenes = {}
        for key, responses in doc["scenes"].items():
            if not isinstance(responses, list) or not responses:
                raise ParseError(f"scene {key}: expected a non-empty list of responses", source)
            scenes[_scene_key(key, source)] = tuple(_as_text(r) for r in responses)
        targets = {
            _scene_key(k, source): _as_text(v) for k, v in doc.get("targets", {}).items()
        }
        faults = doc.get("faults", [])
        if not isinstance(faults, list) or not all(isinstance(f, Mapping) for f in faults):
            raise ParseError("'faults' must be a list of objects", source)
        return cls(scenes, targets, tuple(faults))

    @classmethod
    def load(cls, path: str | Path) -> Script:
        path = Path(path)
        try:
            doc = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, f"{path}: line {exc.lineno}") from None
        return cls.from_doc(doc, str(path))

    def response(self, stage: str, scene_id: int, round: int) -> str:
        if stage == "targets":
            if scene_id not in self.targets:
                raise ParseError(f"no scripted target estimate for scene {scene_id}")
            return self.targets[scene_id]
        if scene_id not in self.scenes:
            raise ParseError(f"no scripted response for scene {scene_id}")
        responses = self.scenes[scene_id]
        return responses[min(round, len(responses)) - 1]

    def reference_steps(self, scene_id: int) -> list[PlanStep]:
        """First-round response of a scene, read as a list of steps."""
        doc = json.loads(self.response("actions", scene_id, 1))
        return [parse_plan_line(s) for s in doc["plan"]]


def _scene_key(key: Any, source: str) -> int:
    try:
        return int(key)
    except (TypeError, ValueError):
        raise ParseError(f"scene key {key!r} is not an integer", source) from None


class ScriptedPlanner:
    def __init__(self, script: Script) -> None:
        self.script = script

    def respond(self, request: PlannerRequest) -> str:
        return self.script.response(request.stage, request.scene_id, request.round)


# -- corruption


@dataclass(frozen=True)
class Fault:
    """One injected mistake: ``step`` indexes the reference plan.

    ``arg`` and ``token`` say which argument is overwritten and with what;
    they are unused for ``omit``.
    """

    step: int
    kind: str
    arg: int = 0
    token: str = ""

    def __post_init__(self) -> None:
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"fault kind must be one of {FAULT_KINDS}, got {self.kind!r}")

    @classmethod
    def from_doc(cls, doc: Mapping) -> Fault:
        return cls(int(doc["step"]), doc["kind"], int(doc.get("arg", 0)), doc.get("token", ""))

    def apply(self, step: PlanStep) -> PlanStep | None:
        if self.kind == "omit":
            return None
        args = list(step.args)
        args[self.arg] = self.token
        return PlanStep(step.motion, tuple(args))


def _slot_positions(library: MotionLibrary, step: PlanStep, kind: str) -> list[int]:
    if step.motion not in library:
        return []
    slots = library.get(step.motion).slots
    return [i for i, s in enumerate(slots) if s.kind == kind and i < len(step.args)]


def random_fault(
    step_index: int,
    step: PlanStep,
    env: EnvironmentState,
    library: MotionLibrary,
    rng: random.Random,
) -> Fault:
    """A seeded mistake on one step; the rewritten step always differs."""
    kinds = [k for k in FAULT_KINDS if k == "omit" or _slot_positions(library, step, _SLOT_OF[k])]
    kind = rng.choice(kinds)
    if kind == "omit":
        return Fault(step_index, "omit")
    arg = rng.choice(_slot_positions(library, step, _SLOT_OF[kind]))
    if kind == "hand":
        pool = [hand_token(h) for h in HANDS]
    elif kind == "object":
        pool = sorted(env.objects)
    else:
        pool = [Location.parse(loc).plan_token() for loc in candidate_locations(env)]
    slot = library.get(step.motion).slots[arg]
    pool = [t for t in pool if _canonical(slot, t) != _canonical(slot, step.args[arg])]
    if not pool:
        return Fault(step_index, "omit")
    return Fault(step_index, kind, arg, rng.choice(pool))


def _canonical(slot: Slot, token: str) -> str:
    try:
        return bind_token(slot, token)
    except SlotDomainError:
        return token


class _FaultyPlan:
    """A reference plan with some faults still in place."""

    def __init__(self, reference: Sequence[PlanStep], faults: Sequence[Fault]) -> None:
        self.reference = list(reference)
        self.open = sorted(faults, key=lambda f: f.step)

    def steps(self) -> list[tuple[int, PlanStep]]:
        by_step = {f.step: f for f in self.open}
        out = []
        for i, step in enumerate(self.reference):
            fault = by_step.get(i)
            changed = fault.apply(step) if fault else step
            if changed is not None:
                out.append((i, changed))
        return out

    def repair(self, feedback: str | None) -> None:
        """Undo the fault the feedback blames, else the earliest open one."""
        if not self.open:
            return
        index = failed_action(feedback or "")
        steps = self.steps()
        if index is not None and index < len(steps):
            ref = steps[index][0]
            for fault in self.open:
                if fault.step == ref and fault.kind != "omit":
                    self.open.remove(fault)
                    return
        self.open.pop(0)


def _rounds_to_converge(
    env: EnvironmentState,
    target: TargetState,
    reference: Sequence[PlanStep],
    faults: Sequence[Fault],
    library: MotionLibrary,
    budget: int,
) -> int | None:
    plan = _FaultyPlan(reference, faults)
    for rnd in range(1, budget + 1):
        result = validate_plan(env, [s for _, s in plan.steps()], library)
        if result.ok:
            report = check_goal(result.env, target)
            if report.satisfied:
                return rnd
            feedback = render_feedback(report)
        else:
            feedback = render_feedback(result.diagnosis)
        plan.repair(feedback)
    return None


class CorrectingPlanner:
    """Scripted planner with injected faults that it repairs from feedback.

    Faults come from the fixture's ``faults`` list (``{"scene", "step",
    "kind", "arg", "token"}``) or, when ``faults`` is given, are drawn with a
    seeded RNG and spread over the scripted scenes. Drawn faults are chosen
    so that a scene with k of them needs exactly k + 1 rounds.
    """

    def __init__(
        self,
        script: Script,
        library: MotionLibrary,
        faults: int | None = None,
        seed: int = 0,
        budget: int = 10,
    ) -> None:
        self.script = script
        self.library = library
        self.seed = seed
        self.budget = budget
        self._explicit: dict[int, list[Fault]] = {}
        for doc in script.faults:
            self._explicit.setdefault(int(doc["scene"]), []).append(Fault.from_doc(doc))
        self._quota: dict[int, int] = {}
        if faults:
            rng = random.Random(f"{seed}:faults")
            scenes = sorted(s for s in script.scenes if script.reference_steps(s))
            if not scenes:
                raise ValueError("the fixture has no non-empty scene to inject faults into")
            for _ in range(faults):
                scene = rng.choice(scenes)
                self._quota[scene] = self._quota.get(scene, 0) + 1
        self._faults: dict[int, list[Fault]] = {}
        self._plans: dict[int, _FaultyPlan] = {}

    def injected(self, scene_id: int) -> list[Fault]:
        return list(self._faults.get(scene_id, self._explicit.get(scene_id, [])))

    def _draw(self, request: PlannerRequest, reference: list[PlanStep]) -> list[Fault]:
        wanted = self._quota.get(request.scene_id, 0)
        if not wanted:
            return []
        wanted = min(wanted, len(reference), self.budget - 1)
        rng = random.Random(f"{self.seed}:{request.scene_id}")
        # an unchecked run can reach a scene in a state the script never planned
        # for; the round count cannot be controlled then, so any faults will do
        calibrate = _rounds_to_converge(
            request.env, request.target, reference, [], self.library, 1
        ) == 1
        for _ in range(500):
            positions = sorted(rng.sample(range(len(reference)), wanted))
            faults = [
                random_fault(i, reference[i], request.env, self.library, rng) for i in positions
            ]
            if not calibrate:
                return faults
            rounds = _rounds_to_converge(
                request.env, request.target, reference, faults, self.library, self.budget
            )
            if rounds == wanted + 1:
                return faults
        raise ValueError(f"could not inject {wanted} detectable faults into scene {request.scene_id}")

    def respond(self, request: PlannerRequest) -> str:
        if request.stage == "targets":
            return self.script.response("targets", request.scene_id, 1)
        reference = self.script.reference_steps(request.scene_id)
        scene = request.scene_id
        if request.round == 1 or scene not in self._plans:
            if scene not in self._faults:
                if scene in self._explicit:
                    self._faults[scene] = self._explicit[scene]
                else:
                    self._faults[scene] = self._draw(request, reference)
            self._plans[scene] = _FaultyPlan(reference, self._faults[scene])
        else:
            self._plans[scene].repair(request.feedback)
        return plan_response([s for _, s in self._plans[scene].steps()])


class FaultyPlanner:
    """Corrupts each scripted step with probability ``error_rate``.

    The RNG is keyed by (seed, scene, round), so a validated run and an
    unvalidated run on the same seed see identical first-round plans.
    Feedback is ignored.
    """

    def __init__(
        self, script: Script, library: MotionLibrary, error_rate: float, seed: int = 0
    ) -> None:
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError(f"error rate must lie in [0, 1], got {error_rate}")
        self.script = script
        self.library = library
        self.error_rate = error_rate
        self.seed = seed

    def respond(self, request: PlannerRequest) -> str:
        if request.stage == "targets":
            return self.script.response("targets", request.scene_id, 1)
        reference = self.script.reference_steps(request.scene_id)
        rng = random.Random(f"{self.seed}:{request.scene_id}:{request.round}")
        steps = []
        for i, step in enumerate(reference):
            if rng.random() < self.error_rate:
                changed = random_fault(i, step, request.env, self.library, rng).apply(step)
                if changed is not None:
                    steps.append(changed)
            else:
                steps.append(step)
        return plan_response(steps)


class OraclePlanner:
    """Answers the action stage with the shortest plan found by search."""

    def __init__(self, library: MotionLibrary, depth: int = 8) -> None:
        if depth < 1:
            raise ValueError("depth bound must be at least 1")
        self.library = library
        self.depth = depth

    def respond(self, request: PlannerRequest) -> str:
        if request.stage != "actions" or request.env is None or request.target is None:
            raise ValueError("the oracle planner only answers the action stage")
        plan = oracle_plan(request.env, request.target, self.library, self.depth)
        return plan_response(plan or [])


class RemotePlanner:
    """Chat-completion client: POST ``{model, messages}``, read the first choice.

    Transport errors, non-2xx replies and malformed bodies are retried
    ``retries`` times with exponential backoff before PlannerTransport is
    raised.
    """

    def __init__(
        self,
        url: str,
        model: str,
        api_key: str | None = None,
        *,
        client: httpx.Client | None = None,
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if not url:
            raise ValueError("the remote planner needs an endpoint URL")
        if not model:
            raise ValueError("the remote planner needs a model name")
        self.url = url
        self.model = model
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = client or httpx.Client(timeout=timeout)
        self.headers = headers

    def respond(self, request: PlannerRequest) -> str:
        body = {"model": self.model, "messages": request.messages.to_doc()}
        last = ""
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                reply = self.client.post(self.url, json=body, headers=self.headers)
                reply.raise_for_status()
                content = reply.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if not isinstance(content, str):
                last = "response content is not text"
                continue
            return content
        raise PlannerTransport(f"{self.url}: gave up after {self.retries + 1} attempts ({last})")


def make_planner(config: PlannerConfig, client: httpx.Client | None = None) -> Planner:
    if config.kind == "oracle":
        return OraclePlanner(config.library, config.depth)
    if config.kind == "remote":
        return RemotePlanner(config.url or "", config.model or "", config.api_key, client=client)
    script = Script.load(config.fixture)
    if config.kind == "scripted":
        return ScriptedPlanner(script)
    if config.kind == "correcting":
        return CorrectingPlanner(script, config.library, config.faults, config.seed, config.budget)
    return FaultyPlanner(script, config.library, config.error_rate, config.seed)
