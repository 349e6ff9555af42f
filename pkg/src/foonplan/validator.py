"""Feasibility checking, effect application and goal checking.

An action is feasible when every input condition of its ground unit holds in
the current environment (attributes a condition does not mention are
wildcards). Infeasible actions are reported with *every* violated
requirement so a single feedback round can name all of them.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

from foonplan.core import (
    RECEPTACLES,
    SURFACES,
    EnvironmentState,
    HandState,
    Location,
    ObjectState,
    TargetState,
    audit,
)
from foonplan.errors import (
    BindingError,
    InvariantViolation,
    ParseError,
    StateError,
    UnknownMotion,
    UnknownObject,
)
from foonplan.graph import TaskGraph, append_unit
from foonplan.motions import FunctionalUnit, GroundClause, MotionLibrary, instantiate


@dataclass(frozen=True)
class Mismatch:
    subject: str
    key: str
    required: str
    actual: str
    relation: str = "="

    def __post_init__(self) -> None:
        if self.required == self.actual and self.relation == "=":
            raise ValueError(f"not a mismatch: {self}")


class DiagnosisKind(str, Enum):
    INFEASIBLE = "Infeasible"
    UNKNOWN_OBJECT = "UnknownObject"
    UNKNOWN_MOTION = "UnknownMotion"
    BINDING_ERROR = "BindingError"


@dataclass(frozen=True)
class Diagnosis:
    index: int
    step: str
    kind: DiagnosisKind
    mismatches: tuple[Mismatch, ...] = ()
    detail: str = ""

    def __post_init__(self) -> None:
        if self.kind is DiagnosisKind.INFEASIBLE and not self.mismatches:
            raise ValueError("an infeasible diagnosis needs at least one mismatch")


@dataclass(frozen=True)
class GoalReport:
    unmet: tuple[Mismatch, ...] = ()

    @property
    def satisfied(self) -> bool:
        return not self.unmet


@dataclass(frozen=True)
class PlanResult:
    """Outcome of :func:`validate_plan`.

    On failure ``env`` is the state just before the failing step and
    ``units`` is the validated prefix; ``graph`` always holds that prefix.
    """

    env: EnvironmentState
    units: tuple[FunctionalUnit, ...]
    graph: TaskGraph
    diagnosis: Diagnosis | None = None

    @property
    def ok(self) -> bool:
        return self.diagnosis is None


# -- attribute access and display


def read(env: EnvironmentState, clause: GroundClause) -> Any:
    if clause.kind == "hand":
        return env.hands[clause.subject].holding
    obj = env.obj(clause.subject)
    if clause.key == "place":
        return str(obj.place)
    return getattr(obj, clause.key)


def show(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, frozenset):
        return ", ".join(sorted(value)) if value else "none"
    if isinstance(value, tuple):
        return "[" + ", ".join(value) + "]"
    return str(value)


def _holds(clause: GroundClause, actual: Any) -> bool:
    op, value = clause.op, clause.value
    if op == "eq":
        if clause.key == "status":
            return actual == frozenset(value if isinstance(value, tuple) else (value,))
        return actual == value
    if op == "ne":
        return actual != value
    if op == "in":
        return actual in value
    if op == "nin":
        return actual not in value
    if op == "has":
        return value in actual
    if op == "nonempty":
        return bool(actual)
    raise ValueError(f"unknown condition op {op!r}")


def _mismatch(clause: GroundClause, actual: Any) -> Mismatch:
    op, value = clause.op, clause.value
    if op == "nonempty":
        return Mismatch(clause.label, clause.key, "non-empty", show(actual))
    if op == "in":
        return Mismatch(clause.label, clause.key, "{" + ", ".join(value) + "}", show(actual), "∈")
    if op == "nin":
        return Mismatch(clause.label, clause.key, "{" + ", ".join(value) + "}", show(actual), "∉")
    if op == "ne":
        return Mismatch(clause.label, clause.key, show(value), show(actual), "≠")
    if op == "has":
        rel = "⊇" if clause.key == "status" else "∋"
        return Mismatch(clause.label, clause.key, show(value), show(actual), rel)
    if clause.key == "status" and isinstance(value, tuple):
        return Mismatch(clause.label, clause.key, show(frozenset(value)), show(actual))
    return Mismatch(clause.label, clause.key, show(value), show(actual))


# -- actions


def _placements(env: EnvironmentState, unit: FunctionalUnit) -> list[tuple[str, Location]]:
    moves = []
    for c in unit.outputs:
        if c.key != "place":
            continue
        names = env.obj(c.subject).contents if c.kind == "contents" else (c.subject,)
        loc = Location.parse(c.value)
        moves.extend((n, loc) for n in names)
    return moves


def _placement_mismatches(env: EnvironmentState, unit: FunctionalUnit) -> list[Mismatch]:
    """Destination legality for every object the unit would move."""
    found = []
    for name, loc in _placements(env, unit):
        ref = loc.referent
        if ref is None:
            continue
        holder = env.obj(ref)
        allowed = RECEPTACLES if loc.kind == "In" else SURFACES
        if holder.category not in allowed:
            found.append(Mismatch(
                ref, "category", "{" + ", ".join(sorted(allowed)) + "}",
                holder.category, "∈",
            ))
        if ref == name or env.encloses(name, ref):
            found.append(Mismatch(name, "place", str(loc), "containment cycle", "≠"))
    return found


def check_action(env: EnvironmentState, unit: FunctionalUnit) -> Diagnosis | None:
    """None when ``unit`` is feasible in ``env``, else an Infeasible diagnosis.

    Raises UnknownObject when the unit names an object missing from ``env``.
    Besides the template's own input conditions, every destination the unit
    would move an object to must be legal: ``In(x)`` needs a container or
    machine, ``On(x)`` a tool or machine, and nothing may end up inside itself.
    """
    for name in unit.objects():
        env.obj(name)
    found: list[Mismatch] = []
    for clause in unit.inputs:
        actual = read(env, clause)
        if not _holds(clause, actual):
            found.append(_mismatch(clause, actual))
    for m in _placement_mismatches(env, unit):
        if m not in found:
            found.append(m)
    if not found:
        return None
    return Diagnosis(0, unit.step, DiagnosisKind.INFEASIBLE, tuple(found))


def apply_action(
    env: EnvironmentState, unit: FunctionalUnit, verify: bool = True
) -> EnvironmentState:
    """Return the state after ``unit``'s effects; ``env`` is left untouched.

    All effects read their subjects from the pre-state, so they apply
    atomically. Container contents are then rebuilt from the new placements
    and the result is audited; an inconsistent result raises
    InvariantViolation. ``verify=False`` skips the audit, for callers that
    already ran check_action on ``unit``.
    """
    objects: dict[str, ObjectState] = dict(env.objects)
    hands: dict[str, HandState] = dict(env.hands)
    moved: list[str] = []

    for c in unit.outputs:
        if c.kind == "hand":
            hands[c.subject] = HandState(c.subject, c.value)
            continue
        names = env.obj(c.subject).contents if c.kind == "contents" else (c.subject,)
        for name in names:
            obj = objects.get(name)
            if obj is None:
                raise UnknownObject(name)
            place, status = obj.place, obj.status
            if c.key == "place":
                place = Location.parse(c.value)
                if name not in moved:
                    moved.append(name)
            elif c.op == "add":
                status = status | {c.value}
            elif c.op == "remove":
                status = status - {c.value}
            else:
                status = frozenset(c.value if isinstance(c.value, tuple) else (c.value,))
            # direct construction: dataclasses.replace is slow in the search loop
            objects[name] = ObjectState(obj.name, obj.category, place, status, obj.contents)

    touched: list[str] = []
    for name in moved:
        for loc in (env.objects[name].place, objects[name].place):
            if loc.kind == "In" and loc.ref not in touched:
                touched.append(loc.ref)
    for holder_name in touched:
        holder = objects.get(holder_name)
        if holder is None:
            raise InvariantViolation(f"{holder_name!r} does not exist")
        inside = Location("In", holder_name)
        kept = [n for n in holder.contents if objects[n].place == inside]
        added = [n for n in moved if objects[n].place == inside and n not in kept]
        objects[holder_name] = ObjectState(
            holder.name, holder.category, holder.place, holder.status, tuple(kept + added)
        )

    new = EnvironmentState(objects, hands)
    if not verify:
        return new
    try:
        audit(new)
    except StateError as exc:
        raise InvariantViolation(f"{unit.step}: {exc}") from exc
    return new


def _diagnose_error(index: int, step: str, exc: Exception) -> Diagnosis:
    if isinstance(exc, UnknownObject):
        kind = DiagnosisKind.UNKNOWN_OBJECT
    elif isinstance(exc, UnknownMotion):
        kind = DiagnosisKind.UNKNOWN_MOTION
    else:
        kind = DiagnosisKind.BINDING_ERROR
    return Diagnosis(index, step, kind, (), str(exc))


def validate_plan(
    env: EnvironmentState,
    steps: Sequence,
    library: MotionLibrary,
    graph: TaskGraph | None = None,
) -> PlanResult:
    """Instantiate, check and apply each step in order.

    Stops at the first failing step. ``steps`` holds PlanStep objects or raw
    pipe-delimited lines. New units are appended to ``graph`` (an empty graph
    by default), so a caller can grow one graph across several plans.
    """
    from foonplan.planio import PlanStep, parse_plan_line

    graph = graph if graph is not None else TaskGraph()
    units: list[FunctionalUnit] = []
    for i, raw in enumerate(steps):
        text = raw if isinstance(raw, str) else str(raw)
        try:
            step = raw if isinstance(raw, PlanStep) else parse_plan_line(raw)
            unit = instantiate(library, step)
            diagnosis = check_action(env, unit)
        except (BindingError, ParseError, UnknownObject) as exc:
            diagnosis = _diagnose_error(i, text, exc)
        if diagnosis is not None:
            diagnosis = dataclasses.replace(diagnosis, index=i)
            return PlanResult(env, tuple(units), graph, diagnosis)
        post = apply_action(env, unit)
        graph = append_unit(graph, unit, env, post)
        units.append(unit)
        env = post
    return PlanResult(env, tuple(units), graph)


def replay(
    env: EnvironmentState, units: Iterable[FunctionalUnit]
) -> tuple[EnvironmentState, list[Diagnosis]]:
    """Execute ``units`` in order, skipping (and reporting) infeasible ones.

    This is the audit used for unvalidated graphs: a step that is not
    feasible cannot be executed, so the state stays as it was.
    """
    problems: list[Diagnosis] = []
    for i, unit in enumerate(units):
        try:
            diagnosis = check_action(env, unit)
        except UnknownObject as exc:
            diagnosis = _diagnose_error(i, unit.step, exc)
        if diagnosis is not None:
            problems.append(dataclasses.replace(diagnosis, index=i))
            continue
        env = apply_action(env, unit)
    return env, problems


# -- goals


def check_goal(env: EnvironmentState, target: TargetState) -> GoalReport:
    """Compare target requirements against the environment.

    Status uses subset semantics, contents compare as multisets, everything
    else is exact. Unknown target objects become unmet entries.
    """
    unmet: list[Mismatch] = []
    for node in target.targets:
        obj = env.objects.get(node.name)
        if obj is None:
            unmet.append(Mismatch(node.name, "exists", "present", "absent"))
            continue
        if node.category is not None and node.category != obj.category:
            unmet.append(Mismatch(node.name, "category", node.category, obj.category))
        if node.status is not None and not node.status <= obj.status:
            unmet.append(
                Mismatch(node.name, "status", show(node.status), show(obj.status), "⊇")
            )
        if node.place is not None and node.place != obj.place:
            unmet.append(Mismatch(node.name, "place", str(node.place), str(obj.place)))
        if node.contents is not None and sorted(node.contents) != sorted(obj.contents):
            unmet.append(
                Mismatch(node.name, "contents", show(node.contents), show(obj.contents))
            )
    return GoalReport(tuple(unmet))
