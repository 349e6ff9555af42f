"""Breadth-first oracle planner over ground instantiations of the library.

Used as independent ground truth in tests and as the ``oracle`` planner kind.
"""

from __future__ import annotations

import re
from collections import deque
from collections.abc import Iterator

from foonplan.core import (
    HANDS,
    RECEPTACLES,
    REGIONS,
    SURFACES,
    EnvironmentState,
    Location,
    TargetState,
)
from foonplan.errors import SearchSpaceTooLarge, UnknownObject
from foonplan.motions import (
    FunctionalUnit,
    MotionLibrary,
    Clause,
    Slot,
    Template,
    clause_slots,
    ground,
    ground_clause,
)
from foonplan.planio import PlanStep, parse_plan_line
from foonplan.validator import (
    _holds,
    _placement_mismatches,
    apply_action,
    check_goal,
    read,
)

DEFAULT_NODE_CAP = 2_000_000
_SLOT = re.compile(r"\?[A-Za-z_]\w*")


def candidate_locations(env: EnvironmentState) -> list[str]:
    """Fixed regions plus In/On every object that may legally receive things."""
    locs = [str(Location(r)) for r in REGIONS]
    for name in sorted(env.objects):
        category = env.objects[name].category
        if category in RECEPTACLES:
            locs.append(str(Location("In", name)))
        if category in SURFACES:
            locs.append(str(Location("On", name)))
    return locs


def _domains(env: EnvironmentState) -> dict[str, list[str]]:
    return {
        "object": sorted(env.objects),
        "hand": list(HANDS),
        "location": candidate_locations(env),
    }


def _derivation(clause: Clause, bound: set[str]) -> str | None:
    """Slot whose value ``clause`` pins down once its subject is bound."""
    value = clause.value
    if clause.op != "eq" or clause.key == "contents" or not isinstance(value, str):
        return None
    if not _SLOT.fullmatch(value) or clause.subject not in bound or value in bound:
        return None
    return value


def _binding_plan(template: Template) -> list[tuple[Slot, Clause | None, list]]:
    """Order slots so pinned ones are read off the state, not enumerated.

    Each entry is ``(slot, deriving clause or None, [(clause index, clause,
    slots)])`` where the listed clauses become checkable once the slot is
    bound. Hand slots go first because ``holding`` conditions pin the rest;
    otherwise the slot with the most immediately checkable clauses wins.
    """
    slots = {s.name: s for s in template.slots}
    bound: set[str] = set()
    plan = []
    while len(bound) < len(slots):
        chosen, source = None, None
        for c in template.inputs:
            name = _derivation(c, bound)
            if name is not None and name in slots:
                chosen, source = name, c
                break
        if chosen is None:
            free = [s.name for s in template.slots if s.name not in bound]

            def rank(name: str) -> tuple[bool, int]:
                ready = sum(clause_slots(c) <= bound | {name} for c in template.inputs)
                return (slots[name].kind != "hand", -ready)

            chosen = min(free, key=rank)
        bound.add(chosen)
        plan.append((slots[chosen], source, []))
    order = {slot.name: i for i, (slot, _, _) in enumerate(plan)}
    for index, c in enumerate(template.inputs):
        needed = sorted(clause_slots(c), key=order.__getitem__)
        plan[order[needed[-1]]][2].append((index, c, tuple(needed)))
    return plan


class _Grounder:
    """Memoised grounding for one library; grounding never depends on state."""

    def __init__(self, library: MotionLibrary) -> None:
        self.plans = [
            (t, {s.name: s.kind for s in t.slots}, _binding_plan(t)) for t in library
        ]
        self._clauses: dict = {}
        self._units: dict = {}

    def clause(self, motion: str, index: int, clause: Clause, slots, kinds, values):
        key = (motion, index, *(values[s] for s in slots))
        gc = self._clauses.get(key)
        if gc is None:
            gc = self._clauses[key] = ground_clause(clause, kinds, values)
        return gc

    def unit(self, template: Template, values: dict[str, str]) -> FunctionalUnit:
        key = (template.motion, *(values[s.name] for s in template.slots))
        unit = self._units.get(key)
        if unit is None:
            unit = self._units[key] = ground(template, values)
        return unit


def _pinned(env: EnvironmentState, clause: Clause, kinds, values) -> str | None:
    subject = values[clause.subject]
    if kinds[clause.subject] == "hand":
        return env.hands[subject].holding
    obj = env.objects.get(subject)
    if obj is None:
        return None
    return str(obj.place) if clause.key == "place" else getattr(obj, clause.key)


def ground_actions(
    env: EnvironmentState, library: MotionLibrary, grounder: _Grounder | None = None
) -> Iterator[FunctionalUnit]:
    """Every feasible ground unit in ``env`` (unordered)."""
    grounder = grounder or _Grounder(library)
    domains = {kind: (values, set(values)) for kind, values in _domains(env).items()}
    for template, kinds, plan in grounder.plans:
        motion = template.motion
        values: dict[str, str] = {}

        def bind(i: int) -> Iterator[FunctionalUnit]:
            if i == len(plan):
                # every input clause was checked while binding
                unit = grounder.unit(template, values)
                if not _placement_mismatches(env, unit):
                    yield unit
                return
            slot, source, checks = plan[i]
            listed, allowed = domains[slot.kind]
            if source is None:
                candidates = listed
            else:
                value = _pinned(env, source, kinds, values)
                candidates = (value,) if value in allowed else ()
            for value in candidates:
                values[slot.name] = value
                ok = True
                for index, clause, slots in checks:
                    gc = grounder.clause(motion, index, clause, slots, kinds, values)
                    try:
                        if not _holds(gc, read(env, gc)):
                            ok = False
                            break
                    except UnknownObject:
                        ok = False
                        break
                if ok:
                    yield from bind(i + 1)
            values.pop(slot.name, None)

        yield from bind(0)


def oracle_plan(
    env: EnvironmentState,
    target: TargetState,
    library: MotionLibrary,
    depth: int = 8,
    node_cap: int = DEFAULT_NODE_CAP,
) -> list[PlanStep] | None:
    """Shortest plan reaching ``target`` within ``depth`` steps, or None.

    Among equally short plans the lexicographically smallest sequence of step
    texts wins. Raises SearchSpaceTooLarge once more than ``node_cap`` states
    have been expanded.
    """
    if depth < 1:
        raise ValueError("depth bound must be at least 1")
    if check_goal(env, target).satisfied:
        return []
    grounder = _Grounder(library)
    seen = {env.key}
    frontier: deque[tuple[EnvironmentState, tuple[str, ...]]] = deque([(env, ())])
    expanded = 0
    while frontier:
        state, path = frontier.popleft()
        if len(path) >= depth:
            continue
        expanded += 1
        if expanded > node_cap:
            raise SearchSpaceTooLarge(node_cap)
        for unit in sorted(ground_actions(state, library, grounder), key=lambda u: u.step):
            nxt = apply_action(state, unit, verify=False)
            if nxt.key in seen:
                continue
            seen.add(nxt.key)
            steps = path + (unit.step,)
            if check_goal(nxt, target).satisfied:
                return [parse_plan_line(s) for s in steps]
            frontier.append((nxt, steps))
    return None
