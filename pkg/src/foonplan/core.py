"""Object, hand and environment state model.

Every value here is immutable. Actions never edit a state in place; they
build a new :class:`EnvironmentState` (see :mod:`foonplan.validator`).
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from types import MappingProxyType

from foonplan.errors import (
    DanglingReference,
    DuplicateName,
    HandInconsistency,
    StateError,
    UnknownObject,
)

CATEGORIES = ("ingredient", "container", "tool", "machine")
HANDS = ("Left", "Right")
REGIONS = ("RightStorage", "LeftStorage", "Workspace")

# categories that may appear as X in In(X) / On(X)
RECEPTACLES = frozenset({"container", "machine"})
SURFACES = frozenset({"tool", "machine"})

_REGION_ALIASES = {r.lower(): r for r in REGIONS}
_REGION_PLAN_TOKENS = {
    "RightStorage": "Right storage",
    "LeftStorage": "Left storage",
    "Workspace": "Workspace",
}
_HAND_RE = re.compile(r"^(left|right)(?:[\s_-]*hand)?$", re.IGNORECASE)
_RELATIVE_RE = re.compile(r"^(inhand|in|on)\s*\(\s*(.*?)\s*\)$", re.IGNORECASE)


def parse_hand(token: str) -> str | None:
    """Return ``"Left"``/``"Right"`` for a hand token, or None."""
    m = _HAND_RE.match(token.strip())
    return m.group(1).capitalize() if m else None


def hand_label(hand: str) -> str:
    return f"{hand}Hand"


def hand_token(hand: str) -> str:
    return f"{hand} hand"


@dataclass(frozen=True, order=True)
class Location:
    """Symbolic placement of an object.

    ``kind`` is one of the three fixed regions, or ``InHand``/``In``/``On``
    with ``ref`` naming the hand or the supporting object.
    """

    kind: str
    ref: str | None = None

    def __post_init__(self) -> None:
        if self.kind in REGIONS:
            if self.ref is not None:
                raise ValueError(f"{self.kind} takes no referent")
        elif self.kind == "InHand":
            if self.ref not in HANDS:
                raise ValueError(f"bad hand {self.ref!r}")
        elif self.kind in ("In", "On"):
            if not self.ref:
                raise ValueError(f"{self.kind} needs an object name")
        else:
            raise ValueError(f"bad location kind {self.kind!r}")

    def __str__(self) -> str:
        if self.ref is None:
            return self.kind
        return f"{self.kind}({self.ref})"

    @property
    def referent(self) -> str | None:
        """Object this location points at (None for regions and hands)."""
        return self.ref if self.kind in ("In", "On") else None

    def plan_token(self) -> str:
        """Rendering used inside pipe-delimited plan lines."""
        return _REGION_PLAN_TOKENS.get(self.kind, str(self))

    @classmethod
    def parse(cls, text: str) -> Location:
        return _parse_location(text)


@lru_cache(maxsize=4096)
def _parse_location(text: str) -> Location:
    s = text.strip()
    region = _REGION_ALIASES.get(re.sub(r"[\s_-]+", "", s).lower())
    if region:
        return Location(region)
    m = _RELATIVE_RE.match(s)
    if not m:
        raise ValueError(f"not a location: {text!r}")
    kind = {"inhand": "InHand", "in": "In", "on": "On"}[m.group(1).lower()]
    ref = m.group(2)
    if kind == "InHand":
        hand = parse_hand(ref)
        if hand is None:
            raise ValueError(f"not a hand: {ref!r}")
        ref = hand
    return Location(kind, ref)


def is_location_token(token: str) -> bool:
    try:
        Location.parse(token)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class ObjectState:
    name: str
    category: str
    place: Location
    status: frozenset[str] = frozenset()
    contents: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise StateError(f"{self.name!r}: unknown category {self.category!r}")
        object.__setattr__(self, "status", frozenset(self.status))
        object.__setattr__(self, "contents", tuple(self.contents))
        # states are hashed constantly during search
        object.__setattr__(
            self, "_hash",
            hash((self.name, self.category, self.place, self.status, self.contents)),
        )

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True)
class HandState:
    hand: str
    holding: str | None = None


@dataclass(frozen=True, eq=False)
class EnvironmentState:
    """All objects in the workspace plus the two hands.

    Build one with :func:`new_environment`, which checks invariants; the
    constructor itself does not.
    """

    objects: Mapping[str, ObjectState]
    hands: Mapping[str, HandState] = field(
        default_factory=lambda: {h: HandState(h) for h in HANDS}
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", MappingProxyType(dict(self.objects)))
        object.__setattr__(self, "hands", MappingProxyType(dict(self.hands)))

    @cached_property
    def key(self) -> tuple:
        """Order-independent hashable identity of the state."""
        return (
            frozenset(self.objects.values()),
            tuple(self.hands[h].holding for h in HANDS),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EnvironmentState):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        held = {h: s.holding for h, s in self.hands.items()}
        return f"EnvironmentState({list(self.objects)}, hands={held})"

    def obj(self, name: str) -> ObjectState:
        try:
            return self.objects[name]
        except KeyError:
            raise UnknownObject(name) from None

    def hand(self, hand: str) -> HandState:
        return self.hands[hand]

    def replace(
        self,
        objects: Mapping[str, ObjectState] | None = None,
        hands: Mapping[str, HandState] | None = None,
    ) -> EnvironmentState:
        """Copy with some objects/hands swapped out; no validation."""
        objs = dict(self.objects)
        if objects:
            objs.update(objects)
        hs = dict(self.hands)
        if hands:
            hs.update(hands)
        return EnvironmentState(objs, hs)

    def encloses(self, outer: str, name: str) -> bool:
        """True if ``name`` sits (transitively) in/on ``outer``."""
        seen = set()
        current = self.objects.get(name)
        while current is not None and current.name not in seen:
            seen.add(current.name)
            ref = current.place.referent
            if ref is None:
                return False
            if ref == outer:
                return True
            current = self.objects.get(ref)
        return False


def audit(env: EnvironmentState) -> None:
    """Raise a StateError subclass if any environment invariant fails."""
    objects = env.objects
    if set(env.hands) != set(HANDS):
        raise StateError(f"hands must be exactly {HANDS}, got {sorted(env.hands)}")
    for name, obj in objects.items():
        if name != obj.name:
            raise StateError(f"object keyed {name!r} is named {obj.name!r}")
        ref = obj.place.referent
        if ref is not None:
            if ref not in objects:
                raise DanglingReference(name, ref)
            if ref == name or env.encloses(name, ref):
                raise StateError(f"{name!r} is placed inside itself via {obj.place}")
            if obj.place.kind == "In":
                holder = objects[ref]
                if holder.category not in RECEPTACLES:
                    raise StateError(
                        f"{name!r} is In({ref}) but {ref!r} is a {holder.category}"
                    )
                if name not in holder.contents:
                    raise StateError(f"{ref!r} contents miss {name!r}")
        if obj.place.kind == "InHand":
            held = env.hands[obj.place.ref].holding
            if held != name:
                raise HandInconsistency(obj.place.ref, name, f"hand holds {held!r}")
        if obj.contents:
            if obj.category not in RECEPTACLES:
                raise StateError(f"{name!r} is a {obj.category} and cannot hold contents")
            if len(set(obj.contents)) != len(obj.contents):
                raise StateError(f"{name!r} lists a content twice")
            for item in obj.contents:
                if item not in objects:
                    raise DanglingReference(name, item)
                if objects[item].place != Location("In", name):
                    raise StateError(
                        f"{name!r} lists {item!r} but it is at {objects[item].place}"
                    )
    for hand, state in env.hands.items():
        if state.hand != hand:
            raise StateError(f"hand keyed {hand!r} reports {state.hand!r}")
        if state.holding is None:
            continue
        if state.holding not in objects:
            raise DanglingReference(hand_label(hand), state.holding)
        place = objects[state.holding].place
        if place != Location("InHand", hand):
            raise HandInconsistency(hand, state.holding, f"object is at {place}")


def new_environment(
    objects: Iterable[ObjectState],
    hands: Iterable[HandState] | Mapping[str, HandState] | None = None,
) -> EnvironmentState:
    """Build an EnvironmentState, checking every invariant eagerly."""
    table: dict[str, ObjectState] = {}
    for obj in objects:
        if obj.name in table:
            raise DuplicateName(obj.name)
        table[obj.name] = obj
    if hands is None:
        hand_map = {h: HandState(h) for h in HANDS}
    elif isinstance(hands, Mapping):
        hand_map = dict(hands)
    else:
        hand_map = {}
        for hs in hands:
            if hs.hand in hand_map:
                raise StateError(f"hand {hs.hand} given twice")
            hand_map[hs.hand] = hs
    env = EnvironmentState(table, hand_map)
    audit(env)
    return env


ATTRIBUTE_KEYS = ("category", "place", "status", "contents")


@dataclass(frozen=True)
class TargetNode:
    """Partial requirements on one object; None fields are wildcards."""

    name: str
    category: str | None = None
    status: frozenset[str] | None = None
    place: Location | None = None
    contents: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.status is not None:
            object.__setattr__(self, "status", frozenset(self.status))
        if self.contents is not None:
            object.__setattr__(self, "contents", tuple(self.contents))


@dataclass(frozen=True)
class TargetState:
    scene_id: int
    targets: tuple[TargetNode, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
