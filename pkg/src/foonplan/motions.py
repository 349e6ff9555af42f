"""Functional-unit templates and their instantiation from plan steps.

A template's clauses mention slots such as ``?obj`` or ``?hand``; binding a
plan step's arguments to those slots (positionally) yields a ground
:class:`FunctionalUnit` that the validator can check and apply.

Clause records are ``{subject, key, value, op}``. Subjects are a slot
reference (``?obj``) or, in effects only, ``contents(?slot)`` meaning "every
object currently inside that container". Condition ops are ``eq`` (default),
``ne``, ``in``, ``nin``, ``has`` and ``nonempty``; effect ops are ``set``
(default), ``add`` and ``remove``. The value ``"$cut_surfaces"`` expands to
On/In of every configured cut surface and ``"$cut_surface_names"`` to their
names.
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import TYPE_CHECKING, Any

from foonplan.core import Location, hand_label, hand_token, is_location_token, parse_hand
from foonplan.errors import (
    ArityMismatch,
    DuplicateMotion,
    ParseError,
    SlotDomainError,
    UnboundSlot,
    UnknownMotion,
)

if TYPE_CHECKING:
    from foonplan.planio import PlanStep

SLOT_KINDS = ("object", "hand", "location")
CONDITION_OPS = ("eq", "ne", "in", "nin", "has", "nonempty")
EFFECT_OPS = ("set", "add", "remove")
CONDITION_KEYS = ("name", "category", "place", "status", "contents", "holding")
EFFECT_KEYS = ("place", "status", "holding")
DEFAULT_CUT_SURFACES = ("Cutting board",)
CUT_SURFACE_PLACEHOLDER = "$cut_surfaces"
CUT_SURFACE_NAMES_PLACEHOLDER = "$cut_surface_names"

_SLOT_REF = re.compile(r"\?[A-Za-z_]\w*")
_CONTENTS_SUBJECT = re.compile(r"^contents\((\?[A-Za-z_]\w*)\)$")


@dataclass(frozen=True)
class Slot:
    name: str
    kind: str


@dataclass(frozen=True)
class Clause:
    """Template-level condition or effect; values may mention slots."""

    subject: str
    key: str
    value: Any
    op: str = "eq"


@dataclass(frozen=True)
class Template:
    motion: str
    slots: tuple[Slot, ...]
    inputs: tuple[Clause, ...]
    outputs: tuple[Clause, ...]

    @property
    def signature(self) -> str:
        return " | ".join([self.motion, *(s.name for s in self.slots)])


@dataclass(frozen=True)
class GroundClause:
    """A fully resolved clause.

    ``kind`` is ``object``, ``hand`` (subject is ``Left``/``Right``) or
    ``contents`` (subject is the container whose contents are affected).
    """

    kind: str
    subject: str
    key: str
    value: Any
    op: str = "eq"

    @property
    def label(self) -> str:
        if self.kind == "hand":
            return hand_label(self.subject)
        if self.kind == "contents":
            return f"contents({self.subject})"
        return self.subject


@dataclass(frozen=True)
class Binding:
    slot: str
    kind: str
    value: str

    @property
    def token(self) -> str:
        """Plan-line rendering of the bound value."""
        if self.kind == "hand":
            return hand_token(self.value)
        if self.kind == "location":
            return Location.parse(self.value).plan_token()
        return self.value


@dataclass(frozen=True)
class FunctionalUnit:
    motion: str
    bindings: tuple[Binding, ...]
    inputs: tuple[GroundClause, ...]
    outputs: tuple[GroundClause, ...]

    @cached_property
    def step(self) -> str:
        return " | ".join([self.motion, *(b.token for b in self.bindings)])

    def objects(self) -> list[str]:
        """Objects named by the bindings, including location referents."""
        names: list[str] = []
        for b in self.bindings:
            if b.kind == "object":
                name = b.value
            elif b.kind == "location":
                name = Location.parse(b.value).referent
            else:
                continue
            if name is not None and name not in names:
                names.append(name)
        return names

    def hands(self) -> list[str]:
        return [b.value for b in self.bindings if b.kind == "hand"]


@dataclass(frozen=True)
class MotionLibrary:
    """Templates keyed by motion name; lookup ignores case."""

    templates: tuple[Template, ...]
    _index: dict[str, Template] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "templates", tuple(self.templates))
        index: dict[str, Template] = {}
        for t in self.templates:
            key = t.motion.lower()
            if key in index:
                raise DuplicateMotion(t.motion)
            index[key] = t
        object.__setattr__(self, "_index", index)

    def get(self, name: str) -> Template:
        try:
            return self._index[name.strip().lower()]
        except KeyError:
            raise UnknownMotion(name) from None

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and name.strip().lower() in self._index

    def __iter__(self) -> Iterator[Template]:
        return iter(self.templates)

    def __len__(self) -> int:
        return len(self.templates)

    @property
    def names(self) -> list[str]:
        return [t.motion for t in self.templates]


# -- loading


def _expand_placeholder(value: Any, cut_surfaces: Sequence[str]) -> Any:
    if value == CUT_SURFACE_PLACEHOLDER:
        return [f"{kind}({s})" for s in cut_surfaces for kind in ("On", "In")]
    if value == CUT_SURFACE_NAMES_PLACEHOLDER:
        return list(cut_surfaces)
    return value


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _slot_refs(value: Any) -> list[str]:
    if isinstance(value, str):
        return _SLOT_REF.findall(value)
    if isinstance(value, (list, tuple)):
        return [r for v in value for r in _slot_refs(v)]
    return []


def _require(record: Mapping, key: str, path: str) -> Any:
    if not isinstance(record, Mapping):
        raise ParseError("expected an object", path)
    if key not in record:
        raise ParseError(f"missing field {key!r}", path)
    return record[key]


def _parse_clause(
    record: Any, path: str, slots: dict[str, Slot], motion: str, effect: bool,
    cut_surfaces: Sequence[str],
) -> Clause:
    subject = _require(record, "subject", path)
    key = _require(record, "key", path)
    value = _expand_placeholder(_require(record, "value", path), cut_surfaces)
    op = record.get("op", "set" if effect else "eq")
    if not isinstance(subject, str) or not isinstance(key, str):
        raise ParseError("subject and key must be strings", path)

    m = _CONTENTS_SUBJECT.match(subject)
    if m:
        if not effect:
            raise ParseError("contents(...) subjects are only allowed in outputs", path)
        slot_name = m.group(1)
    elif _SLOT_REF.fullmatch(subject):
        slot_name = subject
    else:
        raise ParseError(f"bad subject {subject!r}", path)
    for ref in [slot_name, *_slot_refs(value)]:
        if ref not in slots:
            raise UnboundSlot(motion, ref)

    kind = slots[slot_name].kind
    if kind == "location":
        raise ParseError(f"location slot {slot_name} cannot be a subject", path)
    if m and kind != "object":
        raise ParseError("contents(...) needs an object slot", path)
    keys = EFFECT_KEYS if effect else CONDITION_KEYS
    ops = EFFECT_OPS if effect else CONDITION_OPS
    if key not in keys:
        raise ParseError(f"key {key!r} not allowed here", path)
    if op not in ops:
        raise ParseError(f"op {op!r} not allowed here", path)
    if (kind == "hand") != (key == "holding"):
        raise ParseError("holding applies to hand slots only", path)
    if op in ("add", "remove") and key != "status":
        raise ParseError(f"{op} applies to status only", path)
    if op == "has" and key not in ("status", "contents"):
        raise ParseError("has applies to status/contents only", path)
    if op == "nonempty" and key != "contents":
        raise ParseError("nonempty applies to contents only", path)
    return Clause(subject, key, _freeze(value), op)


def _parse_template(record: Any, path: str, cut_surfaces: Sequence[str]) -> Template:
    motion = _require(record, "motion", path)
    if not isinstance(motion, str) or not motion.strip():
        raise ParseError("motion must be a non-empty string", path)
    slots: dict[str, Slot] = {}
    raw_slots = _require(record, "slots", path)
    if not isinstance(raw_slots, list):
        raise ParseError("slots must be a list", f"{path}.slots")
    for i, s in enumerate(raw_slots):
        spath = f"{path}.slots[{i}]"
        name = _require(s, "name", spath)
        kind = _require(s, "kind", spath)
        if not isinstance(name, str) or not name:
            raise ParseError("slot name must be a non-empty string", spath)
        if not name.startswith("?"):
            name = "?" + name
        if not _SLOT_REF.fullmatch(name):
            raise ParseError(f"bad slot name {name!r}", spath)
        if kind not in SLOT_KINDS:
            raise ParseError(f"bad slot kind {kind!r}", spath)
        if name in slots:
            raise ParseError(f"slot {name} declared twice", spath)
        slots[name] = Slot(name, kind)

    clauses = {}
    for section, effect in (("inputs", False), ("outputs", True)):
        raw = _require(record, section, path)
        if not isinstance(raw, list):
            raise ParseError(f"{section} must be a list", f"{path}.{section}")
        clauses[section] = tuple(
            _parse_clause(c, f"{path}.{section}[{i}]", slots, motion, effect, cut_surfaces)
            for i, c in enumerate(raw)
        )
    if not clauses["inputs"]:
        raise ParseError("a template needs at least one input condition", path)
    return Template(motion.strip(), tuple(slots.values()), clauses["inputs"], clauses["outputs"])


def load_library(
    definitions: str | Mapping | Sequence,
    cut_surfaces: Sequence[str] = DEFAULT_CUT_SURFACES,
) -> MotionLibrary:
    """Load templates from a JSON document (text or already-decoded)."""
    doc = definitions
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, f"line {exc.lineno}") from None
    if isinstance(doc, Mapping):
        doc = _require(doc, "motions", "$")
    if not isinstance(doc, list):
        raise ParseError("expected a list of motion templates", "$.motions")
    templates = [
        _parse_template(r, f"$.motions[{i}]", cut_surfaces) for i, r in enumerate(doc)
    ]
    return MotionLibrary(tuple(templates))


def builtin_library(cut_surfaces: Sequence[str] = DEFAULT_CUT_SURFACES) -> MotionLibrary:
    """The six bundled motions: Pick, Place, Pour, Cut, Mix, Cook."""
    text = resources.files("foonplan.data").joinpath("motions.json").read_text("utf-8")
    return load_library(text, cut_surfaces)


def dump_library(library: MotionLibrary) -> dict:
    """Inverse of :func:`load_library` (placeholders come back expanded)."""

    def clause(c: Clause, effect: bool) -> dict:
        value = list(c.value) if isinstance(c.value, tuple) else c.value
        out = {"subject": c.subject, "key": c.key, "value": value}
        if c.op != ("set" if effect else "eq"):
            out["op"] = c.op
        return out

    return {
        "motions": [
            {
                "motion": t.motion,
                "slots": [{"name": s.name, "kind": s.kind} for s in t.slots],
                "inputs": [clause(c, False) for c in t.inputs],
                "outputs": [clause(c, True) for c in t.outputs],
            }
            for t in library
        ]
    }


# -- instantiation


def bind_token(slot: Slot, token: str) -> str:
    """Canonical value for ``token`` in ``slot``'s domain, or SlotDomainError."""
    token = token.strip()
    if slot.kind == "hand":
        hand = parse_hand(token)
        if hand is None:
            raise SlotDomainError(slot.name, token, "hand")
        return hand
    if slot.kind == "location":
        try:
            loc = Location.parse(token)
        except ValueError:
            raise SlotDomainError(slot.name, token, "location") from None
        if loc.kind == "InHand":
            raise SlotDomainError(slot.name, token, "location")
        return str(loc)
    if not token or parse_hand(token) is not None or is_location_token(token):
        raise SlotDomainError(slot.name, token, "object")
    return token


def _substitute(value: Any, values: Mapping[str, str]) -> Any:
    if isinstance(value, str):
        return _SLOT_REF.sub(lambda m: values[m.group(0)], value)
    if isinstance(value, tuple):
        return tuple(_substitute(v, values) for v in value)
    return value


def _canonical_place(value: Any) -> Any:
    if isinstance(value, tuple):
        return tuple(str(Location.parse(v)) for v in value)
    return str(Location.parse(value))


def ground_clause(clause: Clause, kinds: Mapping[str, str], values: Mapping[str, str]) -> GroundClause:
    """Resolve one clause; ``values`` needs only the slots the clause mentions."""
    m = _CONTENTS_SUBJECT.match(clause.subject)
    if m:
        kind, subject = "contents", values[m.group(1)]
    else:
        kind = "hand" if kinds[clause.subject] == "hand" else "object"
        subject = values[clause.subject]
    value = _substitute(clause.value, values)
    if clause.key == "place":
        value = _canonical_place(value)
    elif clause.key == "status" and isinstance(value, tuple):
        value = tuple(sorted(value))
    return GroundClause(kind, subject, clause.key, value, clause.op)


def clause_slots(clause: Clause) -> set[str]:
    m = _CONTENTS_SUBJECT.match(clause.subject)
    return {m.group(1) if m else clause.subject, *_slot_refs(clause.value)}


def ground(template: Template, values: Mapping[str, str]) -> FunctionalUnit:
    """Resolve a template against already-canonical slot values."""
    kinds = {s.name: s.kind for s in template.slots}
    bindings = tuple(Binding(s.name, s.kind, values[s.name]) for s in template.slots)
    return FunctionalUnit(
        template.motion,
        bindings,
        tuple(ground_clause(c, kinds, values) for c in template.inputs),
        tuple(ground_clause(c, kinds, values) for c in template.outputs),
    )


def instantiate(library: MotionLibrary, step: PlanStep) -> FunctionalUnit:
    """Bind a parsed plan step positionally to its motion template."""
    template = library.get(step.motion)
    if len(step.args) != len(template.slots):
        raise ArityMismatch(template.motion, len(template.slots), len(step.args))
    values = {s.name: bind_token(s, tok) for s, tok in zip(template.slots, step.args)}
    return ground(template, values)
