"""Parsers and serializers for every external format.

* plan lines: ``Pick | Knife | Right hand | Right storage``
* planner responses: JSON (possibly wrapped in prose or code fences) holding
  either ``{"targets": [...]}`` / ``{"unnecessary": true}`` or ``{"plan": [...]}``
* environment, target and task-graph JSON documents
* DOT export of task graphs
* SubRip (SRT) subtitles
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Any

from foonplan.core import (
    CATEGORIES,
    HANDS,
    EnvironmentState,
    HandState,
    Location,
    ObjectState,
    TargetNode,
    TargetState,
    new_environment,
)
from foonplan.errors import (
    EmptyField,
    EmptyLine,
    MalformedTimestamp,
    NoJsonFound,
    NonMonotonicIndex,
    ParseError,
    SchemaError,
    VariantMismatch,
)
from foonplan.graph import Edge, Node, TaskGraph
from foonplan.motions import Binding, FunctionalUnit, GroundClause

# -- plan lines


@dataclass(frozen=True)
class PlanStep:
    motion: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return format_plan_step(self)


def parse_plan_line(text: str) -> PlanStep:
    if not text.strip():
        raise EmptyLine()
    fields = [f.strip() for f in text.split("|")]
    for pos, f in enumerate(fields, start=1):
        if not f:
            raise EmptyField(pos)
    return PlanStep(fields[0], tuple(fields[1:]))


def format_plan_step(step: PlanStep) -> str:
    return " | ".join([step.motion, *step.args])


def parse_plan_text(text: str) -> list[tuple[int, PlanStep]]:
    """Plan file: one step per line; blank lines and ``#`` comments ignored."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            out.append((lineno, parse_plan_line(line)))
        except ParseError as exc:
            raise ParseError(str(exc), f"line {lineno}") from None
    return out


# -- planner responses


@dataclass(frozen=True)
class TargetEstimate:
    targets: tuple[TargetNode, ...] = ()
    unnecessary: bool = False


@dataclass(frozen=True)
class ActionPlan:
    steps: tuple[PlanStep, ...] = ()


PlannerResponse = TargetEstimate | ActionPlan

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_DECODER = json.JSONDecoder()


def extract_json(text: str) -> Any:
    """First well-formed JSON object (else array) in ``text``.

    Fenced code blocks are searched before the surrounding prose.
    """
    chunks = [m.group(1) for m in _FENCE.finditer(text)]
    chunks.append(text)
    for opener in "{[":
        for chunk in chunks:
            start = chunk.find(opener)
            while start != -1:
                try:
                    value, _ = _DECODER.raw_decode(chunk, start)
                except (ValueError, RecursionError):
                    pass
                else:
                    return value
                start = chunk.find(opener, start + 1)
    raise NoJsonFound()


_TARGET_KEYS = ("name", "category", "status", "place", "contents")


def _str_list(value: Any, path: str) -> list[str]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(path, "expected a string or list of strings")
    return [v.strip() for v in value]


def target_node_from_doc(doc: Any, path: str) -> TargetNode:
    if not isinstance(doc, Mapping):
        raise SchemaError(path, "expected an object")
    for key in doc:
        if key not in _TARGET_KEYS:
            raise SchemaError(f"{path}.{key}", f"unknown attribute {key!r}")
    name = doc.get("name")
    if not isinstance(name, str) or not name.strip():
        raise SchemaError(f"{path}.name", "name must be a non-empty string")
    category = doc.get("category")
    if category is not None:
        if not isinstance(category, str) or category.strip().lower() not in CATEGORIES:
            raise SchemaError(f"{path}.category", f"unknown category {category!r}")
        category = category.strip().lower()
    status = doc.get("status")
    if status is not None:
        status = frozenset(s.lower() for s in _str_list(status, f"{path}.status") if s)
    place = doc.get("place")
    if place is not None:
        try:
            place = Location.parse(place) if isinstance(place, str) else None
        except ValueError:
            place = None
        if place is None:
            raise SchemaError(f"{path}.place", f"bad location {doc['place']!r}")
    contents = doc.get("contents")
    if contents is not None:
        contents = tuple(_str_list(contents, f"{path}.contents"))
    return TargetNode(name.strip(), category, status, place, contents)


def target_node_to_doc(node: TargetNode) -> dict:
    doc: dict[str, Any] = {"name": node.name}
    if node.category is not None:
        doc["category"] = node.category
    if node.status is not None:
        doc["status"] = sorted(node.status)
    if node.place is not None:
        doc["place"] = str(node.place)
    if node.contents is not None:
        doc["contents"] = list(node.contents)
    return doc


def _variant_of(doc: Mapping) -> str | None:
    if "plan" in doc and "targets" not in doc:
        return "ActionPlan"
    if "targets" in doc or "unnecessary" in doc:
        return "TargetEstimate"
    return None


def parse_planner_response(text: str, expected: type | str) -> PlannerResponse:
    """Extract and validate a planner's JSON answer.

    ``expected`` is TargetEstimate/ActionPlan or their names. Only
    :class:`ParseError` subclasses escape.
    """
    name = expected if isinstance(expected, str) else expected.__name__
    if name not in ("TargetEstimate", "ActionPlan"):
        raise ValueError(f"unknown response variant {expected!r}")
    doc = extract_json(text)
    if not isinstance(doc, Mapping):
        raise SchemaError("$", "expected a JSON object")
    got = _variant_of(doc)
    if got is None:
        key = "targets" if name == "TargetEstimate" else "plan"
        raise SchemaError(f"$.{key}", "missing")
    if got != name:
        raise VariantMismatch(name, got)

    if name == "ActionPlan":
        raw = doc["plan"]
        if not isinstance(raw, list):
            raise SchemaError("$.plan", "expected a list of step strings")
        steps = []
        for i, line in enumerate(raw):
            if not isinstance(line, str):
                raise SchemaError(f"$.plan[{i}]", "expected a pipe-delimited string")
            try:
                steps.append(parse_plan_line(line))
            except ParseError as exc:
                raise SchemaError(f"$.plan[{i}]", str(exc)) from None
        return ActionPlan(tuple(steps))

    unnecessary = doc.get("unnecessary", False)
    if not isinstance(unnecessary, bool):
        raise SchemaError("$.unnecessary", "expected true or false")
    raw = doc.get("targets")
    if raw is None:
        if not unnecessary:
            raise SchemaError("$.targets", "missing")
        raw = []
    if not isinstance(raw, list):
        raise SchemaError("$.targets", "expected a list")
    nodes = tuple(target_node_from_doc(t, f"$.targets[{i}]") for i, t in enumerate(raw))
    return TargetEstimate(nodes, unnecessary)


# -- environment documents


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from None


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def env_to_doc(env: EnvironmentState) -> dict:
    return {
        "objects": [
            {
                "name": o.name,
                "category": o.category,
                "place": str(o.place),
                "status": sorted(o.status),
                "contents": list(o.contents),
            }
            for o in env.objects.values()
        ],
        "hands": {h.lower(): env.hands[h].holding for h in HANDS},
    }


def env_from_doc(doc: Any, path: str = "$") -> EnvironmentState:
    """Build (and fully validate) an environment from its JSON form.

    ``contents`` may be omitted; it is then derived from the objects whose
    place is ``In(container)``, in document order.
    """
    if not isinstance(doc, Mapping):
        raise ParseError("expected an object", path)
    raw_objects = doc.get("objects")
    if not isinstance(raw_objects, list):
        raise ParseError("objects must be a list", f"{path}.objects")
    records = []
    for i, rec in enumerate(raw_objects):
        p = f"{path}.objects[{i}]"
        if not isinstance(rec, Mapping):
            raise ParseError("expected an object", p)
        name, category, place = rec.get("name"), rec.get("category"), rec.get("place")
        if not isinstance(name, str) or not name.strip():
            raise ParseError("name must be a non-empty string", f"{p}.name")
        if category not in CATEGORIES:
            raise SchemaError(f"{p}.category", f"unknown category {category!r}")
        try:
            loc = Location.parse(place) if isinstance(place, str) else None
        except ValueError:
            loc = None
        if loc is None:
            raise ParseError(f"bad location {place!r}", f"{p}.place")
        status = _str_list(rec.get("status", []), f"{p}.status")
        contents = rec.get("contents")
        if contents is not None:
            contents = _str_list(contents, f"{p}.contents")
        records.append((name.strip(), category, loc, status, contents))

    derived: dict[str, list[str]] = {}
    for name, _, loc, _, _ in records:
        if loc.kind == "In":
            derived.setdefault(loc.ref, []).append(name)
    objects = [
        ObjectState(name, cat, loc, frozenset(st),
                    tuple(derived.get(name, []) if contents is None else contents))
        for name, cat, loc, st, contents in records
    ]

    raw_hands = doc.get("hands", {})
    if not isinstance(raw_hands, Mapping):
        raise ParseError("hands must be an object", f"{path}.hands")
    hands = []
    for h in HANDS:
        held = raw_hands.get(h.lower(), raw_hands.get(h))
        if held is not None and not isinstance(held, str):
            raise ParseError("hand holding must be a name or null", f"{path}.hands.{h.lower()}")
        hands.append(HandState(h, held))
    return new_environment(objects, hands)


def dump_env(env: EnvironmentState) -> str:
    return _dumps(env_to_doc(env))


def load_env(text: str) -> EnvironmentState:
    return env_from_doc(_load_json(text))


# -- target documents


def target_state_to_doc(target: TargetState) -> dict:
    return {
        "scene_id": target.scene_id,
        "targets": [target_node_to_doc(n) for n in target.targets],
    }


def target_state_from_doc(doc: Any, path: str = "$") -> TargetState:
    if not isinstance(doc, Mapping):
        raise SchemaError(path, "expected an object")
    scene_id = doc.get("scene_id")
    if not isinstance(scene_id, int) or isinstance(scene_id, bool):
        raise SchemaError(f"{path}.scene_id", "expected an integer")
    raw = doc.get("targets", [])
    if not isinstance(raw, list):
        raise SchemaError(f"{path}.targets", "expected a list")
    return TargetState(
        scene_id,
        tuple(target_node_from_doc(t, f"{path}.targets[{i}]") for i, t in enumerate(raw)),
    )


def dump_targets(targets: Iterable[TargetState]) -> str:
    return _dumps({"scenes": [target_state_to_doc(t) for t in targets]})


def load_targets(text: str) -> list[TargetState]:
    doc = _load_json(text)
    if not isinstance(doc, Mapping) or not isinstance(doc.get("scenes"), list):
        raise SchemaError("$.scenes", "expected a list of scenes")
    scenes = [target_state_from_doc(s, f"$.scenes[{i}]") for i, s in enumerate(doc["scenes"])]
    ids = [s.scene_id for s in scenes]
    if ids != sorted(set(ids)):
        raise SchemaError("$.scenes", "scene ids must be unique and increasing")
    return scenes


# -- task graphs


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _frozen(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_frozen(v) for v in value)
    return value


def _clause_doc(c: GroundClause) -> dict:
    return {"kind": c.kind, "subject": c.subject, "key": c.key,
            "value": _plain(c.value), "op": c.op}


def unit_to_doc(unit: FunctionalUnit) -> dict:
    return {
        "motion": unit.motion,
        "step": unit.step,
        "bindings": [{"slot": b.slot, "kind": b.kind, "value": b.value} for b in unit.bindings],
        "inputs": [_clause_doc(c) for c in unit.inputs],
        "outputs": [_clause_doc(c) for c in unit.outputs],
    }


def graph_to_doc(graph: TaskGraph) -> dict:
    return {
        "units": [unit_to_doc(u) for u in graph.units],
        "nodes": [
            {"id": n.id, "type": n.type, "label": n.label,
             "state": {k: _plain(v) for k, v in n.state}}
            for n in graph.nodes
        ],
        "edges": [{"source": e.source, "target": e.target} for e in graph.edges],
        "initial": env_to_doc(graph.initial) if graph.initial is not None else None,
        "final": env_to_doc(graph.final) if graph.final is not None else None,
    }


def serialize_graph(graph: TaskGraph) -> str:
    return _dumps(graph_to_doc(graph))


def _field(rec: Any, key: str, path: str) -> Any:
    if not isinstance(rec, Mapping) or key not in rec:
        raise ParseError(f"missing field {key!r}", path)
    return rec[key]


def _unit_from_doc(doc: Any, path: str) -> FunctionalUnit:
    bindings = tuple(
        Binding(_field(b, "slot", p), _field(b, "kind", p), _field(b, "value", p))
        for i, b in enumerate(_field(doc, "bindings", path))
        for p in [f"{path}.bindings[{i}]"]
    )

    def clauses(section: str) -> tuple[GroundClause, ...]:
        out = []
        for i, c in enumerate(_field(doc, section, path)):
            p = f"{path}.{section}[{i}]"
            out.append(GroundClause(
                _field(c, "kind", p), _field(c, "subject", p), _field(c, "key", p),
                _frozen(_field(c, "value", p)), _field(c, "op", p),
            ))
        return tuple(out)

    return FunctionalUnit(_field(doc, "motion", path), bindings,
                          clauses("inputs"), clauses("outputs"))


def graph_from_doc(doc: Any) -> TaskGraph:
    try:
        units = tuple(
            _unit_from_doc(u, f"$.units[{i}]") for i, u in enumerate(_field(doc, "units", "$"))
        )
        nodes = tuple(
            Node(_field(n, "id", p), _field(n, "type", p), _field(n, "label", p),
                 tuple((k, _frozen(v)) for k, v in _field(n, "state", p).items()))
            for i, n in enumerate(doc.get("nodes", []))
            for p in [f"$.nodes[{i}]"]
        )
        edges = tuple(
            Edge(_field(e, "source", p), _field(e, "target", p))
            for i, e in enumerate(doc.get("edges", []))
            for p in [f"$.edges[{i}]"]
        )
    except (TypeError, AttributeError, ValueError) as exc:
        raise ParseError(f"malformed graph document: {exc}", "$") from None
    initial = doc.get("initial")
    final = doc.get("final")
    return TaskGraph(
        units, nodes, edges,
        env_from_doc(initial, "$.initial") if initial is not None else None,
        env_from_doc(final, "$.final") if final is not None else None,
    )


def parse_graph(text: str) -> TaskGraph:
    return graph_from_doc(_load_json(text))


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _node_caption(node: Node) -> str:
    state = dict(node.state)
    if node.type == "motion":
        return node.label
    if node.type == "hand":
        return f"{node.label}\nholding: {state.get('holding') or 'none'}"
    lines = [node.label, f"place: {state.get('place')}"]
    if state.get("status"):
        lines.append("status: " + ", ".join(state["status"]))
    if state.get("contents"):
        lines.append("contents: " + ", ".join(state["contents"]))
    return "\n".join(lines)


def export_dot(graph: TaskGraph) -> str:
    """Graphviz rendering: object/hand nodes as ellipses, motions as boxes."""
    if not graph.nodes:
        return "digraph foon { }\n"
    lines = ["digraph foon {"]
    for node in graph.nodes:
        shape = "box" if node.type == "motion" else "ellipse"
        style = ', style=dashed' if node.type == "hand" else ""
        lines.append(
            f'  {node.id} [label="{_dot_escape(_node_caption(node))}", shape={shape}{style}];'
        )
    for edge in graph.edges:
        lines.append(f"  {edge.source} -> {edge.target};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- subtitles


@dataclass(frozen=True)
class SubtitleCue:
    index: int
    start: int  # milliseconds
    end: int
    text: str


_TIMING = re.compile(
    r"^(\d{1,2}):(\d{2}):(\d{2})[,.](\d{3})\s*-->\s*(\d{1,2}):(\d{2}):(\d{2})[,.](\d{3})"
    r"(?:\s.*)?$"
)


def _millis(h: str, m: str, s: str, ms: str) -> int | None:
    if int(m) > 59 or int(s) > 59:
        return None
    return ((int(h) * 60 + int(m)) * 60 + int(s)) * 1000 + int(ms)


def parse_srt(text: str) -> list[SubtitleCue]:
    """Parse SubRip text. Cue text is kept verbatim (lines joined by newlines)."""
    text = text.lstrip("\ufeff")
    lines = text.splitlines()
    cues: list[SubtitleCue] = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        lineno = i + 1
        head = lines[i].strip().lstrip("\ufeff")
        if not head.isdigit():
            raise ParseError(f"expected a cue index, got {head!r}", f"line {lineno}")
        index = int(head)
        if cues and index <= cues[-1].index:
            raise NonMonotonicIndex(lineno, index, cues[-1].index)
        i += 1
        timing = lines[i].strip() if i < len(lines) else ""
        m = _TIMING.match(timing)
        start = _millis(*m.groups()[:4]) if m else None
        end = _millis(*m.groups()[4:]) if m else None
        if start is None or end is None or start >= end:
            raise MalformedTimestamp(i + 1, timing)
        i += 1
        body = []
        while i < len(lines) and lines[i].strip():
            body.append(lines[i])
            i += 1
        cues.append(SubtitleCue(index, start, end, "\n".join(body)))
    return cues


def _stamp(ms: int) -> str:
    h, rem = divmod(ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def format_srt(cues: Iterable[SubtitleCue]) -> str:
    blocks = [f"{c.index}\n{_stamp(c.start)} --> {_stamp(c.end)}\n{c.text}" for c in cues]
    return "\n\n".join(blocks) + ("\n" if blocks else "")
