"""The accumulated FOON task graph.

Each appended functional unit contributes one motion node, an input
object/hand node per involved entity (reused from an earlier unit when the
state is unchanged, which is what chains units together) and a fresh output
node per entity reflecting the post-action state.
"""

from __future__ import annotations

from dataclasses import dataclass

from foonplan.core import EnvironmentState, Location, hand_label
from foonplan.motions import FunctionalUnit

State = tuple[tuple[str, object], ...]


@dataclass(frozen=True)
class Node:
    id: str
    type: str  # "object" | "hand" | "motion"
    label: str
    state: State = ()


@dataclass(frozen=True)
class Edge:
    source: str
    target: str


@dataclass(frozen=True)
class TaskGraph:
    units: tuple[FunctionalUnit, ...] = ()
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    initial: EnvironmentState | None = None
    final: EnvironmentState | None = None

    def motion_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.type == "motion"]


def snapshot(env: EnvironmentState, kind: str, name: str) -> State:
    if kind == "hand":
        return (("holding", env.hands[name].holding),)
    obj = env.objects[name]
    return (
        ("category", obj.category),
        ("contents", obj.contents),
        ("place", str(obj.place)),
        ("status", tuple(sorted(obj.status))),
    )


def involved(unit: FunctionalUnit, env: EnvironmentState) -> list[tuple[str, str]]:
    """Entities (kind, name) a unit touches, in binding order.

    Objects absent from ``env`` are skipped.
    """
    out: list[tuple[str, str]] = []

    def add(kind: str, name: str | None) -> None:
        if name is None or (kind, name) in out:
            return
        if kind == "object" and name not in env.objects:
            return
        out.append((kind, name))

    for b in unit.bindings:
        if b.kind == "hand":
            add("hand", b.value)
        elif b.kind == "object":
            add("object", b.value)
        else:
            add("object", Location.parse(b.value).referent)
    for c in unit.outputs:
        if c.kind == "contents" and c.subject in env.objects:
            for item in env.objects[c.subject].contents:
                add("object", item)
    return out


def _label(kind: str, name: str) -> str:
    return hand_label(name) if kind == "hand" else name


def append_unit(
    graph: TaskGraph,
    unit: FunctionalUnit,
    pre_env: EnvironmentState,
    post_env: EnvironmentState,
) -> TaskGraph:
    """Return a new graph with ``unit`` appended after the existing ones."""
    nodes = list(graph.nodes)
    edges = list(graph.edges)

    def fresh(kind: str, label: str, state: State) -> str:
        node = Node(f"n{len(nodes)}", kind, label, state)
        nodes.append(node)
        return node.id

    entities = involved(unit, pre_env)
    inputs = []
    for kind, name in entities:
        label = _label(kind, name)
        state = snapshot(pre_env, kind, name)
        latest = next(
            (n for n in reversed(nodes) if n.type == kind and n.label == label), None
        )
        if latest is not None and latest.state == state:
            inputs.append(latest.id)
        else:
            inputs.append(fresh(kind, label, state))
    motion = fresh(
        "motion", unit.motion, (("step", unit.step), ("unit", len(graph.units)))
    )
    edges.extend(Edge(i, motion) for i in inputs)
    for kind, name in entities:
        if kind == "object" and name not in post_env.objects:
            continue
        out = fresh(kind, _label(kind, name), snapshot(post_env, kind, name))
        edges.append(Edge(motion, out))

    return TaskGraph(
        units=graph.units + (unit,),
        nodes=tuple(nodes),
        edges=tuple(edges),
        initial=graph.initial if graph.initial is not None else pre_env,
        final=post_env,
    )


def chronological_units(graph: TaskGraph) -> list[FunctionalUnit]:
    """Units in the order they were validated and appended."""
    return list(graph.units)

