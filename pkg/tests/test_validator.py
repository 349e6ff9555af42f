from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refsim import random_case, token
from test_core import kitchen, obj

from foonplan.core import HandState, Location, TargetNode, TargetState, new_environment
from foonplan.errors import UnknownObject
from foonplan.motions import builtin_library, instantiate
from foonplan.planio import env_from_doc, parse_plan_line
from foonplan.validator import (
    DiagnosisKind,
    Mismatch,
    apply_action,
    check_action,
    check_goal,
    replay,
    validate_plan,
)

LIBRARY = builtin_library()


def unit(line):
    return instantiate(LIBRARY, parse_plan_line(line))


def holding_spoon():
    return new_environment(
        [
            obj("Knife", "tool", "RightStorage"),
            obj("Spoon", "tool", "InHand(Right)"),
        ],
        [HandState("Left"), HandState("Right", "Spoon")],
    )


def board_kitchen():
    return new_environment([
        obj("Knife", "tool", "RightStorage"),
        obj("Cutting board", "tool", "Workspace"),
        obj("Frying pan", "container", "On(Stove)"),
        obj("Onion", "ingredient", "LeftStorage", {"raw"}),
        obj("Stove", "machine", "Workspace", {"off"}),
    ])


# -- check_action


def test_pick_is_feasible():
    assert check_action(kitchen(), unit("Pick | Knife | Right hand | Right storage")) is None


def test_occupied_hand_gives_one_mismatch():
    diagnosis = check_action(holding_spoon(), unit("Pick | Knife | Right hand | Right storage"))
    assert diagnosis.kind is DiagnosisKind.INFEASIBLE
    assert diagnosis.mismatches == (Mismatch("RightHand", "holding", "none", "Spoon"),)


def test_every_violated_condition_is_reported():
    # wrong place and occupied hand at once
    diagnosis = check_action(holding_spoon(), unit("Pick | Knife | Right hand | Workspace"))
    keys = {(m.subject, m.key) for m in diagnosis.mismatches}
    assert keys == {("RightHand", "holding"), ("Knife", "place")}


def test_unknown_object():
    with pytest.raises(UnknownObject):
        check_action(kitchen(), unit("Pick | Ghost | Right hand | Right storage"))


def test_machines_cannot_be_picked():
    diagnosis = check_action(kitchen(), unit("Pick | Stove | Left hand | Workspace"))
    assert [m.key for m in diagnosis.mismatches] == ["category"]


@pytest.mark.parametrize("dest, key", [
    ("In(Knife)", "category"),
    ("In(Onion)", "category"),
    ("On(Onion)", "category"),
])
def test_illegal_destinations(dest, key):
    env = apply_action(board_kitchen(), unit("Pick | Onion | Left hand | Left storage"))
    diagnosis = check_action(env, unit(f"Place | Onion | Left hand | {dest}"))
    assert key in [m.key for m in diagnosis.mismatches]


def test_container_cannot_go_inside_itself():
    env = apply_action(board_kitchen(), unit("Pick | Frying pan | Left hand | On(Stove)"))
    diagnosis = check_action(env, unit("Place | Frying pan | Left hand | In(Frying pan)"))
    assert diagnosis is not None


def test_check_action_does_not_mutate():
    env = holding_spoon()
    before = env.key
    check_action(env, unit("Pick | Knife | Right hand | Right storage"))
    assert env.key == before


# -- apply_action


def test_apply_pick():
    env = kitchen()
    post = apply_action(env, unit("Pick | Knife | Right hand | Right storage"))
    assert post.obj("Knife").place == Location("InHand", "Right")
    assert post.hand("Right").holding == "Knife"
    assert env.obj("Knife").place == Location("RightStorage")
    assert env.hand("Right").holding is None


def test_place_into_pan_updates_contents():
    env = apply_action(board_kitchen(), unit("Pick | Onion | Left hand | Left storage"))
    post = apply_action(env, unit("Place | Onion | Left hand | In(Frying pan)"))
    assert post.obj("Onion").place == Location("In", "Frying pan")
    assert post.obj("Frying pan").contents == ("Onion",)
    assert post.hand("Left").holding is None
    assert env.obj("Frying pan").contents == ()


def test_cut_and_cook_statuses():
    result = validate_plan(board_kitchen(), [
        "Pick | Knife | Left hand | Right storage",
        "Pick | Onion | Right hand | Left storage",
        "Place | Onion | Right hand | On(Cutting board)",
        "Cut | Onion | Knife | Left hand",
        "Pick | Onion | Right hand | On(Cutting board)",
        "Place | Onion | Right hand | In(Frying pan)",
        "Cook | Frying pan | Stove",
    ], LIBRARY)
    assert result.ok, result.diagnosis
    assert {"chopped", "cooked"} <= result.env.obj("Onion").status


def test_pour_moves_contents_in_order():
    env = new_environment([
        obj("Bowl", "container", "InHand(Left)", {"full"}, ["Egg", "Milk"]),
        obj("Egg", "ingredient", "In(Bowl)"),
        obj("Milk", "ingredient", "In(Bowl)"),
        obj("Pot", "container", "Workspace", {"empty"}),
    ], [HandState("Left", "Bowl"), HandState("Right")])
    post = apply_action(env, unit("Pour | Bowl | Left hand | Pot"))
    assert post.obj("Pot").contents == ("Egg", "Milk")
    assert post.obj("Bowl").contents == ()
    assert "empty" in post.obj("Bowl").status and "empty" not in post.obj("Pot").status


# -- validate_plan


def test_gyudon_chop_plan():
    result = validate_plan(board_kitchen(), [
        "Pick | Knife | Left hand | Right storage",
        "Pick | Onion | Right hand | Left storage",
        "Place | Onion | Right hand | On(Cutting board)",
        "Cut | Onion | Knife | Left hand",
    ], LIBRARY)
    assert result.ok and len(result.units) == 4
    assert check_goal(result.env, TargetState(8, (TargetNode("Onion", status={"chopped"}),))).satisfied


def test_grasp_conflict_at_second_step():
    result = validate_plan(kitchen(), [
        "Pick | Knife | Right hand | Right storage",
        "Pick | Frying pan | Right hand | Right storage",
    ], LIBRARY)
    assert not result.ok
    assert result.diagnosis.index == 1
    assert result.diagnosis.mismatches == (Mismatch("RightHand", "holding", "none", "Knife"),)
    # the state and graph hold the validated prefix only
    assert result.env.hand("Right").holding == "Knife" and len(result.units) == 1
    assert len(result.graph.units) == 1


def test_empty_plan():
    result = validate_plan(kitchen(), [], LIBRARY)
    assert result.ok and result.env == kitchen() and result.units == ()


@pytest.mark.parametrize("line, kind", [
    ("Season | Onion | Salt", DiagnosisKind.UNKNOWN_MOTION),
    ("Pick | Ghost | Left hand | Workspace", DiagnosisKind.UNKNOWN_OBJECT),
    ("Pick | Knife | Left hand", DiagnosisKind.BINDING_ERROR),
    ("Pick || Left hand | Workspace", DiagnosisKind.BINDING_ERROR),
])
def test_non_feasibility_diagnoses(line, kind):
    result = validate_plan(kitchen(), [line], LIBRARY)
    assert result.diagnosis.kind is kind and result.diagnosis.index == 0
    assert result.diagnosis.detail


def test_graph_can_be_extended_across_calls():
    first = validate_plan(kitchen(), ["Pick | Knife | Right hand | Right storage"], LIBRARY)
    second = validate_plan(first.env, ["Place | Knife | Right hand | Workspace"], LIBRARY, first.graph)
    assert [u.motion for u in second.graph.units] == ["Pick", "Place"]


def test_replay_skips_infeasible_steps():
    units = [
        unit("Pick | Knife | Right hand | Right storage"),
        unit("Pick | Onion | Right hand | Left storage"),
        unit("Place | Knife | Right hand | Workspace"),
    ]
    env, problems = replay(kitchen(), units)
    assert [p.index for p in problems] == [1]
    assert env.obj("Knife").place == Location("Workspace")
    assert env.obj("Onion").place == Location("LeftStorage")


# -- check_goal


def test_raw_onion_is_not_chopped():
    report = check_goal(kitchen(), TargetState(8, (TargetNode("Onion", status={"chopped"}),)))
    assert report.unmet == (Mismatch("Onion", "status", "chopped", "raw", "⊇"),)
    assert not report.satisfied


def test_empty_target_is_satisfied():
    assert check_goal(kitchen(), TargetState(1, ())).satisfied


def test_status_uses_subset_semantics():
    env = new_environment([obj("Onion", "ingredient", "Workspace", {"raw", "chopped"})])
    assert check_goal(env, TargetState(1, (TargetNode("Onion", status={"chopped"}),))).satisfied
    assert not check_goal(env, TargetState(1, (TargetNode("Onion", status={"cooked"}),))).satisfied


def test_contents_compare_as_multisets():
    env = new_environment([
        obj("Pan", "container", "Workspace", contents=["Egg", "Onion"]),
        obj("Egg", "ingredient", "In(Pan)"),
        obj("Onion", "ingredient", "In(Pan)"),
    ])
    ok = TargetState(1, (TargetNode("Pan", contents=("Onion", "Egg")),))
    short = TargetState(1, (TargetNode("Pan", contents=("Onion",)),))
    assert check_goal(env, ok).satisfied
    assert [m.key for m in check_goal(env, short).unmet] == ["contents"]


def test_unknown_target_object_is_reported():
    report = check_goal(kitchen(), TargetState(9, (TargetNode("Dish"),)))
    assert report.unmet == (Mismatch("Dish", "exists", "present", "absent"),)


def test_place_and_category_requirements():
    target = TargetState(2, (TargetNode("Knife", category="container", place=Location("Workspace")),))
    assert {m.key for m in check_goal(kitchen(), target).unmet} == {"category", "place"}


# -- properties


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_plans_match_reference_and_replay(seed):
    rng = random.Random(seed)
    world, steps, states = random_case(rng)
    env = env_from_doc(world.to_doc())
    lines = [token(m, a, rng) for m, a in steps]
    result = validate_plan(env, lines, LIBRARY)
    assert result.ok, result.diagnosis
    assert result.env == env_from_doc(states[-1].to_doc())
    # every validated prefix replays to the same intermediate states
    replayed, problems = replay(env, result.units)
    assert problems == [] and replayed == result.env
    for i in range(len(steps) + 1):
        prefix = validate_plan(env, lines[:i], LIBRARY)
        assert prefix.env == env_from_doc(states[i].to_doc())
