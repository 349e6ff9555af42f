from __future__ import annotations

import copy
import json
from importlib import resources

import pytest
from hypothesis import given
from hypothesis import strategies as st

from foonplan.motions import (
    EFFECT_KEYS,
    GroundClause,
    builtin_library,
    dump_library,
    instantiate,
    load_library,
)
from foonplan.errors import (
    ArityMismatch,
    DuplicateMotion,
    ParseError,
    SlotDomainError,
    UnboundSlot,
    UnknownMotion,
)
from foonplan.planio import PlanStep

LIBRARY = builtin_library()


def builtin_doc() -> dict:
    return json.loads(resources.files("foonplan.data").joinpath("motions.json").read_text("utf-8"))


def test_lookup_pick():
    pick = LIBRARY.get("Pick")
    assert [s.name for s in pick.slots] == ["?obj", "?hand", "?place"]
    assert [s.kind for s in pick.slots] == ["object", "hand", "location"]
    assert pick.signature == "Pick | ?obj | ?hand | ?place"


def test_lookup_ignores_case():
    assert LIBRARY.get("pick") is LIBRARY.get("Pick")
    assert " PICK " in LIBRARY


def test_six_builtin_motions():
    for name in ("Pick", "Place", "Pour", "Cut", "Mix", "Cook"):
        assert LIBRARY.get(name).motion == name
    assert len(LIBRARY) == 6
    with pytest.raises(UnknownMotion):
        LIBRARY.get("Season")
    assert "Season" not in LIBRARY


def test_instantiate_pick():
    unit = instantiate(LIBRARY, PlanStep("Pick", ("Knife", "Right hand", "Right storage")))
    assert unit.step == "Pick | Knife | Right hand | Right storage"
    assert GroundClause("hand", "Right", "holding", None) in unit.inputs
    assert GroundClause("object", "Knife", "place", "RightStorage") in unit.inputs
    assert set(unit.outputs) == {
        GroundClause("hand", "Right", "holding", "Knife", "set"),
        GroundClause("object", "Knife", "place", "InHand(Right)", "set"),
    }
    assert unit.objects() == ["Knife"] and unit.hands() == ["Right"]


def test_instantiate_normalises_spellings():
    a = instantiate(LIBRARY, PlanStep("pick", ("Knife", "RightHand", "right_storage")))
    b = instantiate(LIBRARY, PlanStep("Pick", ("Knife", "Right hand", "Right storage")))
    assert a == b


def test_location_referent_counts_as_object():
    unit = instantiate(LIBRARY, PlanStep("Place", ("Onion", "Left hand", "In(Frying pan)")))
    assert unit.objects() == ["Onion", "Frying pan"]


def test_arity_mismatch():
    with pytest.raises(ArityMismatch) as info:
        instantiate(LIBRARY, PlanStep("Pick", ("Knife", "Right hand")))
    assert (info.value.expected, info.value.got) == (3, 2)


def test_slot_domain_error():
    with pytest.raises(SlotDomainError) as info:
        instantiate(LIBRARY, PlanStep("Pick", ("Knife", "Right storage", "Right storage")))
    assert info.value.slot == "?hand" and info.value.token == "Right storage"


@pytest.mark.parametrize("args", [
    ("Right hand", "Right hand", "Right storage"),
    ("Knife", "Right hand", "InHand(Left)"),
    ("Knife", "Right hand", "Cupboard"),
])
def test_slot_domain_rejections(args):
    with pytest.raises(SlotDomainError):
        instantiate(LIBRARY, PlanStep("Pick", args))


def test_builtin_round_trip():
    again = load_library(dump_library(LIBRARY))
    assert again == LIBRARY
    assert dump_library(again) == dump_library(LIBRARY)


def test_duplicate_motion():
    doc = builtin_doc()
    doc["motions"].append(copy.deepcopy(doc["motions"][0]))
    with pytest.raises(DuplicateMotion) as info:
        load_library(doc)
    assert info.value.name == "Pick"


def test_unbound_slot_in_effect():
    doc = builtin_doc()
    cut = next(m for m in doc["motions"] if m["motion"] == "Cut")
    cut["outputs"].append({"subject": "?board", "key": "status", "value": "used", "op": "add"})
    with pytest.raises(UnboundSlot) as info:
        load_library(doc)
    assert info.value.template == "Cut" and info.value.slot == "?board"


@pytest.mark.parametrize("mutate", [
    lambda m: m["outputs"].append({"subject": "?obj", "key": "category", "value": "tool"}),
    lambda m: m["inputs"].append({"subject": "?obj", "key": "status", "value": "x", "op": "add"}),
    lambda m: m["inputs"].clear(),
    lambda m: m["slots"].append({"name": "?x", "kind": "spoon"}),
    lambda m: m["inputs"].append({"subject": "?hand", "key": "place", "value": "Workspace"}),
    lambda m: m.pop("outputs"),
])
def test_malformed_templates(mutate):
    doc = builtin_doc()
    mutate(doc["motions"][0])
    with pytest.raises(ParseError):
        load_library(doc)


def test_bad_json_text():
    with pytest.raises(ParseError):
        load_library("{not json")


def test_cut_surfaces_are_configurable():
    lib = builtin_library(cut_surfaces=("Plate",))
    unit = instantiate(lib, PlanStep("Cut", ("Onion", "Knife", "Left hand")))
    place = next(c for c in unit.inputs if c.subject == "Onion" and c.key == "place")
    assert place.value == ("On(Plate)", "In(Plate)")


# -- properties


def test_effect_keys_are_schema_keys():
    for template in LIBRARY:
        for clause in template.outputs:
            assert clause.key in EFFECT_KEYS


_names = st.sampled_from(["Knife", "Onion", "Bowl", "Frying pan", "Egg", "Stove"])
_hands = st.sampled_from(["Left hand", "Right hand", "Left", "RightHand"])
_places = st.sampled_from(["Right storage", "LeftStorage", "Workspace", "In(Bowl)", "On(Stove)"])
_kind_tokens = {"object": _names, "hand": _hands, "location": _places}


@given(st.data())
def test_instantiation_is_total_over_slot_domains(data):
    template = data.draw(st.sampled_from(list(LIBRARY)))
    args = tuple(data.draw(_kind_tokens[s.kind]) for s in template.slots)
    unit = instantiate(LIBRARY, PlanStep(template.motion, args))
    assert unit.motion == template.motion
    assert len(unit.inputs) == len(template.inputs)
    assert len(unit.outputs) == len(template.outputs)
    # every slot reference is resolved
    for clause in unit.inputs + unit.outputs:
        assert "?" not in str(clause.subject) and "?" not in str(clause.value)
    again = instantiate(LIBRARY, PlanStep(template.motion, tuple(b.token for b in unit.bindings)))
    assert again == unit
