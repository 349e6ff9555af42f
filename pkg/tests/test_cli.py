from __future__ import annotations

import json
import re
import shutil
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import RECIPES, recipe_dir

from foonplan.cli import LOCKFILE, main
from foonplan.planio import load_env, parse_graph, parse_plan_text

GYUDON = recipe_dir("gyudon")


def plan_args(recipe: str, out: Path, *extra: str) -> list[str]:
    d = recipe_dir(recipe)
    return [
        "plan", "--env", str(d / "env.json"), "--targets", str(d / "targets.json"),
        "--fixture", str(d / "script.json"), "--out", str(out), *extra,
    ]


# -- segment


def test_segment_gyudon(tmp_path, capsys):
    out = tmp_path / "scenes.json"
    assert main(["segment", "--subtitles", str(GYUDON / "subtitles.srt"), "--out", str(out)]) == 0
    assert len(json.loads(out.read_text("utf-8"))["scenes"]) == 13


def test_segment_to_stdout(capsys):
    assert main(["segment", "--subtitles", str(GYUDON / "subtitles.srt")]) == 0
    assert len(json.loads(capsys.readouterr().out)["scenes"]) == 13


def test_segment_empty_srt(tmp_path):
    srt = tmp_path / "empty.srt"
    srt.write_text("", "utf-8")
    out = tmp_path / "scenes.json"
    assert main(["segment", "--subtitles", str(srt), "--out", str(out)]) == 0
    assert json.loads(out.read_text("utf-8")) == {"scenes": []}


def test_segment_malformed_srt(tmp_path, capsys):
    srt = tmp_path / "bad.srt"
    srt.write_text("1\n00:00:01,000 --> 00:00:02,000\nhi\n\n2\nsoon\nthere\n", "utf-8")
    assert main(["segment", "--subtitles", str(srt)]) == 2
    assert "line 6" in capsys.readouterr().err


def test_segment_missing_file(tmp_path):
    assert main(["segment", "--subtitles", str(tmp_path / "nope.srt")]) == 1


def test_segment_custom_lexicon_and_threshold(tmp_path, capsys):
    lexicon = tmp_path / "lex.json"
    lexicon.write_text('{"Cut": ["cut"]}', "utf-8")
    srt = tmp_path / "a.srt"
    srt.write_text("1\n00:00:01,000 --> 00:00:02,000\ncut it\n", "utf-8")
    assert main(["segment", "--subtitles", str(srt), "--lexicon", str(lexicon), "--threshold", "0.9"]) == 0
    assert json.loads(capsys.readouterr().out)["scenes"][0]["motion"] == "Cut"


# -- plan


def test_plan_correcting_gyudon(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(plan_args("gyudon", out, "--planner", "correcting", "--faults", "3")) == 0
    report = json.loads((out / "report.json").read_text("utf-8"))
    assert report["success"] and report["replanning_rounds"] >= 3
    assert (out / "transcript.json").is_file()
    assert parse_graph((out / "graph.json").read_text("utf-8")).units
    assert not (out / LOCKFILE).exists()
    assert "8/8 scenes complete" in capsys.readouterr().out


@pytest.mark.parametrize("recipe", RECIPES)
def test_plan_every_recipe_with_correcting_planner(recipe, tmp_path):
    out = tmp_path / recipe
    assert main(plan_args(recipe, out, "--planner", "correcting", "--faults", "3")) == 0
    assert json.loads((out / "report.json").read_text("utf-8"))["success"]


def _successes(tmp_path: Path, *flags: str) -> int:
    count = 0
    for recipe in RECIPES:
        out = tmp_path / "-".join([recipe, *flags]).replace(" ", "")
        code = main(plan_args(recipe, out, "--planner", "faulty", "--seed", "42", "--error-rate", "0.3", *flags))
        count += code == 0
    return count


def test_baseline_is_strictly_worse_on_seed_42(tmp_path):
    validated = _successes(tmp_path)
    baseline = _successes(tmp_path, "--no-validate")
    assert baseline < validated


def test_plan_no_validate_with_faults(tmp_path):
    out = tmp_path / "run"
    code = main(plan_args("gyudon", out, "--planner", "correcting", "--faults", "3", "--no-validate"))
    assert code == 3
    report = json.loads((out / "report.json").read_text("utf-8"))
    assert report["mode"] == "baseline" and report["audit"]


def test_plan_exhausted_budget(tmp_path):
    out = tmp_path / "run"
    code = main(plan_args("gyudon", out, "--planner", "faulty", "--error-rate", "1.0", "--budget", "2"))
    assert code == 3


def test_plan_empty_targets(tmp_path):
    targets = tmp_path / "targets.json"
    targets.write_text('{"scenes": []}', "utf-8")
    out = tmp_path / "run"
    args = ["plan", "--env", str(GYUDON / "env.json"), "--targets", str(targets),
            "--fixture", str(GYUDON / "script.json"), "--out", str(out)]
    assert main(args) == 0
    graph = parse_graph((out / "graph.json").read_text("utf-8"))
    assert graph.units == () and graph.nodes == ()


def test_plan_missing_input(tmp_path):
    args = ["plan", "--env", str(tmp_path / "nope.json"), "--targets", str(GYUDON / "targets.json"),
            "--fixture", str(GYUDON / "script.json"), "--out", str(tmp_path / "run")]
    assert main(args) == 1


def test_plan_missing_flags(capsys):
    assert main(["plan", "--env", "x.json"]) == 2
    assert "--targets" in capsys.readouterr().err


def test_plan_refuses_a_locked_directory(tmp_path, capsys):
    out = tmp_path / "run"
    out.mkdir()
    (out / LOCKFILE).write_text("", "utf-8")
    assert main(plan_args("gyudon", out)) == 1
    assert "in use" in capsys.readouterr().err
    assert not (out / "report.json").exists()


def test_plan_from_manifest(tmp_path):
    for name in ("env.json", "targets.json", "script.json"):
        shutil.copy(GYUDON / name, tmp_path / name)
    manifest = tmp_path / "run.json"
    manifest.write_text(json.dumps({
        "env": "env.json", "targets": "targets.json", "fixture": "script.json",
        "out": "run", "planner": "correcting", "faults": 2, "seed": 1,
    }), "utf-8")
    assert main(["plan", "--manifest", str(manifest)]) == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text("utf-8"))
    assert report["replanning_rounds"] == 2


@pytest.mark.parametrize("doc, code", [
    ({"env": "env.json", "targets": "targets.json"}, 2),
    ({"env": "env.json", "targets": "targets.json", "out": "o", "colour": "red"}, 2),
    ({"env": "env.json", "targets": "targets.json", "out": "o", "fixture": "gone.json"}, 1),
    ({"env": "env.json", "targets": "targets.json", "out": "o", "planner": "scripted"}, 2),
])
def test_bad_manifests(tmp_path, doc, code):
    for name in ("env.json", "targets.json"):
        shutil.copy(GYUDON / name, tmp_path / name)
    manifest = tmp_path / "run.json"
    manifest.write_text(json.dumps(doc), "utf-8")
    assert main(["plan", "--manifest", str(manifest)]) == code
    assert not (tmp_path / "o").exists()


def test_plan_is_deterministic(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(plan_args("gyudon", out, "--planner", "correcting", "--faults", "3", "--seed", "7")) == 0
        outputs.append(((out / "graph.json").read_bytes(), (out / "report.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_plan_with_oracle(tmp_path):
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({"scenes": [
        {"scene_id": 1, "targets": [{"name": "Frying pan", "place": "On(Stove)"}]},
    ]}), "utf-8")
    out = tmp_path / "run"
    args = ["plan", "--env", str(GYUDON / "env.json"), "--targets", str(targets),
            "--planner", "oracle", "--depth", "3", "--out", str(out)]
    assert main(args) == 0
    report = json.loads((out / "report.json").read_text("utf-8"))
    assert len(report["scenes"][0]["steps"]) == 2


# -- validate


def test_validate_golden_plan(capsys):
    assert main(["validate", "--env", str(GYUDON / "env.json"), "--plan", str(GYUDON / "golden.plan")]) == 0
    out = capsys.readouterr().out
    steps = parse_plan_text((GYUDON / "golden.plan").read_text("utf-8"))
    assert out.count(": ok: ") == len(steps) > 0


def test_validate_grasp_conflict(tmp_path, capsys):
    plan = tmp_path / "bad.plan"
    plan.write_text(
        "Pick | Knife | Right hand | Right storage\n"
        "Pick | Frying pan | Right hand | Right storage\n"
        "Cook | Frying pan | Stove\n",
        "utf-8",
    )
    assert main(["validate", "--env", str(GYUDON / "env.json"), "--plan", str(plan)]) == 3
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0].startswith("line 1: ok")
    assert lines[1].startswith("line 2: Action 2 ") and "RightHand.holding = none, but actual = Knife" in lines[1]
    assert len(lines) == 2


def test_validate_empty_plan_echoes_env(tmp_path, capsys):
    plan = tmp_path / "empty.plan"
    plan.write_text("# nothing to do\n\n", "utf-8")
    assert main(["validate", "--env", str(GYUDON / "env.json"), "--plan", str(plan)]) == 0
    env = load_env((GYUDON / "env.json").read_text("utf-8"))
    assert load_env(capsys.readouterr().out) == env


def test_validate_reports_unknown_objects(tmp_path, capsys):
    plan = tmp_path / "ghost.plan"
    plan.write_text("Pick | Ghost | Left hand | Workspace\n", "utf-8")
    assert main(["validate", "--env", str(GYUDON / "env.json"), "--plan", str(plan)]) == 3
    assert "line 1: invalid" in capsys.readouterr().out


def test_validate_parse_error(tmp_path, capsys):
    plan = tmp_path / "broken.plan"
    plan.write_text("Pick | Knife | Right hand | Right storage\nPick || Left hand\n", "utf-8")
    assert main(["validate", "--env", str(GYUDON / "env.json"), "--plan", str(plan)]) == 2
    assert "line 2" in capsys.readouterr().err


# -- export


@pytest.fixture
def gyudon_graph(tmp_path) -> Path:
    out = tmp_path / "run"
    assert main(plan_args("gyudon", out)) == 0
    return out / "graph.json"


def test_export_dot_boxes_match_units(gyudon_graph, capsys):
    assert main(["export", "--graph", str(gyudon_graph), "--format", "dot"]) == 0
    dot = capsys.readouterr().out
    units = parse_graph(gyudon_graph.read_text("utf-8")).units
    assert dot.startswith("digraph foon {")
    assert dot.count("shape=box") == len(units) > 0


def test_export_json_is_canonical(gyudon_graph, tmp_path):
    out = tmp_path / "again.json"
    assert main(["export", "--graph", str(gyudon_graph), "--format", "json", "--out", str(out)]) == 0
    assert out.read_bytes() == gyudon_graph.read_bytes()


def test_export_single_unit_graph(tmp_path, capsys):
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({"scenes": [
        {"scene_id": 1, "targets": [{"name": "Knife", "place": "InHand(Right)"}]},
    ]}), "utf-8")
    out = tmp_path / "run"
    args = ["plan", "--env", str(GYUDON / "env.json"), "--targets", str(targets),
            "--planner", "oracle", "--depth", "1", "--out", str(out)]
    assert main(args) == 0
    assert main(["export", "--graph", str(out / "graph.json")]) == 0
    dot = capsys.readouterr().out
    assert len(re.findall(r"^\s+\w+ \[label=", dot, re.MULTILINE)) == 5


def test_export_malformed_graph(tmp_path):
    bad = tmp_path / "g.json"
    bad.write_text('{"units": 3}', "utf-8")
    assert main(["export", "--graph", str(bad)]) == 2


# -- exit-code contract


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.text(max_size=80))
def test_malformed_inputs_exit_with_parse_code(tmp_path, text):
    env = tmp_path / "env.json"
    env.write_text(text, "utf-8")
    plan = tmp_path / "empty.plan"
    plan.write_text("", "utf-8")
    srt = tmp_path / "x.srt"
    srt.write_text(text, "utf-8")
    graph = tmp_path / "g.json"
    graph.write_text(text, "utf-8")
    assert main(["validate", "--env", str(env), "--plan", str(plan)]) in (0, 2)
    assert main(["segment", "--subtitles", str(srt), "--out", str(tmp_path / "s.json")]) in (0, 2)
    assert main(["export", "--graph", str(graph), "--out", str(tmp_path / "g.dot")]) in (0, 2)
