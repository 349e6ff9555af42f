"""Command-line entry point.

Every stage reads and writes files, so any stage can be rerun on its own or
fed hand-written fixtures. Exit codes: 0 success, 1 missing input file,
2 malformed input, 3 infeasible plan or exhausted budget, 4 planner
transport failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from foonplan.core import EnvironmentState, TargetState
from foonplan.errors import FoonError, ParseError, PlannerTransport, SearchSpaceTooLarge
from foonplan.motions import MotionLibrary, builtin_library, instantiate, load_library
from foonplan.orchestrator.config import DEFAULT_BUDGET, PLANNER_KINDS, PlannerConfig
from foonplan.orchestrator.feedback import render_feedback
from foonplan.orchestrator.loop import run_recipe
from foonplan.orchestrator.planners import Script, make_planner
from foonplan.planio import (
    dump_env,
    export_dot,
    load_env,
    load_targets,
    parse_graph,
    parse_plan_text,
    parse_srt,
    serialize_graph,
)
from foonplan.segmenter import (
    DEFAULT_THRESHOLD,
    ActionLexicon,
    default_lexicon,
    load_lexicon,
    scenes_to_json,
    segment,
)
from foonplan.validator import apply_action, check_action

EXIT_OK = 0
EXIT_MISSING = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_TRANSPORT = 4

LOCKFILE = ".foonplan.lock"


class MissingInput(Exception):
    pass


def _read(path: Path | str) -> str:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"{path}: no such file")
    return path.read_text("utf-8")


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)


@dataclass(frozen=True)
class RunManifest:
    """Inputs and settings of one planning run.

    Relative paths in a manifest file resolve against the file's directory.
    Files are parsed by :meth:`load`, before any stage runs.
    """

    env: Path
    targets: Path
    out: Path
    planner: str = "scripted"
    fixture: Path | None = None
    lexicon: Path | None = None
    library: Path | None = None
    threshold: float = DEFAULT_THRESHOLD
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    error_rate: float = 0.0
    faults: int | None = None
    depth: int = 8
    validate: bool = True

    _PATHS = ("env", "targets", "out", "fixture", "lexicon", "library")

    @classmethod
    def from_doc(cls, doc: Any, base: Path = Path(".")) -> RunManifest:
        if not isinstance(doc, dict):
            raise ParseError("manifest must be a JSON object", "$")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ParseError(f"unknown manifest fields: {', '.join(unknown)}", "$")
        for key in ("env", "targets", "out"):
            if key not in doc:
                raise ParseError(f"missing field {key!r}", "$")
        values = dict(doc)
        for key in cls._PATHS:
            if values.get(key) is not None:
                values[key] = base / values[key]
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path) -> RunManifest:
        path = Path(path)
        try:
            doc = json.loads(_read(path))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, f"{path}: line {exc.lineno}") from None
        return cls.from_doc(doc, path.parent)

    def load(self) -> tuple[EnvironmentState, list[TargetState], PlannerConfig, ActionLexicon]:
        """Check every referenced file exists and parses; build the config."""
        for key in self._PATHS:
            path = getattr(self, key)
            if key != "out" and path is not None and not Path(path).is_file():
                raise MissingInput(f"{path}: no such file ({key})")
        env = load_env(_read(self.env))
        targets = load_targets(_read(self.targets))
        library = load_library(_read(self.library)) if self.library else builtin_library()
        lexicon = load_lexicon(_read(self.lexicon)) if self.lexicon else default_lexicon()
        if self.fixture is not None:
            Script.load(self.fixture)
        try:
            config = PlannerConfig.from_env(
                kind=self.planner,
                fixture=self.fixture,
                budget=self.budget,
                error_rate=self.error_rate,
                seed=self.seed,
                faults=self.faults,
                depth=self.depth,
                validate=self.validate,
                library=library,
            )
        except ValueError as exc:
            raise ParseError(str(exc), "manifest") from None
        return env, targets, config, lexicon


# -- commands


def cmd_segment(args: argparse.Namespace) -> int:
    lexicon = load_lexicon(_read(args.lexicon)) if args.lexicon else default_lexicon()
    cues = parse_srt(_read(args.subtitles))
    scenes = segment(cues, lexicon, args.threshold)
    _emit(scenes_to_json(scenes), args.out)
    return EXIT_OK


def _manifest_from_args(args: argparse.Namespace) -> RunManifest:
    if args.manifest:
        return RunManifest.from_file(args.manifest)
    missing = [f"--{k}" for k in ("env", "targets", "out") if getattr(args, k) is None]
    if missing:
        raise ParseError(f"missing {', '.join(missing)} (or give --manifest)", "arguments")
    return RunManifest(
        env=Path(args.env),
        targets=Path(args.targets),
        out=Path(args.out),
        planner=args.planner,
        fixture=Path(args.fixture) if args.fixture else None,
        library=Path(args.library) if args.library else None,
        budget=args.budget,
        seed=args.seed,
        error_rate=args.error_rate,
        faults=args.faults,
        depth=args.depth,
        validate=not args.no_validate,
    )


def cmd_plan(args: argparse.Namespace) -> int:
    manifest = _manifest_from_args(args)
    env, targets, config, _ = manifest.load()
    out = manifest.out
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCKFILE
    try:
        handle = open(lock, "x")
    except FileExistsError:
        print(f"error: {out} is in use by another run (remove {lock} if stale)", file=sys.stderr)
        return EXIT_MISSING
    try:
        handle.close()
        result = run_recipe(env, targets, make_planner(config), config)
        (out / "graph.json").write_text(serialize_graph(result.graph), "utf-8")
        (out / "report.json").write_text(_dumps(result.report_doc()), "utf-8")
        (out / "transcript.json").write_text(_dumps(result.transcript_doc()), "utf-8")
    finally:
        lock.unlink(missing_ok=True)
    done = sum(s.success for s in result.scenes)
    print(f"{done}/{len(targets)} scenes complete, "
          f"{result.replanning_rounds} replanning rounds, success={result.success}")
    return EXIT_OK if result.success else EXIT_INFEASIBLE


def _library_from(args: argparse.Namespace) -> MotionLibrary:
    return load_library(_read(args.library)) if args.library else builtin_library()


def cmd_validate(args: argparse.Namespace) -> int:
    env = load_env(_read(args.env))
    library = _library_from(args)
    steps = parse_plan_text(_read(args.plan))
    for index, (lineno, step) in enumerate(steps):
        try:
            unit = instantiate(library, step)
            diagnosis = check_action(env, unit)
        except FoonError as exc:
            print(f"line {lineno}: invalid: {step}: {exc}")
            return EXIT_INFEASIBLE
        if diagnosis is not None:
            text = render_feedback(dataclasses.replace(diagnosis, index=index))
            for line in text.splitlines():
                print(f"line {lineno}: {line}")
            return EXIT_INFEASIBLE
        env = apply_action(env, unit)
        print(f"line {lineno}: ok: {step}")
    sys.stdout.write(dump_env(env))
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    graph = parse_graph(_read(args.graph))
    text = export_dot(graph) if args.format == "dot" else serialize_graph(graph)
    _emit(text, args.out)
    return EXIT_OK


# -- argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foonplan", description="Build and validate FOON task graphs from cooking plans."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="split an SRT file into scenes")
    p.add_argument("--subtitles", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="scenes JSON file (default: stdout)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("plan", help="run the planning loop over target scenes")
    p.add_argument("--manifest", help="JSON run manifest (replaces the other flags)")
    p.add_argument("--env")
    p.add_argument("--targets")
    p.add_argument("--out", help="output directory")
    p.add_argument("--planner", choices=PLANNER_KINDS, default="scripted")
    p.add_argument("--fixture", help="planner fixture for scripted/correcting/faulty")
    p.add_argument("--library", help="motion library JSON (default: bundled)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="planner calls per scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("--faults", type=int)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--no-validate", action="store_true", help="unchecked baseline mode")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="check a plan file step by step")
    p.add_argument("--env", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--library")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export", help="render a graph as DOT or canonical JSON")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("dot", "json"), default="dot")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except PlannerTransport as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except SearchSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FoonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
