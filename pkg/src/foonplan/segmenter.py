"""Subtitle-driven scene segmentation.

Each cue is labelled with the motion whose keyword phrases it resembles most
(if that score clears the threshold); maximal runs of equally labelled cues
become scenes. Runs that match no motion are kept but flagged as
``candidate-unnecessary``. Whether they really are unnecessary is decided
downstream by the planner.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from importlib import resources
from itertools import groupby

from foonplan.errors import EmptyLexicon, ParseError
from foonplan.motions import MotionLibrary
from foonplan.planio import SubtitleCue

DEFAULT_THRESHOLD = 0.3
COOKING = "cooking"
CANDIDATE_UNNECESSARY = "candidate-unnecessary"

_TOKEN = re.compile(r"[a-z0-9']+")


def tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def similarity(text: str, phrase: str) -> float:
    """max(token-multiset cosine, 1.0 if ``phrase`` is a substring of ``text``)."""
    t, p = text.lower(), phrase.lower().strip()
    if p and p in t:
        return 1.0
    a, b = Counter(tokens(t)), Counter(tokens(p))
    if not a or not b:
        return 0.0
    dot = sum(n * b[w] for w, n in a.items())
    norm = math.sqrt(sum(n * n for n in a.values())) * math.sqrt(sum(n * n for n in b.values()))
    return dot / norm


@dataclass(frozen=True)
class ActionLexicon:
    """Motion name -> keyword phrases, in declaration order (used for tie-breaks)."""

    entries: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        for motion, phrases in self.entries:
            if not phrases:
                raise ValueError(f"{motion}: keyword list is empty")
            for p in phrases:
                if p != p.lower() or not p.strip():
                    raise ValueError(f"{motion}: phrase {p!r} must be non-empty lowercase")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[str]]) -> ActionLexicon:
        return cls(tuple((m, tuple(ps)) for m, ps in mapping.items()))

    def to_mapping(self) -> dict[str, list[str]]:
        return {m: list(ps) for m, ps in self.entries}

    def check_against(self, library: MotionLibrary) -> None:
        for motion, _ in self.entries:
            if motion not in library:
                raise ValueError(f"lexicon motion {motion!r} is not in the motion library")

    @property
    def motions(self) -> list[str]:
        return [m for m, _ in self.entries]


def load_lexicon(text: str) -> ActionLexicon:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from None
    if not isinstance(doc, dict) or not all(
        isinstance(v, list) and all(isinstance(p, str) for p in v) for v in doc.values()
    ):
        raise ParseError("lexicon must map motion names to lists of phrases", "$")
    try:
        return ActionLexicon.from_mapping(doc)
    except ValueError as exc:
        raise ParseError(str(exc), "$") from None


def default_lexicon() -> ActionLexicon:
    text = resources.files("foonplan.data").joinpath("lexicon.json").read_text("utf-8")
    return load_lexicon(text)


@dataclass(frozen=True)
class SceneRecord:
    scene_id: int
    first_cue: int
    last_cue: int
    motion: str | None
    text: str
    start: int
    end: int
    flag: str

    def to_doc(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "first_cue": self.first_cue,
            "last_cue": self.last_cue,
            "motion": self.motion,
            "text": self.text,
            "start_ms": self.start,
            "end_ms": self.end,
            "flag": self.flag,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> SceneRecord:
        return cls(doc["scene_id"], doc["first_cue"], doc["last_cue"], doc["motion"],
                   doc["text"], doc["start_ms"], doc["end_ms"], doc["flag"])


def label(text: str, lexicon: ActionLexicon, threshold: float) -> str | None:
    best, best_score = None, -1.0
    for motion, phrases in lexicon.entries:
        score = max(similarity(text, p) for p in phrases)
        if score > best_score:
            best, best_score = motion, score
    return best if best_score >= threshold else None


def segment(
    cues: Sequence[SubtitleCue],
    lexicon: ActionLexicon,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[SceneRecord]:
    if not lexicon.entries:
        raise EmptyLexicon("the action lexicon has no motions")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    labelled = [(cue, label(cue.text, lexicon, threshold)) for cue in cues]
    scenes = []
    for motion, run in groupby(labelled, key=lambda pair: pair[1]):
        run_cues = [cue for cue, _ in run]
        scenes.append(SceneRecord(
            scene_id=len(scenes) + 1,
            first_cue=run_cues[0].index,
            last_cue=run_cues[-1].index,
            motion=motion,
            text=" ".join(" ".join(c.text.split()) for c in run_cues),
            start=run_cues[0].start,
            end=run_cues[-1].end,
            flag=COOKING if motion else CANDIDATE_UNNECESSARY,
        ))
    return scenes


def scenes_to_json(scenes: Sequence[SceneRecord]) -> str:
    return json.dumps({"scenes": [s.to_doc() for s in scenes]}, indent=2, ensure_ascii=False) + "\n"


def scenes_from_json(text: str) -> list[SceneRecord]:
    try:
        doc = json.loads(text)
        return [SceneRecord.from_doc(s) for s in doc["scenes"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed scenes document: {exc}", "$") from None
