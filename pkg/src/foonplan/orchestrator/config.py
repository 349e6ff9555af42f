"""Run configuration shared by prompts, planners and the replanning loop."""

from __future__ import annotations

import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from foonplan.motions import MotionLibrary, builtin_library

PLANNER_KINDS = ("remote", "scripted", "correcting", "faulty", "oracle")
DEFAULT_BUDGET = 10

ENV_URL = "FOON_PLANNER_URL"
ENV_MODEL = "FOON_PLANNER_MODEL"
ENV_API_KEY = "FOON_PLANNER_API_KEY"


@dataclass(frozen=True)
class PlannerConfig:
    """Which planner to use and how hard to try.

    ``budget`` is K, the maximum number of planner calls per scene.
    ``validate=False`` selects the unchecked baseline in run_recipe.
    """

    kind: str = "scripted"
    fixture: Path | None = None
    budget: int = DEFAULT_BUDGET
    error_rate: float = 0.0
    seed: int = 0
    faults: int | None = None
    depth: int = 8
    validate: bool = True
    url: str | None = None
    model: str | None = None
    api_key: str | None = field(default=None, repr=False)
    library: MotionLibrary = field(default_factory=builtin_library, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in PLANNER_KINDS:
            raise ValueError(f"planner kind must be one of {PLANNER_KINDS}, got {self.kind!r}")
        if self.budget < 1:
            raise ValueError(f"budget K must be at least 1, got {self.budget}")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError(f"error rate must lie in [0, 1], got {self.error_rate}")
        if self.depth < 1:
            raise ValueError(f"depth bound must be at least 1, got {self.depth}")
        if self.faults is not None and self.faults < 0:
            raise ValueError("fault count cannot be negative")
        if self.kind in ("scripted", "correcting", "faulty") and self.fixture is None:
            raise ValueError(f"the {self.kind} planner needs a fixture file")

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None, **kwargs) -> PlannerConfig:
        """Fill endpoint, model and credential from environment variables."""
        environ = os.environ if environ is None else environ
        kwargs.setdefault("url", environ.get(ENV_URL))
        kwargs.setdefault("model", environ.get(ENV_MODEL))
        kwargs.setdefault("api_key", environ.get(ENV_API_KEY))
        return cls(**kwargs)
