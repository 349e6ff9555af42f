"""Plain-text rendering of validation failures for the next prompt.

Actions are numbered from 1 in the text, because that is how a reader of
the plan counts them; :class:`Diagnosis` indices stay 0-based.
"""

from __future__ import annotations

import re

from foonplan.errors import ParseError
from foonplan.validator import Diagnosis, DiagnosisKind, GoalReport, Mismatch

_ACTION_RE = re.compile(r"^Action (\d+) '")


def _requirement(m: Mismatch) -> str:
    return f"required {m.subject}.{m.key} {m.relation} {m.required}, but actual = {m.actual}."


def render_feedback(failure: Diagnosis | GoalReport | ParseError) -> str:
    """Deterministic feedback text, one line per violated requirement."""
    if isinstance(failure, GoalReport):
        if failure.satisfied:
            raise ValueError("a satisfied goal report has nothing to say")
        return "\n".join(f"Target not reached: {_requirement(m)}" for m in failure.unmet)
    if isinstance(failure, ParseError):
        return f"Response rejected: {failure}."
    head = f"Action {failure.index + 1} '{failure.step}'"
    if failure.kind is DiagnosisKind.INFEASIBLE:
        return "\n".join(f"{head} infeasible: {_requirement(m)}" for m in failure.mismatches)
    return f"{head} invalid ({failure.kind.value}): {failure.detail}."


def failed_action(feedback: str) -> int | None:
    """0-based index of the action a feedback text blames, if any."""
    m = _ACTION_RE.match(feedback)
    return int(m.group(1)) - 1 if m else None
