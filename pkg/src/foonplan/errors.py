"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class FoonError(Exception):
    """Base class for all errors raised by foonplan."""


# -- environment / state model


class StateError(FoonError):
    """An EnvironmentState violates one of its invariants."""


class DuplicateName(StateError):
    def __init__(self, name: str) -> None:
        super().__init__(f"duplicate object name {name!r}")
        self.name = name


class DanglingReference(StateError):
    def __init__(self, owner: str, referent: str) -> None:
        super().__init__(f"{owner!r} refers to missing object {referent!r}")
        self.owner = owner
        self.referent = referent


class HandInconsistency(StateError):
    def __init__(self, hand: str, obj: str | None, detail: str = "") -> None:
        msg = f"{hand} hand / {obj!r} disagree"
        super().__init__(f"{msg}: {detail}" if detail else msg)
        self.hand = hand
        self.obj = obj


class InvariantViolation(StateError):
    """Applying a unit produced an inconsistent state (a broken template)."""


class UnknownObject(FoonError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown object {name!r}")
        self.name = name


# -- motion library / instantiation


class BindingError(FoonError):
    """A plan step could not be turned into a ground functional unit."""


class UnknownMotion(BindingError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown motion {name!r}")
        self.name = name


class ArityMismatch(BindingError):
    def __init__(self, motion: str, expected: int, got: int) -> None:
        super().__init__(
            f"{motion} takes {expected} arguments after the motion name, {got} given"
        )
        self.motion = motion
        self.expected = expected
        self.got = got


class SlotDomainError(BindingError):
    def __init__(self, slot: str, token: str, kind: str) -> None:
        super().__init__(f"slot {slot} expects a {kind} token, got {token!r}")
        self.slot = slot
        self.token = token
        self.kind = kind


# -- parsing


class ParseError(FoonError):
    """Malformed input document. ``location`` is a line number or JSON path."""

    def __init__(self, message: str, location: str | int | None = None) -> None:
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location


class DuplicateMotion(ParseError):
    def __init__(self, name: str) -> None:
        super().__init__(f"motion {name!r} defined twice")
        self.name = name


class UnboundSlot(ParseError):
    def __init__(self, template: str, slot: str) -> None:
        super().__init__(f"template {template!r} references undeclared slot {slot}")
        self.template = template
        self.slot = slot


class EmptyLine(ParseError):
    def __init__(self) -> None:
        super().__init__("empty plan line")


class EmptyField(ParseError):
    def __init__(self, position: int) -> None:
        super().__init__(f"empty field at position {position}")
        self.position = position


class NoJsonFound(ParseError):
    def __init__(self) -> None:
        super().__init__("no JSON value found in planner response")


class SchemaError(ParseError):
    def __init__(self, path: str, detail: str) -> None:
        super().__init__(detail, path)
        self.path = path
        self.detail = detail


class VariantMismatch(ParseError):
    def __init__(self, expected: str, got: str) -> None:
        super().__init__(f"expected a {expected} response, got {got}")
        self.expected = expected
        self.got = got


class MalformedTimestamp(ParseError):
    def __init__(self, line: int, text: str) -> None:
        super().__init__(f"malformed timestamp range {text!r}", f"line {line}")
        self.line = line


class NonMonotonicIndex(ParseError):
    def __init__(self, line: int, index: int, previous: int) -> None:
        super().__init__(
            f"cue index {index} does not follow {previous}", f"line {line}"
        )
        self.line = line


# -- segmentation / orchestration


class EmptyLexicon(FoonError):
    pass


class SearchSpaceTooLarge(FoonError):
    def __init__(self, cap: int) -> None:
        super().__init__(f"search frontier exceeded {cap} states")
        self.cap = cap


class PlannerTransport(FoonError):
    """The remote planner could not be reached after all retries."""
