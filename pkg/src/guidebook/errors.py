"""Shared exception types."""


class GuidebookError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GuidebookError):
    """A source document is not well-formed (bad JSON, wrong top-level shape)."""


class ValidationError(GuidebookError):
    """A well-formed document violates a catalog invariant.

    ``path`` locates the offending field, e.g. ``walls[2].targets[0].polygon``.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class OutOfBounds(GuidebookError):
    """A tap point lies outside the wall image."""


class UnknownClip(GuidebookError):
    """A clip_id does not resolve in the shared catalog."""


class UnknownWall(GuidebookError):
    """A wall_id does not resolve in the shared catalog."""


class NotPlaying(GuidebookError):
    """Stop requested while no personal clip is active. A signal, not a crash."""


class WrongSender(GuidebookError):
    """A control message arrived from a device other than the paired peer."""


class InvalidScenario(GuidebookError):
    """A scenario file violates its invariants or references unknown content."""


class InvariantViolation(GuidebookError):
    """A fuzzed run broke an engine invariant; carries a description of the breach."""
