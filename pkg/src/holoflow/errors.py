"""Exception types shared across holoflow."""

from __future__ import annotations


class HoloflowError(Exception):
    pass


class ParseError(HoloflowError, ValueError):
    """Malformed expression source.

    ``span`` is a ``(start, end)`` pair of byte offsets into the UTF-8
    encoded source; ``expected`` lists the token kinds that would have
    been accepted at that position (may be empty).
    """

    def __init__(self, message: str, span: tuple[int, int], expected=()):
        self.message = message
        self.span = span
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at byte {span[0]}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class EvaluationError(HoloflowError, ArithmeticError):
    pass


class PoleOrBranch(EvaluationError):
    """Evaluation hit a pole or a branch point of the continued function."""


class IntegrationFailure(HoloflowError):
    """Base for integrator failures; carries the partial trajectory."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class SingularityEncountered(IntegrationFailure):
    pass


class StepSizeUnderflow(IntegrationFailure):
    pass
