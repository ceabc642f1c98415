"""Exception hierarchy.

Two families matter to callers: validation failures (bad inputs or
configuration, CLI exit code 2) and numerical/runtime failures
(degenerate data, CLI exit code 3). Every exception carries a stable
``code`` used in service responses and CLI error lines.
"""


class CovalignError(Exception):
    """Base class for all library errors."""

    exit_code = 3

    @property
    def code(self) -> str:
        return type(self).__name__


class ValidationFailure(CovalignError):
    """Bad input, flag, or configuration; the request never ran."""

    exit_code = 2


class NumericalFailure(CovalignError):
    """The computation ran but the data made it degenerate."""

    exit_code = 3


# core-model
class AmbiguousPairing(ValidationFailure):
    pass


class CardinalityMismatch(ValidationFailure):
    pass


# preprocess
class InvalidBand(ValidationFailure):
    pass


class TooFewChannels(ValidationFailure):
    pass


class WindowOutOfRange(ValidationFailure):
    pass


class InvalidFactor(ValidationFailure):
    pass


# spd / alignment
class DegenerateCovariance(NumericalFailure):
    pass


class ShapeMismatch(ValidationFailure):
    pass


class MissingClass(ValidationFailure):
    pass


class UnknownClass(ValidationFailure):
    pass


class EmptyState(ValidationFailure):
    pass


# decoding
class EmptyClass(ValidationFailure):
    pass


class SingleClass(ValidationFailure):
    pass


# pipeline-eval
class InvalidConfig(ValidationFailure):
    pass


class InvalidM(ValidationFailure):
    pass


# cli / service
class UnknownArtifact(ValidationFailure):
    pass
