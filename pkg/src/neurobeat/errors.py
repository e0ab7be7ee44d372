"""Exception hierarchy.

Every error raised for bad input data derives from :class:`DataError`, which
the CLI maps to exit status 2.  Configuration mistakes raise
:class:`ConfigError` (exit status 1).
"""


class NeurobeatError(Exception):
    """Base class for all package errors."""


class DataError(NeurobeatError, ValueError):
    """Input data violates a documented contract."""


class ConfigError(NeurobeatError, ValueError):
    """Invalid or unknown configuration."""


# core
class OutOfRange(DataError):
    pass


class InvalidAnnotation(DataError):
    pass


# ingest
class ParseError(DataError):
    pass


class IntegrityError(DataError):
    pass


class VersionError(DataError):
    pass


class BadMagic(DataError):
    pass


class TruncatedFile(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class RaggedRows(DataError):
    pass


class NonNumericCell(DataError):
    pass


class NotAscending(InvalidAnnotation):
    pass


class NonNumericLine(DataError):
    pass


class MissingCell(DataError):
    pass


class TooLong(DataError):
    pass


# dsp
class InvalidBand(DataError):
    pass


class UnstableDesign(DataError):
    pass


class SignalTooShort(DataError):
    pass


class LengthMismatch(DataError):
    pass


# nn
class ShapeError(DataError):
    pass


class InsufficientData(DataError):
    pass


class FoldCountMismatch(DataError):
    pass


# detect / eval
class EmptyCurve(DataError):
    pass


class NonPositiveDuration(DataError):
    pass


class EmptyInput(DataError):
    pass


class DegenerateInput(DataError):
    pass


# synth / report
class JitterTooLarge(DataError):
    pass


class EmptyGroup(DataError):
    pass
