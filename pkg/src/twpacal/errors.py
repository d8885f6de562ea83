"""Exception hierarchy.

Two broad families: ``ValidationError`` for malformed or inconsistent
inputs, and ``NumericalError`` for failures that arise inside an otherwise
well-posed computation (singular conversion, divergent model, ...).  The
CLI maps the former to exit code 1 and the latter to exit code 2.
"""


class TwpacalError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TwpacalError):
    """Bad or inconsistent input data."""


class NumericalError(TwpacalError):
    """A computation failed numerically."""


# --- touchstone ---

class MalformedOptionLine(ValidationError):
    pass


class NonMonotonicFrequency(ValidationError):
    pass


class WrongColumnCount(ValidationError):
    pass


class UnsupportedParameterKind(ValidationError):
    pass


# --- network algebra ---

class SingularConversion(NumericalError):
    pass


class GridMismatch(ValidationError):
    pass


class ZRefMismatch(ValidationError):
    pass


class InvalidImpedance(ValidationError):
    pass


class ExtrapolationRequested(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class EmptyBand(ValidationError):
    pass


class BadWindow(ValidationError):
    pass


# --- TRL calibration ---

class SingularThru(NumericalError):
    pass


class DegenerateLine(NumericalError):
    pass


class RootAmbiguity(NumericalError):
    pass


class SingularErrorBox(NumericalError):
    pass


# --- reflection model ---

class DivergentSeries(NumericalError):
    pass


class NoRootInUnitInterval(NumericalError):
    pass
