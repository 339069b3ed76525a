"""Exception types shared across the package.

Two branches matter to callers: ValidationError for problems with what was
handed in (files, shapes, preconditions) and ComputationError for solvers or
searches that could not produce a result. The CLI maps them to exit codes 2
and 3 respectively.
"""


class AuditError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(AuditError):
    """Input, precondition, or configuration problem."""


class ComputationError(AuditError):
    """A numeric routine failed or the requested object does not exist."""


# bundle loading

class MissingFile(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class MissingClass(ValidationError):
    pass


class VersionUnsupported(ValidationError):
    pass


class BundleReadError(ValidationError):
    """A payload file exists but cannot be parsed."""


# head decomposition

class DegenerateHead(ValidationError):
    """The weight matrix is identically zero."""


class DomainBoundMissing(ValidationError):
    """Geometry was requested before a working-cube bound was set."""


# geometry

class EmptyClass(ValidationError):
    pass


class DimensionTooHigh(ValidationError):
    pass


class SolverStall(ComputationError):
    """Iteration cap hit before the optimality certificate was met."""


class NotSourceClass(ValidationError):
    pass


class NotTargetClass(ValidationError):
    pass


class NoInterface(ComputationError):
    """The two classes share no decision boundary inside the cube."""


class EmptyTargetRegion(ComputationError):
    """The target class dominates nowhere inside the cube."""


class DegeneratePair(ComputationError):
    """Two head rows coincide, so their pairwise boundary is degenerate."""


class DegenerateRows(ComputationError):
    """Pairwise row distances collapse to zero."""


class TauOutOfRange(ValidationError):
    pass


class WitnessNotFound(ComputationError):
    pass


# ambiguity / detector

class TooFewClasses(ValidationError):
    pass


class EmptyScores(ValidationError):
    pass


class MissingLabels(ValidationError):
    pass


class UncalibratedThreshold(ValidationError):
    pass


class NoCalibrationStats(ValidationError):
    pass


class EmptyClassSet(ValidationError):
    pass


class ColumnMismatch(ValidationError):
    pass


class SingleClassLabels(ValidationError):
    pass


class DegenerateColumn(UserWarning):
    """Zero-variance feature column, dropped before training."""
