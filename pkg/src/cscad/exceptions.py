"""Exception and warning types shared across the pipeline."""


class CscadError(Exception):
    """Base class for every error raised by this package."""


# --- dataset ingestion / encoding ---

class SchemaError(CscadError):
    pass


class MissingColumn(CscadError):
    pass


class UnknownCategory(CscadError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: category {value!r} not declared")
        self.row = row
        self.column = column
        self.value = value


class UnparsableNumber(CscadError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value


class DegenerateSplit(CscadError):
    pass


class SeriesTooShort(CscadError):
    pass


# --- correlation mining ---

class WindowExceedsSeries(CscadError):
    pass


class StateOutOfRange(CscadError):
    pass


class TooFewObservations(CscadError):
    pass


class LengthMismatch(CscadError):
    pass


# --- graph ---

class AsymmetricInput(CscadError):
    pass


# --- differentiable compute ---

class ShapeMismatch(CscadError):
    pass


class NotScalarLoss(CscadError):
    pass


class DetachedTensor(CscadError):
    pass


class NonFiniteGradient(CscadError):
    pass


class EmptySequence(CscadError):
    pass


# --- reconstruction network ---

class NonFiniteActivation(CscadError):
    pass


class DimensionMismatch(CscadError):
    pass


class NonFiniteLoss(CscadError):
    pass


# --- discriminating network ---

class TooFewSamples(CscadError):
    pass


class OverlappingSelection(CscadError):
    pass


class EmptyClass(CscadError):
    pass


# --- pipeline / CLI ---

class ConfigError(CscadError):
    pass


class IdMismatch(CscadError):
    pass


class StaleArtifact(CscadError):
    pass


class StageError(CscadError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


# --- warnings ---

class ConstantColumnWarning(UserWarning):
    pass


class EmptyGraphWarning(UserWarning):
    pass
