"""Exception hierarchy for histreg.

Input problems derive from :class:`InputError` and numerical failures from
:class:`NumericalError`; the command-line interface maps them to exit codes 2 and 3.
"""


class HistRegError(ValueError):
    """Base class for all histreg errors."""


class InputError(HistRegError):
    """Invalid data, arguments or files."""


class NumericalError(HistRegError):
    """A computation could not be completed."""


class NonOrderedBins(InputError):
    """Bins are not ordered or a bin has lower > upper."""


class NegativeWeight(InputError):
    """A histogram weight is negative."""


class WeightSumNotOne(InputError):
    """Histogram weights do not sum to 1."""


class UnboundedBin(InputError):
    """A bin bound is infinite or NaN."""


class AllWeightsZero(InputError):
    """No bin carries positive weight."""


class OutOfDomain(InputError):
    """Evaluation point outside [0, 1]."""


class NotMonotone(InputError):
    """Pieces overlap, so the function is not a quantile function."""


class LengthMismatch(InputError):
    """Sequences that must be aligned have different lengths."""


class DimensionMismatch(InputError):
    """Array shapes or partitions do not agree."""


class ArityMismatch(InputError):
    """Wrong number of predictors for a model."""


class EmptyTable(InputError):
    """A table or column has no units or no variables."""


class NegativeSlopeUnsupported(InputError):
    """A baseline slope is negative and would flip the bins."""


class InvalidParameter(InputError):
    """A numeric parameter is outside its admissible range."""


class DatasetError(InputError):
    """A dataset or report file cannot be parsed or fails its schema.

    Args:
        message: Human readable description.
        line: 1-based line number in the source file, when known.
        location: Logical coordinates such as ``unit 'u3' / variable 'Y'``.
    """

    def __init__(self, message: str, line: int | None = None, location: str | None = None):
        self.message = message
        self.line = line
        self.location = location
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if location:
            prefix.append(location)
        text = f"{', '.join(prefix)}: {message}" if prefix else message
        super().__init__(text)


class DegenerateResponse(NumericalError):
    """The response has no dispersion around its symbolic mean."""


class MaxIterationsExceeded(NumericalError):
    """The active-set solver did not converge."""


class NotPSD(NumericalError):
    """The quadratic program is not positive semidefinite."""


class Unbounded(NumericalError):
    """The quadratic program has no minimiser; the objective decreases without bound."""
