"""Exception hierarchy shared across the package."""


class AdapDiscomError(Exception):
    """Base class for all package errors."""


class ParseError(AdapDiscomError):
    """Malformed numeric token in an input file."""


class ShapeError(AdapDiscomError):
    """Array or file dimensions inconsistent with the declared layout."""


class BlockPatternError(AdapDiscomError):
    """Row whose missingness is not constant within a modality block."""


class DegenerateColumn(AdapDiscomError):
    """Column with fewer than two observations or zero observed variance."""


class EmptyOverlap(AdapDiscomError):
    """Predictor pair with fewer than two jointly observed samples."""

    def __init__(self, j, t, count):
        self.j, self.t, self.count = j, t, count
        super().__init__(f"pair ({j}, {t}) has overlap count {count} < 2")


class DegenerateRatio(AdapDiscomError):
    """Zero denominator in an optimal-weight ratio."""


class NonPositiveDenominator(AdapDiscomError):
    """Lower-bound quotient for the fast reparametrization is undefined."""


class OutOfRange(AdapDiscomError):
    """Tuning parameter outside its admissible interval."""


class AllZeroCovariance(AdapDiscomError):
    """Cross-covariance vector identically zero; no penalty path exists."""


class ZeroDiagonal(AdapDiscomError):
    """Unpinned coordinate with non-positive covariance diagonal."""

    def __init__(self, j):
        self.j = j
        super().__init__(f"coordinate {j} has non-positive diagonal")


class IndefiniteCovariance(AdapDiscomError):
    """Covariance estimate fails the positive semi-definiteness check."""


class ConvergenceFailure(AdapDiscomError):
    """Eigensolver did not converge."""


class NoFeasibleCombination(AdapDiscomError):
    """Every candidate weight combination was rejected as indefinite."""


class TooFewCompleteCases(AdapDiscomError):
    """Fewer than two fully observed samples available."""


class DimensionError(AdapDiscomError):
    """Scenario dimensions incompatible with the requested structure."""
