"""Exception types shared across the package."""


class TractorLabError(Exception):
    """Base class for all package errors."""


class SingularEvaluationError(TractorLabError):
    """Division by a jet whose constant term vanishes, or evaluation at a pole."""


class SingularMetricError(SingularEvaluationError):
    """Metric (or jet matrix) with singular constant term at the evaluation point."""


class OrderExceededError(TractorLabError):
    """A derivative of higher order than the jet truncation was requested."""


class VarianceError(TractorLabError):
    """Index-variance mismatch in a tensor operation."""


class DimensionError(TractorLabError):
    """Operation not defined in this dimension."""


class CriticalDimensionError(DimensionError):
    """Dimension hits a zero denominator of a reconstruction formula."""


class HypothesisViolatedError(TractorLabError):
    """A check's geometric hypotheses are not met by the supplied chart."""


class PairingError(TractorLabError):
    """Invalid slot pairing in a contraction pattern."""
