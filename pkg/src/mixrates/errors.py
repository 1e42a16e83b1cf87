"""Exception types shared across the package."""


class MixratesError(Exception):
    """Base class for all package errors."""


class MetricMismatch(MixratesError):
    """A metric requiring covariances was applied to a mean-only measure."""


class SingularCovariance(MixratesError):
    """Cholesky factorization of a covariance matrix failed."""


class DimensionMismatch(MixratesError):
    """Inputs with incompatible shapes or parameter dimensions."""


class DimensionUnsupported(MixratesError):
    """Operation defined only for one-dimensional parameter spaces."""


class InfeasibleMarginals(MixratesError):
    """Transport marginals whose total masses disagree."""


class UnsupportedCellOrder(MixratesError):
    """A Voronoi cell cardinality with no known exponent entry."""

    def __init__(self, cardinality: int):
        self.cardinality = cardinality
        super().__init__(
            f"no exponent known for cells of cardinality {cardinality}"
        )


class NonpositiveWeight(MixratesError):
    """A mixing weight <= 0 where the log-weight penalty must be finite."""


class DegenerateData(MixratesError):
    """Fewer observations than fitted components."""


class UnsupportedModel(MixratesError):
    """Unknown benchmark model name or (model, k0, k) combination."""


class InsufficientData(MixratesError):
    """Not enough usable records for a regression fit."""
