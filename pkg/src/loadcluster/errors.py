"""Exception types. Argument errors are plain ``ValueError``."""


class LoadClusterError(Exception):
    pass


class ParseError(LoadClusterError):
    """Malformed CSV input (ragged rows, unparsable cells)."""


class ValidationError(LoadClusterError, ValueError):
    """Input violates a structural invariant (duplicate timestamps, asymmetric kernel)."""


class DataQualityError(LoadClusterError):
    """Too much missing data in one area."""

    def __init__(self, area_id, missing_fraction):
        self.area_id = area_id
        self.missing_fraction = missing_fraction
        super().__init__(
            f"area {area_id!r} has {missing_fraction:.1%} missing cells (limit 20%)"
        )


class FeatureError(LoadClusterError):
    pass


class DegenerateDataError(LoadClusterError):
    pass


class ConvergenceError(LoadClusterError):
    """Raised when the R-PCA solver hits its iteration limit.

    ``residual`` is the last relative residual and ``partial`` the
    :class:`~loadcluster.rpca.Decomposition` at the final iterate.
    """

    def __init__(self, message, residual, partial):
        super().__init__(message)
        self.residual = residual
        self.partial = partial
