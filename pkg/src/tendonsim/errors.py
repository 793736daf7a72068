"""Exception hierarchy shared by all tendonsim modules.

Exit-code mapping used by the CLI: ValidationError -> 2,
NumericError (and subclasses) -> 3, DegenerateGeometryError -> 4.
"""


class TendonSimError(Exception):
    """Base class for all tendonsim errors."""


class ValidationError(TendonSimError):
    """Bad input: malformed files, dimension mismatches, out-of-schema keys."""


class JointLimitError(ValidationError):
    """A joint angle falls outside its declared position limits."""


class GeometryError(TendonSimError):
    """Degenerate muscle routing (e.g. coincident consecutive via points)."""


class NumericError(TendonSimError):
    """Non-finite state or divergence during simulation."""


class EstimationError(NumericError):
    """Joint-angle estimation failed to make progress.

    Carries the best iterate found so far in ``best_theta`` / ``best_residual``.
    """

    def __init__(self, message, best_theta=None, best_residual=None):
        super().__init__(message)
        self.best_theta = best_theta
        self.best_residual = best_residual


class SingularCorrectionError(NumericError):
    """The masked task Jacobian has no usable columns for a correction."""


class DegenerateGeometryError(TendonSimError):
    """Stereo rays are (near-)parallel; triangulation is ill-posed."""
