"""Exception types shared across the library."""


class LbSpectraError(Exception):
    """Base class for all library errors."""


class NonConvergence(LbSpectraError):
    """An iterative procedure (Newton projection, eigensolver) hit its cap."""


class OutsideStrip(LbSpectraError):
    """A point lies outside the tubular neighborhood where the closest-point
    projection is well defined."""


class DegenerateHessian(LbSpectraError):
    """Eigen-decomposition of the tangential distance Hessian failed."""


class UnsupportedCombination(LbSpectraError):
    """Requested surface/cell/point/rule combination is not provided."""


class UnsupportedSurface(LbSpectraError):
    """Closed-form data requested for a surface that has none."""


class ProjectionFailure(LbSpectraError):
    """A mesh vertex or lift node could not be snapped onto the surface."""


class ContinuityViolation(LbSpectraError):
    """Internal consistency check on shared-facet data failed."""


class DegenerateCell(LbSpectraError):
    """The parametric map has a non-positive area factor."""


class IndefiniteMass(LbSpectraError):
    """Mass matrix is not positive definite."""


class ClusterNotSeparated(LbSpectraError):
    """Discrete spectrum does not separate the target cluster; h too large."""


class OracleInsufficient(LbSpectraError):
    """Reference quadrature and its refinement disagree beyond tolerance."""


class ExtrapolationUnstable(LbSpectraError):
    """Richardson extrapolation refuses to serve as a reference."""


class InsufficientData(LbSpectraError):
    """Too few data points for a rate fit."""


class NonPositiveError(LbSpectraError):
    """An error value sits below the noise floor and cannot enter a fit."""


class ConfigError(LbSpectraError):
    """Malformed study configuration."""
