"""Exception hierarchy shared by every module of the package."""


class NepvError(Exception):
    """Base class for all errors raised by :mod:`nepv`."""


class NotHermitian(NepvError, ValueError):
    pass


class BackendFailure(NepvError, RuntimeError):
    """The dense eigensolver did not converge."""


class RankDeficient(NepvError, ValueError):
    pass


class DimensionMismatch(NepvError, ValueError):
    pass


class AngleAtPiOverTwo(NepvError, ValueError):
    """A canonical angle is (numerically) pi/2, so its tangent is infinite."""


class SingularOverlap(NepvError, ValueError):
    """``Vstar^H V`` is singular; the tangent-angle matrix does not exist."""


class InvalidParams(NepvError, ValueError):
    pass


class NotASolution(NepvError):
    """The candidate basis does not satisfy the NEPv to the requested tolerance."""


class GapViolation(NepvError):
    """The eigenvalue gap at the solution is not positive."""


class InsufficientHistory(NepvError, ValueError):
    pass


class NonPositiveError(NepvError, ValueError):
    """The error sequence reached exactly zero; a log-linear fit is undefined."""


class ShiftOutOfRange(NepvError, ValueError):
    """The level shift is not in ``(-delta_star, +inf)``."""


class TooLarge(NepvError, ValueError):
    """The dense real representation would exceed the configured size cap."""


class NotSelfAdjoint(NepvError):
    pass


class InvalidSpectrum(NepvError, ValueError):
    pass


class NoRootInRange(NepvError):
    pass


class CertificationFailed(NepvError):
    """No certified solution could be obtained for a run configuration."""
