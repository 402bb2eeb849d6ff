"""Exception hierarchy shared by all modules."""


class OverdetError(Exception):
    """Base class for every error raised by :mod:`overdet`."""


class InvalidParameters(OverdetError, ValueError):
    pass


class StepFailure(OverdetError):
    """The adaptive integrator could not meet the requested tolerance."""


class HorizonTooShort(OverdetError):
    """Fewer critical points than requested lie in [0, R_max]."""


class DegenerateCritical(OverdetError):
    pass


class GridTooCoarse(OverdetError, ValueError):
    pass


class SolverFailure(OverdetError):
    pass


class ZeroDenominator(OverdetError, ZeroDivisionError):
    pass


class PositiveGroundEigenvalue(OverdetError):
    """gamma_1 >= 0; the ground state of the linearization must be negative."""


class DomainCollapse(OverdetError):
    """1 + h vanishes somewhere, so the perturbed cylinder degenerates."""


class FloorDominated(OverdetError):
    """Residuals stopped decreasing with s: the grid error floor was reached."""


class ConfigError(OverdetError, ValueError):
    pass
