"""Exception types shared across the package."""


class RelkinError(Exception):
    """Base class for all package errors."""


class InvalidInput(RelkinError, ValueError):
    pass


class ColinearPair(RelkinError, ValueError):
    """The pair is (numerically) colinear so the frame matrix is singular."""


class DegeneratePair(RelkinError, ValueError):
    """The relative momentum g vanishes."""


class UndefinedAngle(RelkinError, ValueError):
    pass


class StepTooSmall(RelkinError, ArithmeticError):
    """Finite differences lost too many digits to cancellation."""


class SingularAtZero(RelkinError, ValueError):
    pass


class DomainError(RelkinError, ValueError):
    pass


class EmptySurface(RelkinError, ValueError):
    pass


class EmptyWindow(RelkinError, ValueError):
    pass


class QuadratureNotConverged(RelkinError, ArithmeticError):
    """Doubling the quadrature order moved the result by more than tol."""


class GridTooCoarse(RelkinError, ValueError):
    pass


class ConfigError(RelkinError, ValueError):
    pass
