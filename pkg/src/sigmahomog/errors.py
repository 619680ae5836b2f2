"""Exception hierarchy shared by all solver modules."""


class SigmaHomogError(Exception):
    """Base class for every error raised by the toolkit."""


class NonFiniteField(SigmaHomogError, ValueError):
    pass


class GridMismatch(SigmaHomogError, ValueError):
    pass


class NonSymmetric(SigmaHomogError, ValueError):
    pass


class NotCoercive(SigmaHomogError, ValueError):
    pass


class RadiusTooLarge(SigmaHomogError, ValueError):
    pass


class EmptyObstacle(SigmaHomogError, ValueError):
    pass


class NotElliptic(SigmaHomogError, ValueError):
    pass


class NotSPD(SigmaHomogError, ValueError):
    pass


class UnresolvedScale(SigmaHomogError, ValueError):
    pass


class CompatibilityViolated(SigmaHomogError, ValueError):
    pass


class ConfigError(SigmaHomogError, ValueError):
    pass


class SolverFailure(SigmaHomogError, RuntimeError):
    """A numerical solve did not produce an acceptable answer."""


class NoConvergence(SolverFailure):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PoissonNoConvergence(NoConvergence):
    pass


class CFLViolation(SolverFailure):
    pass


class CrossCheckFailed(SolverFailure):
    pass
