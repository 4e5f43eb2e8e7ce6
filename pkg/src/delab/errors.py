"""Exception hierarchy shared by all delab modules."""


class DelabError(Exception):
    """Base class for every error raised by delab."""


class DomainError(DelabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(DelabError, ValueError):
    """Modal vectors or grid functions do not match their operator/grid."""


class OrderError(DelabError, ValueError):
    """Requested derivative/expansion order exceeds the supported cap."""


class ConvergenceError(DelabError, RuntimeError):
    """An adaptive integrator or quadrature failed to reach its tolerance."""


class NumericError(DelabError, RuntimeError):
    """Eigensolver failure or an out-of-tolerance discrete spectrum."""


class FitError(DelabError, ValueError):
    """Rate fit impossible: too few or degenerate samples."""


class DegenerateInputError(DelabError, ValueError):
    """Input for which the requested ratio is undefined (e.g. zero function)."""


class ConfigError(DelabError, ValueError):
    """Experiment configuration violates one or more guards.

    ``problems`` lists every violated guard, not just the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
