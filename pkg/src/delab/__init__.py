"""Asymptotic profiles of damped wave equations with spectral realizations."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    DelabError,
    DomainError,
    FitError,
    NumericError,
    OrderError,
    ShapeError,
)
from .spectral import CauchyPair, EigenMode, ModalOperator, evolve, heat_apply, mode_solve  # noqa: E402
from .expansion import in_jn, partial_sum_V, profile_poly, profile_v, regularize, remainder  # noqa: E402
from .domains import build_interval, build_radial_exterior, build_whole_line  # noqa: E402

__all__ = [
    "__version__",
    "CauchyPair", "EigenMode", "ModalOperator", "evolve", "heat_apply", "mode_solve",
    "in_jn", "partial_sum_V", "profile_poly", "profile_v", "regularize", "remainder",
    "build_interval", "build_radial_exterior", "build_whole_line",
    "ConfigError", "ConvergenceError", "DegenerateInputError", "DelabError", "DomainError",
    "FitError", "NumericError", "OrderError", "ShapeError",
]
