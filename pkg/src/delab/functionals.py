"""Norms and functionals of solutions: energies, graph norms, L^q and Nash ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError, OrderError, ShapeError
from .quadrature import adaptive_simpson
from .spectral import evolve, fsum_weighted

MAX_GRAPH_ORDER = 12
MAX_HEAT_MOMENT = 8


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    sharp: float
    l2sq: float


@dataclass(frozen=True)
class GeneratorPair:
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if f.shape != g.shape:
            raise ShapeError(f"pair components differ in shape: {f.shape} vs {g.shape}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)


def energy(op, u, uprime):
    """``E = ||u'||^2 + ||A^{1/2} u||^2``."""
    u = op.check(u, "u")
    uprime = op.check(uprime, "u'")
    return fsum_weighted(op.weight, uprime * uprime + op.lam * u * u)


def h_norm_sq(op, f, g):
    """``||A^{1/2} f||^2 + ||f||^2/4 + ||g + f/2||^2``."""
    f = op.check(f, "f")
    g = op.check(g, "g")
    shifted = g + 0.5 * f
    return fsum_weighted(op.weight, op.lam * f * f + 0.25 * f * f + shifted * shifted)


def sharp_norm_sq(op, u, uprime):
    """Lyapunov quantity of a trajectory: the energy-space norm of ``(u, u')``."""
    return h_norm_sq(op, u, uprime)


def energy_report(op, u, uprime):
    return EnergyReport(energy(op, u, uprime), sharp_norm_sq(op, u, uprime), op.norm_sq(u))


def generator_apply(op, p):
    """``(f, g) -> (g, -A f - g)``."""
    f = op.check(p.f, "f")
    g = op.check(p.g, "g")
    return GeneratorPair(g.copy(), -op.lam * f - g)


def graph_norm_sq(op, p, n):
    """``sum_{k <= n} ||L^k p||^2`` in the energy-space norm."""
    if int(n) != n or not 0 <= n <= MAX_GRAPH_ORDER:
        raise OrderError(f"graph-norm order must be an integer in [0, {MAX_GRAPH_ORDER}], got {n}")
    total = []
    for k in range(int(n) + 1):
        if k:
            p = generator_apply(op, p)
        total.append(h_norm_sq(op, p.f, p.g))
    return math.fsum(total)


def dissipation_integral(op, data, t1, tol=1e-10):
    """``2 int_0^t1 ||u'(s)||^2 ds`` by adaptive Simpson.

    ``tol`` is relative to the initial energy, which bounds the integral.
    """
    if not t1 > 0:
        raise DomainError(f"t1 must be positive, got {t1}")
    if tol < 1e-12:
        raise DomainError(f"tolerance must be >= 1e-12, got {tol}")
    data.matches(op)
    e0 = energy(op, data.u0, data.u1)
    if e0 == 0.0:
        return 0.0

    def integrand(s):
        _, du = evolve(op, data, s)
        return 2.0 * op.norm_sq(du)

    return adaptive_simpson(integrand, 0.0, float(t1), rtol=tol, atol=tol * e0)


def heat_square_integral(op, f, m, tmax, tol=1e-10):
    """``int_0^tmax (1+t)^m ||A^{(m+1)/2} exp(-tA) f||^2 dt``."""
    if int(m) != m or not 0 <= m <= MAX_HEAT_MOMENT:
        raise OrderError(f"moment must be an integer in [0, {MAX_HEAT_MOMENT}], got {m}")
    if not tmax > 0:
        raise DomainError(f"tmax must be positive, got {tmax}")
    f = op.check(f)
    weight = op.weight * np.power(op.lam, m + 1) * f * f
    if not np.any(weight):
        return 0.0

    def integrand(t):
        return (1.0 + t) ** m * fsum_weighted(weight, np.exp(-2.0 * op.lam * t))

    return adaptive_simpson(integrand, 0.0, float(tmax), rtol=tol)


def lq_norm(f, cellweights, q):
    """Discrete ``L^q`` norm; ``q = inf`` is the max-norm."""
    f = np.asarray(f, dtype=float)
    w = np.asarray(cellweights, dtype=float)
    if f.shape != w.shape:
        raise ShapeError(f"function {f.shape} and weights {w.shape} differ")
    if not q >= 1:
        raise DomainError(f"q must be >= 1, got {q}")
    if math.isinf(q):
        return float(np.max(np.abs(f))) if f.size else 0.0
    return fsum_weighted(w, np.abs(f) ** q) ** (1.0 / q)


def _log_weight(grid, r_in):
    if not r_in > 0:
        raise DomainError(f"r_in must be positive, got {r_in}")
    if np.any(grid.nodes < r_in):
        raise DomainError(f"grid has nodes below r_in = {r_in}")
    return 1.0 + np.log(grid.nodes / r_in)


def weighted_l1_log(f, grid, r_in):
    """``|| (1 + log(|x|/r_in)) f ||_{L^1}`` on a radial grid."""
    f = grid.check(f)
    return fsum_weighted(grid.cellweights * _log_weight(grid, r_in), np.abs(f))


def local_energy(domain, u, uprime, radius):
    """Energy density summed over the nodes with ``|x| <= radius``."""
    grid = domain.grid
    u = grid.check(u, "u")
    uprime = grid.check(uprime, "u'")
    lo, hi = grid.extent()
    if not lo <= radius <= hi:
        raise DomainError(f"radius {radius} outside the grid extent [{lo}, {hi}]")
    grad = grid.gradient(u)
    inside = grid.nodes <= radius
    density = uprime * uprime + grad * grad
    return fsum_weighted(grid.cellweights[inside], density[inside])


def nash_ratio(f, grid, variant="nash", r_in=None):
    """Left side over right side of a Nash-type inequality, without its constant.

    ``nash``     ``||f||_2^(2+4/N) / (||f||_1^(4/N) ||grad f||_2^2)``
    ``gn``       ``||f||_p^p / (||f||_1^((N^2+4)/(N(N+2))) ||grad f||_2^(4/(N+2)))``, ``p = 1+2/N``
    ``lognash``  ``||H^(1/2) f||_2^2 / (||H f||_1 ||grad f||_2)``, ``H = 1 + log(r/r_in)``

    The inequality holds with constant C exactly when the ratio is at most C.
    """
    f = grid.check(f)
    if not np.any(f):
        raise DegenerateInputError("Nash ratios are undefined for the zero function")
    w = grid.cellweights
    dim = grid.dim
    grad_sq = fsum_weighted(w, grid.gradient(f) ** 2)
    if grad_sq == 0.0:
        raise DegenerateInputError("gradient vanishes identically")
    if variant == "nash":
        l1 = lq_norm(f, w, 1)
        l2 = lq_norm(f, w, 2)
        return l2 ** (2 + 4 / dim) / (l1 ** (4 / dim) * grad_sq)
    if variant == "gn":
        p = 1 + 2 / dim
        lp_p = fsum_weighted(w, np.abs(f) ** p)
        l1 = lq_norm(f, w, 1)
        return lp_p / (l1 ** ((dim**2 + 4) / (dim * (dim + 2))) * grad_sq ** (2 / (dim + 2)))
    if variant == "lognash":
        if r_in is None:
            raise DomainError("the log-Nash ratio needs r_in")
        weight = _log_weight(grid, r_in)
        lhs = fsum_weighted(w * weight, f * f)
        l1_mu = fsum_weighted(w * weight, np.abs(f))
        return lhs / (l1_mu * math.sqrt(grad_sq))
    raise DomainError(f"unknown Nash variant {variant!r}")
