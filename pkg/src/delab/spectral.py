"""Spectral representation of a nonnegative selfadjoint operator.

An operator is stored as eigenvalue/weight pairs; every vector lives in its
eigenbasis, so the damped equation ``u'' + A u + u' = 0`` and the heat
semigroup ``exp(-tA)`` act mode by mode.

Per-mode solutions of ``w'' + lam*w + w' = 0`` are written as

    w(t) = a * c(t) + (b + a/2) * s(t)
    w'(t) = b * c(t) - (lam*a + b/2) * s(t)

with ``c = exp(-t/2) cosh(t*sqrt(z))`` and ``s = exp(-t/2) sinh(t*sqrt(z))/sqrt(z)``,
``z = 1/4 - lam``.  Both are entire in ``z``, which keeps the formulas
continuous through the critical eigenvalue ``lam = 1/4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, OrderError, ShapeError

#: half-width of the band ``|1 - 4 lam| < CRITICAL_BAND`` evaluated by power series
CRITICAL_BAND = 1e-6
#: highest time derivative supported by :func:`evolve_derivative`
MAX_DERIVATIVE_ORDER = 12
# exp(-t/2) * cosh(t * 5e-4) underflows past this time inside the critical band
_SERIES_T_CUTOFF = 1500.0


def fsum_weighted(weight, values):
    """Deterministic compensated sum of ``weight * values``."""
    return math.fsum(np.asarray(weight * values, dtype=float).ravel().tolist())


@dataclass(frozen=True)
class EigenMode:
    lam: float
    weight: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError(f"eigenvalue must be nonnegative, got {self.lam}")
        if not self.weight > 0:
            raise DomainError(f"mode weight must be positive, got {self.weight}")


class ModeState(NamedTuple):
    value: float
    derivative: float


class ModalOperator:
    """Nonnegative selfadjoint operator given by its spectral data.

    Parameters
    ----------
    lam : array_like
        Eigenvalues, nonnegative and sorted nondecreasing.
    weight : array_like
        Positive Parseval weights; ``||f||^2 = sum(weight * f**2)``.
    label : str
        Free-form description used in reports.
    """

    def __init__(self, lam, weight, label=""):
        lam = np.array(lam, dtype=float).ravel()
        weight = np.array(weight, dtype=float).ravel()
        if lam.size == 0:
            raise ShapeError("a modal operator needs at least one mode")
        if lam.shape != weight.shape:
            raise ShapeError(f"{lam.size} eigenvalues but {weight.size} weights")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise DomainError("eigenvalues must be finite and nonnegative")
        if np.any(np.diff(lam) < 0):
            raise DomainError("eigenvalues must be sorted nondecreasing")
        if not np.all(np.isfinite(weight)) or np.any(weight <= 0):
            raise DomainError("mode weights must be finite and positive")
        lam.flags.writeable = False
        weight.flags.writeable = False
        self.lam = lam
        self.weight = weight
        self.label = label

    @classmethod
    def from_modes(cls, modes, label=""):
        return cls([m.lam for m in modes], [m.weight for m in modes], label)

    @property
    def modes(self):
        return [EigenMode(float(l), float(w)) for l, w in zip(self.lam, self.weight)]

    @property
    def size(self):
        return self.lam.size

    def __len__(self):
        return self.lam.size

    def __repr__(self):
        return f"ModalOperator(size={self.size}, label={self.label!r})"

    def check(self, f, name="vector"):
        """Return ``f`` as a float array, raising :class:`ShapeError` on mismatch."""
        f = np.asarray(f, dtype=float)
        if f.shape != self.lam.shape:
            raise ShapeError(f"{name} has shape {f.shape}, operator has {self.size} modes")
        return f

    def norm_sq(self, f):
        f = self.check(f)
        return fsum_weighted(self.weight, f * f)

    def norm(self, f):
        return math.sqrt(self.norm_sq(f))

    def inner(self, f, g):
        return fsum_weighted(self.weight, self.check(f) * self.check(g))


@dataclass(frozen=True)
class CauchyPair:
    """Initial data ``(u0, u1)`` as modal coefficient arrays."""

    u0: np.ndarray
    u1: np.ndarray

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        u1 = np.asarray(self.u1, dtype=float)
        if u0.shape != u1.shape or u0.ndim != 1:
            raise ShapeError(f"u0 {u0.shape} and u1 {u1.shape} must be equal-length vectors")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "u1", u1)

    @property
    def v00(self):
        return self.u0 + self.u1

    def matches(self, op):
        op.check(self.u0, "u0")
        op.check(self.u1, "u1")
        return self

    def scaled(self, factor):
        return CauchyPair(factor * self.u0, factor * self.u1)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DomainError("time must be finite and nonnegative")
    return t


def _series_propagators(z, t):
    # c = sum z^m t^2m/(2m)!, psi = sum z^m t^(2m+1)/(2m+1)!, both times exp(-t/2)
    tt = np.minimum(t, _SERIES_T_CUTOFF)
    x = z * tt * tt
    term_c = np.ones_like(x)
    term_s = np.array(tt, dtype=float)
    c = term_c.copy()
    s = term_s.copy()
    for m in range(1, 400):
        term_c = term_c * x / ((2 * m - 1) * (2 * m))
        term_s = term_s * x / ((2 * m) * (2 * m + 1))
        c += term_c
        s += term_s
        if np.all(np.abs(term_c) <= 1e-18 * np.abs(c)) and np.all(
            np.abs(term_s) <= 1e-18 * np.abs(s)
        ):
            break
    damp = np.where(t > _SERIES_T_CUTOFF, 0.0, np.exp(-0.5 * tt))
    return damp * c, damp * s


def propagators(lam, t):
    """Return ``(c, s)`` such that ``w = a*c + (b + a/2)*s`` solves the mode ODE.

    ``lam`` and ``t`` broadcast against each other.
    """
    lam, t = np.broadcast_arrays(np.asarray(lam, dtype=float), _check_time(t))
    if np.any(lam < 0):
        raise DomainError("eigenvalues must be nonnegative")
    c = np.empty(lam.shape)
    s = np.empty(lam.shape)

    crit = np.abs(1.0 - 4.0 * lam) < CRITICAL_BAND
    over = (lam < 0.25) & ~crit
    under = (lam > 0.25) & ~crit

    if np.any(crit):
        c[crit], s[crit] = _series_propagators(0.25 - lam[crit], t[crit])

    if np.any(over):
        lo, to = lam[over], t[over]
        root = np.sqrt(0.25 - lo)
        r_plus = -2.0 * lo / (1.0 + 2.0 * root)  # cancellation-free (-1 + sqrt(1-4lam))/2
        r_minus = -0.5 - root
        e_plus = np.exp(r_plus * to)
        e_minus = np.exp(r_minus * to)
        c[over] = 0.5 * (e_plus + e_minus)
        arg = 2.0 * root * to
        with np.errstate(over="ignore", invalid="ignore"):
            small = e_minus * np.expm1(np.minimum(arg, 1.0)) / (2.0 * root)
        large = (e_plus - e_minus) / (2.0 * root)
        s[over] = np.where(arg > 1.0, large, small)

    if np.any(under):
        lu, tu = lam[under], t[under]
        omega = np.sqrt(lu - 0.25)
        damp = np.exp(-0.5 * tu)
        c[under] = damp * np.cos(omega * tu)
        s[under] = damp * np.sin(omega * tu) / omega

    return c, s


def solve_modes(lam, a, b, t):
    """Vectorised ``(w, w')`` for ``w'' + lam*w + w' = 0``, ``w(0)=a``, ``w'(0)=b``."""
    c, s = propagators(lam, t)
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    value = a * c + (b + 0.5 * a) * s
    deriv = b * c - (lam * a + 0.5 * b) * s
    return value, deriv


def mode_solve(lam, a, b, t):
    """Exact solution of one mode at time ``t``.

    >>> mode_solve(0.0, 1.0, 1.0, 0.0)
    ModeState(value=1.0, derivative=1.0)
    """
    if not lam >= 0:
        raise DomainError(f"eigenvalue must be nonnegative, got {lam}")
    if not t >= 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    value, deriv = solve_modes(lam, a, b, t)
    return ModeState(float(value), float(deriv))


def generator_step(lam, f, g):
    """One application of ``(f, g) -> (g, -lam*f - g)`` per mode."""
    return g, -lam * f - g


def evolve(op, data, t):
    """Weak solution ``(u(t), u'(t))`` of the damped equation in modal coordinates."""
    data.matches(op)
    return solve_modes(op.lam, data.u0, data.u1, t)


def evolve_derivative(op, data, t, k):
    """``(u^(k)(t), u^(k+1)(t))``.

    The k-th derivative solves the same equation with initial data obtained by
    applying the first-order generator k times to ``(u0, u1)``.
    """
    if not 0 <= k <= MAX_DERIVATIVE_ORDER or int(k) != k:
        raise OrderError(f"derivative order must be an integer in [0, {MAX_DERIVATIVE_ORDER}], got {k}")
    data.matches(op)
    f, g = data.u0, data.u1
    for _ in range(int(k)):
        f, g = generator_step(op.lam, f, g)
    return solve_modes(op.lam, f, g, t)


def heat_mode(lam, t):
    if not lam >= 0:
        raise DomainError(f"eigenvalue must be nonnegative, got {lam}")
    if not t >= 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    return math.exp(-lam * t)


def heat_apply(op, f, t):
    """``exp(-tA) f``."""
    f = op.check(f)
    _check_time(t)
    return np.exp(-op.lam * t) * f


def apply_power(op, f, s):
    """``A^s f``; the zero eigenvalue contributes ``0**0 == 1`` at ``s = 0``."""
    if not s >= 0:
        raise DomainError(f"power must be nonnegative, got {s}")
    f = op.check(f)
    if s == 0:
        return f.copy()
    return np.power(op.lam, s) * f
