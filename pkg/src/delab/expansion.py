"""Asymptotic profiles of the damped equation and the regularising split.

All profiles are polynomials in ``s = t*lam`` times ``exp(-s)`` per mode.
Their combinatorial coefficients are exact: binomials are Python integers and
the ``1/j!`` factors are carried as :class:`fractions.Fraction` until the
final conversion to float.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import spectral
from .errors import DomainError, OrderError
from .oracles import rk4_adaptive
from .spectral import CauchyPair, evolve

MAX_PROFILE_ORDER = 30
MAX_SPLIT_ORDER = 16

_binomial_impl = math.comb


def binomial(n, k):
    if k < 0 or k > n or n < 0:
        return 0
    return _binomial_impl(n, k)


@contextlib.contextmanager
def corrupted_binomials(offset=1):
    """Fault-injection hook: every binomial is shifted by ``offset``."""
    global _binomial_impl
    saved = _binomial_impl
    _binomial_impl = lambda n, k: math.comb(n, k) + offset  # noqa: E731
    _vlk_coefficients.cache_clear()
    try:
        yield
    finally:
        _binomial_impl = saved
        _vlk_coefficients.cache_clear()


def horner(coeffs, s):
    """Evaluate ``sum(coeffs[j] * s**j)``; coefficients in ascending order."""
    acc = np.zeros_like(np.asarray(s, dtype=float))
    for c in reversed(coeffs):
        acc = acc * s + c
    return acc


def _poly_derivative(coeffs):
    return tuple(j * c for j, c in enumerate(coeffs))[1:]


@dataclass(frozen=True)
class ProfilePolynomials:
    """``P`` and ``Q`` of the order-``ell`` profile, ascending powers of ``s``.

    ``exact_P``/``exact_Q`` keep the rational coefficients.
    """

    order: int
    exact_P: tuple
    exact_Q: tuple

    @property
    def P(self):
        return tuple(float(c) for c in self.exact_P)

    @property
    def Q(self):
        return tuple(float(c) for c in self.exact_Q)


@lru_cache(maxsize=None)
def _vlk_coefficients(ell, k):
    sign = -1 if (ell + k) % 2 else 1
    p = tuple(
        Fraction(sign * binomial(ell + k, j + k) * (-1) ** j, math.factorial(j))
        for j in range(ell + 1)
    )
    q = tuple(
        Fraction(sign * binomial(ell + k - 1, j + k) * (-1) ** j, math.factorial(j))
        for j in range(ell)
    )
    return p, q


def _check_order(ell, k=0):
    if int(ell) != ell or int(k) != k or ell < 0 or k < 0:
        raise OrderError(f"orders must be nonnegative integers, got ell={ell}, k={k}")
    if ell + k > MAX_PROFILE_ORDER:
        raise OrderError(f"ell + k = {ell + k} exceeds the cap {MAX_PROFILE_ORDER}")


def profile_poly(ell):
    """Polynomials with ``v_ell = lam^ell exp(-s) (P(s) v00 - Q(s) u0)``."""
    _check_order(ell)
    p, q = _vlk_coefficients(ell, ell)
    return ProfilePolynomials(ell, p, q)


def _float_coeffs(ell, k):
    p, q = _vlk_coefficients(ell, k)
    return tuple(float(c) for c in p), tuple(float(c) for c in q)


def profile_vlk(ell, k, op, data, t):
    """Auxiliary family ``v_{ell,k}``; satisfies ``d^k/dt^k v_{ell,0} = A^k v_{ell,k}``."""
    _check_order(ell, k)
    data.matches(op)
    return _vlk_values(ell, k, op, data, t)


def _vlk_values(ell, k, op, data, t):
    p, q = _float_coeffs(ell, k)
    s = op.lam * t
    return np.exp(-s) * (horner(p, s) * data.v00 - horner(q, s) * data.u0)


def profile_v(ell, op, data, t):
    """Asymptotic profile ``v_ell(t)``."""
    _check_order(ell)
    data.matches(op)
    if ell == 0:
        return spectral.heat_apply(op, data.v00, t)
    return np.power(op.lam, ell) * _vlk_values(ell, ell, op, data, t)


def _profile_v_dt(ell, op, data, t):
    p, q = _float_coeffs(ell, ell)
    dp = _poly_derivative(p)
    dq = _poly_derivative(q)
    s = op.lam * t
    bracket = (horner(dp, s) - horner(p, s)) * data.v00 - (horner(dq, s) - horner(q, s)) * data.u0
    return np.power(op.lam, ell + 1) * np.exp(-s) * bracket


def partial_sum_V(n, op, data, t):
    """``V_n = v_0 + ... + v_{n-1}``, with ``V_0 = 0``."""
    _check_order(n)
    data.matches(op)
    total = np.zeros(op.size)
    for ell in range(n):
        total = total + profile_v(ell, op, data, t)
    return total


def partial_sum_V_dt(n, op, data, t):
    """``(V_n(t), V_n'(t))`` with analytic time derivatives."""
    _check_order(n)
    data.matches(op)
    total = np.zeros(op.size)
    total_dt = np.zeros(op.size)
    for ell in range(n):
        total = total + profile_v(ell, op, data, t)
        total_dt = total_dt + _profile_v_dt(ell, op, data, t)
    return total, total_dt


def remainder(n, op, data, t):
    """``(u - V_n, u' - V_n')`` at time ``t``."""
    u, du = evolve(op, data, t)
    v, dv = partial_sum_V_dt(n, op, data, t)
    return u - v, du - dv


def in_jn(n, lam):
    """Symbols of the operators ``I_n``, ``J_n`` with ``I_n + lam^n J_n = 1``.

    Written as ``sum C(2n-1, k) p^k q^(2n-1-k)`` with ``p = lam/(1+lam)``,
    ``q = 1/(1+lam)`` so that large ``lam`` never overflows.
    """
    if int(n) != n or not 1 <= n <= MAX_SPLIT_ORDER:
        raise OrderError(f"split order must be an integer in [1, {MAX_SPLIT_ORDER}], got {n}")
    lam = np.asarray(lam, dtype=float)
    p = lam / (1.0 + lam)
    q = 1.0 / (1.0 + lam)
    deg = 2 * n - 1
    i_n = np.zeros_like(lam)
    j_n = np.zeros_like(lam)
    for k in range(n):
        term = q ** (deg - k) * p**k
        i_n = i_n + binomial(deg, k) * term
        j_n = j_n + binomial(deg, n + k) * term
    if i_n.ndim == 0:
        return float(i_n), float(j_n)
    return i_n, j_n


@dataclass(frozen=True)
class RegularizedPair:
    star: CauchyPair
    starstar: CauchyPair
    n: int

    def recompose(self, op):
        lam_n = np.power(op.lam, self.n)
        return CauchyPair(
            self.star.u0 + lam_n * self.starstar.u0,
            self.star.u1 + lam_n * self.starstar.u1,
        )


def regularize(n, op, data):
    """Split the data as ``I_n data + A^n J_n data``."""
    data.matches(op)
    i_n, j_n = in_jn(n, op.lam)
    return RegularizedPair(
        CauchyPair(i_n * data.u0, i_n * data.u1),
        CauchyPair(j_n * data.u0, j_n * data.u1),
        n,
    )


def _scalar_vlk(ell, k, lam, a, b, t):
    p, q = _float_coeffs(ell, k)
    s = lam * t
    hp = 0.0
    for c in reversed(p):
        hp = hp * s + c
    hq = 0.0
    for c in reversed(q):
        hq = hq * s + c
    return math.exp(-s) * (hp * (a + b) - hq * a)


def err_equation_oracle(n, lam, a, b, t, tol=1e-10):
    """``d^n/dt^n U_n(t)`` for one mode, by direct numerical integration.

    ``U_n`` solves ``U'' + lam U + U' = -d/dt v_{n-1,0}`` with ``U(0) = 0`` and
    ``U'(0) = (-1)^n b``. The forcing is evaluated analytically; derivatives
    beyond the first are recovered by differentiating the equation. ``t`` may
    be a scalar or an array.
    """
    if int(n) != n or n < 1:
        raise OrderError(f"oracle order must be a positive integer, got {n}")
    _check_order(n - 1, n + 1)
    if tol < 1e-12:
        raise DomainError(f"oracle tolerance must be >= 1e-12, got {tol}")

    def forcing(k, s):
        # k-th derivative of d/dt v_{n-1,0} = lam^(k+1) v_{n-1,k+1}
        return lam ** (k + 1) * _scalar_vlk(n - 1, k + 1, lam, a, b, s)

    def rhs(s, y):
        return [y[1], -lam * y[0] - y[1] - forcing(0, s)]

    times = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(times, kind="stable")
    states = rk4_adaptive(rhs, [0.0, (-1) ** n * b], times[order], rtol=tol)
    result = np.empty(times.shape)
    for idx, (ts, (u, du)) in zip(order, zip(times[order], states)):
        derivs = [u, du]
        for k in range(n - 1):
            derivs.append(-lam * derivs[k] - derivs[k + 1] - forcing(k, ts))
        result[idx] = derivs[n]
    if np.ndim(t) == 0:
        return float(result[0])
    return result
