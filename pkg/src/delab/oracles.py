"""Reference integrators that never touch the closed-form mode solutions.

They exist to cross-check :mod:`delab.spectral` and :mod:`delab.expansion`
and deliberately share no code with them.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DomainError


def rk4_mode(lam, a, b, t, h=1e-4):
    """Classical RK4 for ``w'' + lam*w + w' = 0`` from ``(a, b)`` to time ``t``.

    The equation is linear, so N steps of RK4 equal the N-th power of the
    one-step amplification matrix; it is formed by repeated squaring. The step
    is shrunk to ``0.002/sqrt(lam)`` for stiff modes so that the RK4 phase
    error stays below 1e-9 over ``t <= 20``.
    """
    if lam < 0 or t < 0:
        raise DomainError("rk4_mode needs lam >= 0 and t >= 0")
    if t == 0:
        return float(a), float(b)
    h = min(h, 0.002 / math.sqrt(lam)) if lam > 0 else h
    steps = max(1, math.ceil(t / h))
    h = t / steps
    m = np.array([[0.0, 1.0], [-lam, -1.0]]) * h
    m2 = m @ m
    m3 = m2 @ m
    amp = np.eye(2) + m + m2 / 2.0 + m3 / 6.0 + (m3 @ m) / 24.0
    y = np.linalg.matrix_power(amp, steps) @ np.array([a, b], dtype=float)
    return float(y[0]), float(y[1])


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, [y[i] + h / 2 * k1[i] for i in range(len(y))])
    k3 = rhs(t + h / 2, [y[i] + h / 2 * k2[i] for i in range(len(y))])
    k4 = rhs(t + h, [y[i] + h * k3[i] for i in range(len(y))])
    return [y[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(len(y))]


def rk4_adaptive(rhs, y0, t_out, rtol=1e-10, atol=1e-14, h0=1e-3, max_steps=2_000_000):
    """Step-doubling RK4 returning the state at each of the sorted times ``t_out``.

    ``rhs(t, y)`` takes and returns plain lists. Each accepted step is the
    Richardson-extrapolated pair of half steps.
    """
    t_out = [float(x) for x in t_out]
    if any(x < 0 for x in t_out) or t_out != sorted(t_out):
        raise DomainError("output times must be nonnegative and sorted")
    y = [float(v) for v in y0]
    t = 0.0
    h = h0
    out = []
    steps = 0
    for target in t_out:
        while t < target:
            if steps > max_steps:
                raise ConvergenceError(f"rk4_adaptive exceeded {max_steps} steps before t={target}")
            step = min(h, target - t)
            full = _rk4_step(rhs, t, y, step)
            half = _rk4_step(rhs, t, y, step / 2)
            half = _rk4_step(rhs, t + step / 2, half, step / 2)
            err = max(
                abs(half[i] - full[i]) / 15.0 / (atol + rtol * max(abs(half[i]), abs(y[i])))
                for i in range(len(y))
            )
            steps += 1
            if err <= 1.0:
                t = t + step if step < target - t else target
                y = [half[i] + (half[i] - full[i]) / 15.0 for i in range(len(y))]
                h = step * min(4.0, 0.9 * max(err, 1e-10) ** -0.2)
            else:
                h = step * max(0.1, 0.9 * err**-0.2)
                if h < 1e-14:
                    raise ConvergenceError(f"rk4_adaptive step underflow at t={t}")
        out.append(list(y))
    return out
