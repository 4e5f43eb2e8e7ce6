"""Adaptive Simpson quadrature with a deterministic summation order."""

from __future__ import annotations

import math

from .errors import ConvergenceError

MAX_INTERVALS = 2**16


def adaptive_simpson(f, a, b, rtol=1e-10, atol=0.0, initial_panels=16, max_intervals=MAX_INTERVALS):
    """Integrate a smooth scalar function over ``[a, b]``.

    The target error is ``max(atol, rtol * |I|)`` with ``|I|`` estimated from
    a uniform Simpson pass. Accepted panels are summed with :func:`math.fsum`
    in left-to-right order, so the result does not depend on traversal.
    """
    if not b > a:
        if b == a:
            return 0.0
        raise ValueError(f"need a < b, got ({a}, {b})")
    edges = [a + (b - a) * i / initial_panels for i in range(initial_panels + 1)]
    panels = []
    coarse = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        panels.append((lo, hi, flo, fmid, fhi, whole))
        coarse.append(whole)
    scale = abs(math.fsum(coarse))
    target = max(atol, rtol * scale)
    if target == 0.0:
        return 0.0

    accepted = []  # (lo, value)
    stack = list(reversed(panels))
    count = len(panels)
    while stack:
        lo, hi, flo, fmid, fhi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        lmid, rmid = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lmid), f(rmid)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        local = target * (hi - lo) / (b - a)
        if abs(delta) <= 15.0 * local or hi - lo < 1e-13 * (b - a):
            accepted.append((lo, left + right + delta / 15.0))
            continue
        count += 1
        if count > max_intervals:
            raise ConvergenceError(f"adaptive Simpson exceeded {max_intervals} subintervals on [{a}, {b}]")
        stack.append((mid, hi, fmid, frm, fhi, right))
        stack.append((lo, mid, flo, flm, fmid, left))
    accepted.sort(key=lambda item: item[0])
    return math.fsum(v for _, v in accepted)
