"""Sampling schedules, power-law fits and windowed plateau checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, FitError

#: samples at or below this magnitude are treated as underflow and dropped
UNDERFLOW = 1e-300
#: fraction of the earliest samples ignored by default when fitting
DEFAULT_DISCARD = 0.2
MIN_FIT_SAMPLES = 4


class RateSample(NamedTuple):
    t: float
    value: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    rms_residual: float
    window: tuple
    n_samples: int
    dropped: int = 0


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    expected_slope: float
    tol: float
    fit: RateFit
    gap: float = field(default=0.0)


def sample_schedule(t0, t1, count):
    """``count`` log-spaced times from ``t0`` to ``t1`` inclusive."""
    if int(count) != count or count < MIN_FIT_SAMPLES:
        raise DomainError(f"a schedule needs at least {MIN_FIT_SAMPLES} times, got {count}")
    if not 0 < t0 < t1:
        raise DomainError(f"need 0 < t0 < t1, got ({t0}, {t1})")
    times = np.geomspace(t0, t1, int(count))
    times[0], times[-1] = t0, t1
    return times


def _arrays(samples):
    samples = list(samples)
    if not samples:
        return np.empty(0), np.empty(0)
    t = np.array([s[0] for s in samples], dtype=float)
    v = np.array([s[1] for s in samples], dtype=float)
    return t, v


def clean(samples):
    """Split samples into usable ``(t, value)`` arrays and a count of dropped ones."""
    t, v = _arrays(samples)
    if np.any(t <= 0):
        raise DomainError("sample times must be positive")
    keep = np.isfinite(v) & (v > UNDERFLOW)
    return t[keep], v[keep], int(np.count_nonzero(~keep))


def fit_loglog(samples, discard=DEFAULT_DISCARD):
    """Least-squares line through ``(log t, log value)``.

    The earliest ``discard`` fraction of the usable samples is ignored.
    """
    t, v, dropped = clean(samples)
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    skip = int(math.floor(discard * t.size))
    t, v = t[skip:], v[skip:]
    if t.size < MIN_FIT_SAMPLES:
        raise FitError(f"need at least {MIN_FIT_SAMPLES} positive samples in the window, got {t.size}")
    x, y = np.log(t), np.log(v)
    if np.ptp(x) == 0:
        raise FitError("all samples share one time")
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    rms = math.sqrt(float(np.mean(resid**2)))
    return RateFit(float(slope), float(intercept), rms, (float(t[0]), float(t[-1])), int(t.size), dropped)


def log_corrected_fit(samples, p, sigma):
    """``(min, max)`` of ``value * t^p * (log t)^sigma`` over the samples."""
    t, v, _ = clean(samples)
    if t.size == 0:
        raise FitError("no usable samples")
    if np.any(t < 2):
        raise DomainError("log-corrected fits need t >= 2")
    comp = v * t**p * np.log(t) ** sigma
    return float(comp.min()), float(comp.max())


def plateau_check(samples, window_fraction=1.0):
    """``(lo, hi, hi/lo)`` of a compensated series over its trailing window.

    Stands in for a limsup statement: a bounded ratio with ``lo > 0`` over
    the last ``window_fraction`` of the samples.
    """
    if not 0 < window_fraction <= 1:
        raise DomainError(f"window fraction must lie in (0, 1], got {window_fraction}")
    t, v = _arrays(samples)
    order = np.argsort(t, kind="stable")
    v = v[order]
    keep = int(math.ceil(window_fraction * v.size))
    window = v[v.size - keep :]
    if window.size == 0:
        raise FitError("empty plateau window")
    lo, hi = float(window.min()), float(window.max())
    ratio = hi / lo if lo > 0 else math.inf
    return lo, hi, ratio


def check_decay(samples, expected_slope, tol, discard=DEFAULT_DISCARD):
    fit = fit_loglog(samples, discard)
    gap = abs(fit.slope - expected_slope)
    return BoundCheck(gap <= tol, expected_slope, tol, fit, gap)
