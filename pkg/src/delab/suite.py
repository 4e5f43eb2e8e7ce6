"""Invariant and acceptance checks behind ``delab verify``.

Every check returns a :class:`CheckResult` carrying the module and
operation it exercises plus the measured quantities, so a failure report
names exactly what broke. Tolerances are keyword arguments with the
acceptance values as defaults.
"""

from __future__ import annotations

import contextlib
import math
from fractions import Fraction
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import j0, y0

from . import __version__
from .domains import Grid1D, build_interval, build_radial_exterior, radial_grid
from .errors import DelabError
from .expansion import corrupted_binomials, err_equation_oracle, in_jn, profile_poly, remainder
from .experiment import run
from .functionals import dissipation_integral, energy, nash_ratio, sharp_norm_sq
from .oracles import rk4_mode
from .spectral import CauchyPair, ModalOperator, evolve, mode_solve


@dataclass
class CheckResult:
    name: str
    module: str
    op: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: str | None = None


_REGISTRY = []


def check(name, module, op, level="fast"):
    def register(fn):
        _REGISTRY.append((name, module, op, level, fn))
        return fn

    return register


def _random_pair(size, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.standard_normal(size), rng.standard_normal(size)


# --- spectral core -------------------------------------------------------


@check("partition_of_unity", "expansion", "in_jn")
def partition_of_unity(tol=1e-12, orders=range(1, 9), points=60):
    lam = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, points)])
    worst = 0.0
    for n in orders:
        i_n, j_n = in_jn(n, lam)
        worst = max(worst, float(np.max(np.abs(i_n + lam**n * j_n - 1.0))))
    return worst <= tol, {"max_abs_error": worst, "tol": tol}


@check("mode_solver_vs_rk4", "spectral-core", "mode_solve")
def mode_solver_vs_rk4(tol=1e-8, lams=(0.0, 0.1, 0.249999, 0.25, 1.0, 100.0), count=200, tmax=20.0):
    """Error relative to the sup of the reference trajectory, for three data pairs."""
    times = np.linspace(0.0, tmax, count)
    worst = 0.0
    for lam in lams:
        for a, b in ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0)):
            ref = np.array([rk4_mode(lam, a, b, t)[0] for t in times])
            got = np.array([mode_solve(lam, a, b, t).value for t in times])
            scale = float(np.max(np.abs(ref)))
            worst = max(worst, float(np.max(np.abs(got - ref))) / scale)
    return worst <= tol, {"max_rel_error": worst, "tol": tol}


@check("energy_identity", "functionals", "dissipation_integral")
def energy_identity(tol=1e-6, times=(1.0, 5.0, 20.0), modes=64, seed=11, quad_tol=1e-8):
    dom = build_interval(10.0, modes)
    op = dom.operator
    u0, u1 = _random_pair(modes, seed)
    scale = 1.0 / np.sqrt(1.0 + op.lam)
    data = CauchyPair(u0 * scale, u1 * scale)
    e0 = energy(op, data.u0, data.u1)
    worst = 0.0
    for t in times:
        u, du = evolve(op, data, t)
        gap = abs(energy(op, u, du) + dissipation_integral(op, data, t, tol=quad_tol) - e0)
        worst = max(worst, gap / e0)
    return worst <= tol, {"max_rel_gap": worst, "tol": tol}


def _sharp_rate_error(op, data, t, h):
    def sharp(s):
        u, du = evolve(op, data, s)
        return sharp_norm_sq(op, u, du)

    u, du = evolve(op, data, t)
    return abs((sharp(t + h) - sharp(t - h)) / (2 * h) + energy(op, u, du))


@check("sharp_norm_identity", "functionals", "sharp_norm_sq")
def sharp_norm_identity(lo=3.5, hi=4.5, t=1.0, seed=5):
    op = ModalOperator(np.geomspace(0.05, 20.0, 16), np.ones(16))
    u0, u1 = _random_pair(16, seed)
    data = CauchyPair(u0, u1)
    e1 = _sharp_rate_error(op, data, t, 1e-3)
    e2 = _sharp_rate_error(op, data, t, 5e-4)
    ratio = e1 / e2
    return lo <= ratio <= hi, {"error_h": e1, "error_h_half": e2, "ratio": ratio}


@check("decomposition_identity", "expansion", "remainder")
def decomposition_identity(tol=1e-6, orders=(1, 2), lams=(0.01, 0.25, 2.0), count=21, a=1.0, b=0.7):
    times = np.linspace(0.0, 10.0, count)
    op = ModalOperator(np.array(lams), np.ones(len(lams)))
    data = CauchyPair(np.full(len(lams), a), np.full(len(lams), b))
    worst = 0.0
    for n in orders:
        got = np.array([remainder(n, op, data, t)[0] for t in times])
        for j, lam in enumerate(lams):
            ref = err_equation_oracle(n, lam, a, b, times)
            worst = max(worst, float(np.max(np.abs(got[:, j] - ref))))
    return worst <= tol, {"max_abs_error": worst, "tol": tol}


@check("profile_polynomials", "expansion", "profile_poly")
def profile_polynomials():
    """Low-order profile polynomials against hand-expanded values."""
    expected = {0: ([1], []), 1: ([2, -1], [1]), 2: ([6, -4, Fraction(1, 2)], [3, -1])}
    got = {}
    ok = True
    for ell, (p, q) in expected.items():
        poly = profile_poly(ell)
        got[ell] = ([str(c) for c in poly.exact_P], [str(c) for c in poly.exact_Q])
        ok &= list(poly.exact_P) == p and list(poly.exact_Q) == q
    return ok, {"coefficients": got}


# --- domains -------------------------------------------------------------


def bessel_shell_root(r_in, r_out):
    """First zero of ``J0(k r_in) Y0(k r_out) - J0(k r_out) Y0(k r_in)``."""

    def cross(k):
        return j0(k * r_in) * y0(k * r_out) - j0(k * r_out) * y0(k * r_in)

    step = 0.05 * math.pi / (r_out - r_in)
    k = step
    while cross(k) * cross(k + step) > 0:
        k += step
    return brentq(cross, k, k + step, xtol=1e-14)


@check("eigensolver_validation", "domains", "build_radial_exterior")
def eigensolver_validation(tol3=5e-3, tol2=1e-2, m=2000, r_in=1.0, r_out=10.0):
    shell3 = build_radial_exterior(3, r_in, r_out, m)
    k = np.arange(1, 6)
    exact = (k * math.pi / (r_out - r_in)) ** 2
    err3 = float(np.max(np.abs(shell3.operator.lam[:5] / exact - 1.0)))
    shell2 = build_radial_exterior(2, r_in, r_out, m)
    root = bessel_shell_root(r_in, r_out)
    err2 = abs(shell2.operator.lam[0] / root**2 - 1.0)
    ok = err3 <= tol3 and err2 <= tol2
    return ok, {"max_rel_error_3d": err3, "rel_error_2d": err2}


# --- Nash ratios ---------------------------------------------------------


def _nash_grids(dim, m):
    if dim == 1:
        return build_interval(40.0, m).grid, None
    return radial_grid(dim, 1.0, 40.0, m), 1.0


def _families(x, center):
    gauss = np.exp(-((x - center) ** 2) / 2.0)
    y = (x - center) / 3.0
    bump = np.where(np.abs(y) < 1, np.exp(1 - 1 / np.maximum(1 - y * y, 1e-300)), 0.0)
    return {"gaussian": gauss, "bump": bump}


@check("nash_ratios", "functionals", "nash_ratio")
def nash_ratios(scale_tol=1e-12, refine_tol=0.02, m=800):
    worst_scale = 0.0
    worst_refine = 0.0
    for dim in (1, 2, 3):
        variants = ["nash", "gn"] + (["lognash"] if dim > 1 else [])
        coarse, r_in = _nash_grids(dim, m)
        fine, _ = _nash_grids(dim, 2 * m)
        center = 20.0 if dim == 1 else 6.0
        fc = _families(coarse.nodes, center)
        ff = _families(fine.nodes, center)
        for name in fc:
            for variant in variants:
                base = nash_ratio(fc[name], coarse, variant, r_in)
                scaled = nash_ratio(7.3 * fc[name], coarse, variant, r_in)
                worst_scale = max(worst_scale, abs(scaled / base - 1.0))
                if variant != "lognash":
                    # dilation: grid and profile stretched together
                    s = 2.5
                    left = None if coarse.left is None else s * coarse.left
                    right = None if coarse.right is None else s * coarse.right
                    stretched = Grid1D(s * coarse.nodes, s**dim * coarse.cellweights,
                                       coarse.geometry, dim, left, right)
                    dilated = nash_ratio(fc[name], stretched, variant, r_in)
                    worst_scale = max(worst_scale, abs(dilated / base - 1.0))
                refined = nash_ratio(ff[name], fine, variant, r_in)
                worst_refine = max(worst_refine, abs(refined / base - 1.0))
    ok = worst_scale <= scale_tol and worst_refine <= refine_tol
    return ok, {"max_scaling_error": worst_scale, "max_refinement_change": worst_refine}


# --- end-to-end experiments ---------------------------------------------

LINE_DOMAIN = {"geometry": "line", "xi_min": 1e-3, "xi_max": 50.0, "m": 4000}


def gaussian_line_config(tol_l2=0.15, tol_energy=0.3):
    expectations = []
    for m in (0, 1, 2):
        expectations.append({"metric": f"l2[n={m}]", "slope": -(0.25 + m), "tol": tol_l2})
        expectations.append({"metric": f"energy[n={m}]", "slope": -(0.5 + 2 * m + 1), "tol": tol_energy})
    return {
        "name": "line-gaussian",
        "domain": dict(LINE_DOMAIN),
        "data": {"u0": {"kind": "gaussian", "width": 1.0}, "u1": {"kind": "gaussian", "width": 1.0}},
        "orders": [0, 1, 2],
        "schedule": {"t0": 10.0, "t1": 1e4, "count": 25},
        "metrics": ["l2", "energy"],
        "expectations": expectations,
    }


def heavy_tail_config(tol=0.2, delta=0.02):
    return {
        "name": "line-heavy-tail",
        "domain": dict(LINE_DOMAIN),
        "data": {"u0": {"kind": "zero"}, "u1": {"kind": "heavy_tail", "delta": delta}},
        "orders": [1, 2],
        "schedule": {"t0": 10.0, "t1": 1e4, "count": 25},
        "metrics": ["l2"],
        "expectations": [{"metric": f"l2[n={n}]", "slope": -float(n), "tol": tol} for n in (1, 2)],
    }


def shell3d_config(tol_local=0.4, tol_energy=0.3, max_ratio=3.0):
    bump = {"kind": "bump", "support": [1.0, 3.0]}
    return {
        "name": "shell-3d",
        "domain": {"geometry": "radial", "N": 3, "r_in": 1.0, "r_out": 400.0, "m": 3000},
        "data": {"u0": bump, "u1": dict(bump)},
        "orders": [0],
        "schedule": {"t0": 10.0, "t1": 300.0, "count": 30},
        "metrics": ["l2", "energy", {"local_energy": 5.0}],
        "expectations": [
            {"metric": "local_energy(R=5)[n=0]", "slope": -3.0, "tol": tol_local},
            {"metric": "energy[n=0]", "slope": -2.5, "tol": tol_energy},
            {"metric": "l2[n=0]", "window": [100.0, 300.0], "square": True,
             "plateau": {"power": 1.5}, "max_ratio": max_ratio},
        ],
    }


def shell2d_config(heat_ratio=4.0, wave_ratio=5.0):
    bump = {"kind": "bump", "support": [1.0, 3.0]}
    return {
        "name": "shell-2d",
        "domain": {"geometry": "radial", "N": 2, "r_in": 1.0, "r_out": 2000.0, "m": 6000},
        "data": {"u0": bump, "u1": dict(bump)},
        "orders": [0],
        "schedule": {"t0": 10.0, "t1": 1000.0, "count": 31},
        "metrics": ["l2", "heat_l2"],
        "expectations": [
            {"metric": "heat_l2",
             "plateau": {"power": 0.5, "log_power": 1.0, "log_form": "1+log(1+t)"},
             "max_ratio": heat_ratio},
            {"metric": "l2[n=0]", "window": [100.0, 1000.0], "square": True,
             "plateau": {"power": 1.0, "log_power": 2.0, "log_form": "log"},
             "max_ratio": wave_ratio},
        ],
    }


def _experiment_check(config):
    report = run(config)
    measured = {v["metric"] + ":" + v["kind"]: v.get("measured") for v in report.verdicts}
    measured["runtime_s"] = report.runtime_s
    return report.passed, measured


@check("line_gaussian_rates", "cli", "run", level="full")
def line_gaussian_rates(**tols):
    return _experiment_check(gaussian_line_config(**tols))


@check("energy_space_rates", "cli", "run", level="full")
def energy_space_rates(**tols):
    return _experiment_check(heavy_tail_config(**tols))


@check("shell3d_local_energy_and_plateau", "cli", "run", level="full")
def shell3d_rates(**tols):
    return _experiment_check(shell3d_config(**tols))


@check("shell2d_log_decay", "cli", "run", level="full")
def shell2d_rates(**tols):
    return _experiment_check(shell2d_config(**tols))


def determinism_config():
    return {
        "name": "determinism",
        "domain": {"geometry": "interval", "L": 10.0, "m": 96},
        "data": {"u0": {"kind": "bump", "support": [3.0, 7.0]}, "u1": {"kind": "random_energy"}, "seed": 2024},
        "orders": [0, 1, 2],
        "schedule": {"t0": 0.5, "t1": 20.0, "count": 12},
        "metrics": ["l2", "energy", "sharp", {"local_energy": 5.0}, "heat_l2"],
    }


@check("determinism", "cli", "run")
def determinism():
    config = determinism_config()
    first = run(config, threads=1).to_csv()
    second = run(config, threads=4).to_csv()
    return first == second, {"csv_bytes": len(first.encode())}


# --- driver --------------------------------------------------------------


def registered(level="full"):
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    return [entry for entry in _REGISTRY if level == "full" or entry[3] == "fast"]


def verify(level="fast", inject_fault=None):
    """Run the checks for ``level``; returns a JSON-ready summary dict."""
    if inject_fault not in (None, "binomial"):
        raise ValueError(f"unknown fault {inject_fault!r}")
    hook = corrupted_binomials() if inject_fault == "binomial" else contextlib.nullcontext()
    results = []
    start = time.perf_counter()
    with hook:
        for name, module, op, _, fn in registered(level):
            t0 = time.perf_counter()
            try:
                passed, measured = fn()
                result = CheckResult(name, module, op, bool(passed), measured)
            except (DelabError, ArithmeticError, ValueError) as exc:
                result = CheckResult(name, module, op, False, error=f"{type(exc).__name__}: {exc}")
            result.seconds = round(time.perf_counter() - t0, 3)
            results.append(result)
    failures = [f"{r.module}.{r.op}: {r.name}" for r in results if not r.passed]
    return {
        "level": level,
        "tool_version": __version__,
        "passed": not failures,
        "failures": failures,
        "checks": [asdict(r) for r in results],
        "runtime_s": round(time.perf_counter() - start, 3),
    }
