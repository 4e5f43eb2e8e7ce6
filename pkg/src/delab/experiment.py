"""Declarative experiments: JSON config in, CSV table and JSON report out.

A config names a domain, initial data generators, expansion orders, a
log-spaced time schedule, the metrics to record and optional expectations
(slope bounds, log-corrected or compensated plateaus). Example::

    {
      "name": "line-gaussian",
      "domain": {"geometry": "line", "xi_min": 1e-3, "xi_max": 50, "m": 4000},
      "data": {"u0": {"kind": "gaussian", "width": 1.0},
               "u1": {"kind": "gaussian", "width": 1.0}},
      "orders": [0, 1],
      "schedule": {"t0": 10, "t1": 10000, "count": 25},
      "metrics": ["l2", "energy"],
      "expectations": [{"metric": "l2[n=1]", "slope": -1.25, "tol": 0.15}]
    }

Data generators (``kind``):

``gaussian``      ``amplitude * exp(-(x - center)^2 / (2 width^2))``; on the line
                  only ``center = 0`` (even data), transformed in closed form.
``bump``          ``amplitude * exp(1 - 1/(1 - y^2))`` on ``support = [a, b]``,
                  ``y`` the affine map of the support onto ``(-1, 1)``; on the
                  line the support must be symmetric.
``heavy_tail``    line only: transform ``amplitude * xi^(-1/2 + delta) exp(-(xi/cutoff)^2)``,
                  in the energy space but barely in ``L^2`` for small ``delta``.
``random_energy`` modal coefficients ``z_k / sqrt(w_k (1 + lam_k) M)`` with
                  ``z_k`` standard normals from a Philox stream keyed by ``seed``.
``zero``          identically zero.

Metrics, evaluated on the remainder ``r = u - V_n`` for every order ``n``:
``l2`` (``||r||``), ``energy`` (``E(r)``), ``sharp`` (the Lyapunov norm squared),
``local_energy`` with radius ``R`` and ``weighted_l1_log`` (grid domains only).
``heat_l2`` is ``||exp(-tA)(u0 + u1)||`` and does not depend on the order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .domains import RealizedDomain, WholeLine, domain_from_dict
from .errors import ConfigError, DelabError
from .expansion import MAX_PROFILE_ORDER, remainder
from .functionals import energy, local_energy, sharp_norm_sq, weighted_l1_log
from .rates import fit_loglog, log_corrected_fit, plateau_check, sample_schedule
from .spectral import CauchyPair, heat_apply

SCHEMA = "delab.report/1"
GENERATORS = ("gaussian", "bump", "heavy_tail", "random_energy", "zero")
ORDER_METRICS = ("l2", "energy", "sharp", "local_energy", "weighted_l1_log")
PLAIN_METRICS = ("heat_l2",)
PROPAGATION_MARGIN = 2.0
_LOCAL_RE = re.compile(r"^local_energy\(R=([0-9.eE+-]+)\)$")


def _metric_key(item):
    """Normalise a metric entry to ``(kind, radius)``."""
    if isinstance(item, dict) and set(item) == {"local_energy"}:
        return "local_energy", float(item["local_energy"])
    if isinstance(item, str):
        match = _LOCAL_RE.match(item)
        if match:
            return "local_energy", float(match.group(1))
        if item in ORDER_METRICS or item in PLAIN_METRICS:
            return item, None
    raise ValueError(f"unknown metric {item!r}")


def _metric_label(kind, radius):
    return f"local_energy(R={radius:g})" if kind == "local_energy" else kind


@dataclass
class ExperimentConfig:
    name: str
    domain: dict
    data: dict
    orders: list
    schedule: dict
    metrics: list
    expectations: list = field(default_factory=list)
    output: str | None = None

    @classmethod
    def from_dict(cls, raw):
        problems = []
        if not isinstance(raw, dict):
            raise ConfigError(["config must be a JSON object"])
        for key in ("domain", "data", "schedule", "metrics"):
            if key not in raw:
                problems.append(f"missing section {key!r}")
        if problems:
            raise ConfigError(problems)
        config = cls(
            name=str(raw.get("name", "experiment")),
            domain=dict(raw["domain"]),
            data=dict(raw["data"]),
            orders=list(raw.get("orders", [0])),
            schedule=dict(raw["schedule"]),
            metrics=list(raw["metrics"]),
            expectations=list(raw.get("expectations", [])),
            output=raw.get("output"),
        )
        config.validate()
        return config

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        out = asdict(self)
        if out["output"] is None:
            del out["output"]
        return out

    def hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def metric_columns(self):
        columns = []
        for item in self.metrics:
            kind, radius = _metric_key(item)
            label = _metric_label(kind, radius)
            if kind in PLAIN_METRICS:
                columns.append((label, kind, radius, None))
            else:
                for n in self.orders:
                    columns.append((f"{label}[n={n}]", kind, radius, n))
        return columns

    def times(self):
        s = self.schedule
        return sample_schedule(float(s["t0"]), float(s["t1"]), int(s["count"]))

    def validate(self):
        """Collect every violated guard, then raise them together."""
        problems = []
        geometry = self.domain.get("geometry")
        required = {"interval": ("L", "m"), "radial": ("N", "r_in", "r_out", "m"),
                    "line": ("xi_min", "xi_max", "m")}
        if geometry not in required:
            problems.append(f"unknown geometry {geometry!r}")
        else:
            problems += [f"domain needs {key!r}" for key in required[geometry] if key not in self.domain]

        try:
            t0, t1, count = (float(self.schedule["t0"]), float(self.schedule["t1"]),
                             int(self.schedule["count"]))
            if not 0 < t0 < t1:
                problems.append(f"schedule needs 0 < t0 < t1, got ({t0}, {t1})")
            if count < 4:
                problems.append(f"schedule needs count >= 4, got {count}")
        except (KeyError, TypeError, ValueError):
            problems.append("schedule needs numeric t0, t1 and count")
            t1 = None

        for n in self.orders:
            if not isinstance(n, int) or not 0 <= n <= MAX_PROFILE_ORDER:
                problems.append(f"expansion order {n!r} not an integer in [0, {MAX_PROFILE_ORDER}]")

        kinds = []
        for item in self.metrics:
            try:
                kinds.append(_metric_key(item))
            except ValueError as exc:
                problems.append(str(exc))
        for kind, radius in kinds:
            if kind in ("local_energy", "weighted_l1_log") and geometry == "line":
                problems.append(f"metric {kind} needs a grid domain, not the whole line")
            if kind == "weighted_l1_log" and geometry != "radial":
                problems.append("weighted_l1_log is defined on radial domains only")
            if kind == "local_energy" and radius is not None and radius <= 0:
                problems.append("local_energy radius must be positive")

        support = 0.0
        for slot in ("u0", "u1"):
            gen = self.data.get(slot, {"kind": "zero"})
            kind = gen.get("kind") if isinstance(gen, dict) else None
            if kind not in GENERATORS:
                problems.append(f"{slot}: unknown generator {kind!r}")
                continue
            if kind == "random_energy":
                if "seed" not in gen and "seed" not in self.data:
                    problems.append(f"{slot}: random_energy requires a seed")
            if kind == "heavy_tail" and geometry != "line":
                problems.append(f"{slot}: heavy_tail data is defined on the whole line only")
            if kind in ("gaussian", "bump") and geometry == "line":
                if kind == "gaussian" and float(gen.get("center", 0.0)) != 0.0:
                    problems.append(f"{slot}: whole-line gaussian must be centred at 0")
                if kind == "bump":
                    a, b = gen.get("support", (None, None))
                    if a is None or a != -b:
                        problems.append(f"{slot}: whole-line bump needs a symmetric support")
                if self.domain.get("parity", "even") != "even":
                    problems.append(f"{slot}: {kind} data is even; domain parity must be 'even'")
            if kind == "bump":
                a, b = gen.get("support", (None, None))
                if a is None or b is None or not a < b:
                    problems.append(f"{slot}: bump needs support [a, b] with a < b")
            if kind == "gaussian" and not float(gen.get("width", 1.0)) > 0:
                problems.append(f"{slot}: gaussian width must be positive")
            support = max(support, _support_radius(gen, self.domain))

        if t1 is not None and geometry == "radial" and "r_out" in self.domain:
            limit = float(self.domain["r_out"]) - support - PROPAGATION_MARGIN
            if t1 > limit:
                problems.append(
                    f"finite propagation: t1 = {t1:g} exceeds r_out - support - 2 = {limit:g}"
                )
        if t1 is not None and geometry == "line" and "xi_min" in self.domain:
            horizon = 0.01 / float(self.domain["xi_min"]) ** 2
            if t1 > horizon:
                problems.append(f"xi_min window: t1 = {t1:g} exceeds 0.01 / xi_min^2 = {horizon:g}")

        labels = {c[0] for c in self.metric_columns_safe()}
        for exp in self.expectations:
            if exp.get("metric") not in labels:
                problems.append(f"expectation refers to unknown metric {exp.get('metric')!r}")
            if not any(k in exp for k in ("slope", "log_corrected", "plateau")):
                problems.append(f"expectation for {exp.get('metric')!r} has no slope/log_corrected/plateau")
        if problems:
            raise ConfigError(problems)

    def metric_columns_safe(self):
        try:
            return self.metric_columns()
        except ValueError:
            return []


def _support_radius(gen, domain):
    kind = gen.get("kind")
    if kind == "bump":
        return float(gen.get("support", (0.0, 0.0))[1] or 0.0)
    if kind == "gaussian":
        return float(gen.get("center", 0.0)) + 8.0 * float(gen.get("width", 1.0))
    if kind == "random_energy":
        return float(domain.get("r_out", math.inf))
    return 0.0


def bump_profile(x, a, b):
    y = (2.0 * np.asarray(x, dtype=float) - a - b) / (b - a)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - y[inside] ** 2))
    return out


def _physical(gen, x):
    kind = gen["kind"]
    amp = float(gen.get("amplitude", 1.0))
    if kind == "gaussian":
        c, w = float(gen.get("center", 0.0)), float(gen.get("width", 1.0))
        return amp * np.exp(-((x - c) ** 2) / (2 * w * w))
    if kind == "bump":
        a, b = gen["support"]
        return amp * bump_profile(x, float(a), float(b))
    raise ConfigError([f"generator {kind!r} has no physical-space form"])


def _random_modal(op, gen, seed):
    rng = np.random.Generator(np.random.Philox(int(seed)))
    z = rng.standard_normal(op.size)
    amp = float(gen.get("amplitude", 1.0))
    return amp * z / np.sqrt(op.weight * (1.0 + op.lam) * op.size)


def modal_data(domain, gen, default_seed=None):
    """Modal coefficients of one initial-data generator on a domain."""
    kind = gen.get("kind", "zero")
    op = domain.operator
    if kind == "zero":
        return np.zeros(op.size)
    if kind == "random_energy":
        return _random_modal(op, gen, gen.get("seed", default_seed))
    if isinstance(domain, WholeLine):
        xi = domain.xi
        amp = float(gen.get("amplitude", 1.0))
        if kind == "gaussian":
            w = float(gen.get("width", 1.0))
            return amp * w * math.sqrt(2 * math.pi) * np.exp(-0.5 * (w * xi) ** 2)
        if kind == "heavy_tail":
            delta = float(gen.get("delta", 0.02))
            cutoff = float(gen.get("cutoff", 1.0))
            return amp * xi ** (-0.5 + delta) * np.exp(-((xi / cutoff) ** 2))
        if kind == "bump":
            radius = float(gen["support"][1])
            nodes, weights = np.polynomial.legendre.leggauss(400)
            x = 0.5 * radius * (nodes + 1.0)
            return domain.analyze(_physical(gen, x), x, 0.5 * radius * weights)
    return domain.analyze(_physical(gen, domain.grid.nodes))


def build_data(domain, data_spec):
    seed = data_spec.get("seed")
    zero = {"kind": "zero"}
    return CauchyPair(
        modal_data(domain, data_spec.get("u0", zero), seed),
        modal_data(domain, data_spec.get("u1", zero), seed),
    )


def _evaluate(domain, data, columns, t):
    op = domain.operator
    cache = {}
    values = []
    for _, kind, radius, n in columns:
        if kind == "heat_l2":
            values.append(op.norm(heat_apply(op, data.v00, t)))
            continue
        if n not in cache:
            cache[n] = remainder(n, op, data, t)
        r, dr = cache[n]
        if kind == "l2":
            values.append(op.norm(r))
        elif kind == "energy":
            values.append(energy(op, r, dr))
        elif kind == "sharp":
            values.append(sharp_norm_sq(op, r, dr))
        elif kind == "local_energy":
            values.append(local_energy(domain, domain.synthesize(r), domain.synthesize(dr), radius))
        elif kind == "weighted_l1_log":
            values.append(weighted_l1_log(domain.synthesize(r), domain.grid, domain.grid.left))
    return values


def _plain(obj):
    """JSON-native copy (tuples become lists), so reports survive a roundtrip."""
    return json.loads(json.dumps(obj))


def _fit_dict(samples):
    try:
        return _plain(asdict(fit_loglog(samples)))
    except DelabError:
        return None


def evaluate_expectation(exp, samples, config_hash):
    verdict = {"metric": exp["metric"], "config_hash": config_hash}
    if "window" in exp:
        lo, hi = exp["window"]
        samples = [(t, v) for t, v in samples if lo <= t <= hi]
    if exp.get("square"):
        samples = [(t, v * v) for t, v in samples]
    try:
        if "slope" in exp:
            fit = fit_loglog(samples, exp.get("discard", 0.2))
            gap = abs(fit.slope - exp["slope"])
            verdict.update(kind="slope", expected=exp["slope"], tol=exp["tol"],
                           measured=fit.slope, gap=gap, passed=gap <= exp["tol"], fit=asdict(fit))
        elif "log_corrected" in exp:
            p, sigma = exp["log_corrected"]
            lo, hi = log_corrected_fit(samples, p, sigma)
            ratio = hi / lo if lo > 0 else math.inf
            verdict.update(kind="log_corrected", p=p, sigma=sigma, lo=lo, hi=hi, measured=ratio,
                           max_ratio=exp["max_ratio"], passed=lo > 0 and ratio <= exp["max_ratio"])
        else:
            spec = exp["plateau"]
            power = float(spec.get("power", 0.0))
            log_power = float(spec.get("log_power", 0.0))
            form = spec.get("log_form", "log")
            comp = []
            for t, v in samples:
                logt = math.log(t) if form == "log" else 1.0 + math.log1p(t)
                comp.append((t, v * t**power * logt**log_power))
            lo, hi, ratio = plateau_check(comp, spec.get("window_fraction", 1.0))
            verdict.update(kind="plateau", lo=lo, hi=hi, measured=ratio, max_ratio=exp["max_ratio"],
                           passed=lo > 0 and ratio <= exp["max_ratio"])
    except DelabError as exc:
        verdict.update(kind="error", passed=False, error=str(exc))
    return verdict


@dataclass
class Report:
    config: dict
    config_hash: str
    columns: list
    tables: dict
    fits: dict
    verdicts: list
    runtime_s: float = 0.0
    tool_version: str = __version__
    schema: str = SCHEMA

    @property
    def passed(self):
        return all(v["passed"] for v in self.verdicts)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, raw):
        if raw.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {raw.get('schema')!r}")
        return cls(**raw)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "t", "value"])
        for name in self.columns:
            for t, v in self.tables[name]:
                writer.writerow([name, repr(float(t)), repr(float(v))])
        return buf.getvalue()


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get("DEL_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def build_domain(config):
    try:
        return domain_from_dict(config.domain)
    except DelabError as exc:
        raise ConfigError([f"domain: {exc}"]) from exc


def run(config, threads=None, domain=None):
    """Execute an experiment; the result depends only on the config."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    start = time.perf_counter()
    if domain is None:
        domain = build_domain(config)
    if not isinstance(domain, (RealizedDomain, WholeLine)):
        raise ConfigError(["unsupported domain object"])
    try:
        data = build_data(domain, config.data)
    except DelabError as exc:
        raise type(exc)(f"data stage: {exc}") from exc
    columns = config.metric_columns()
    times = config.times()
    workers = resolve_threads(threads)
    try:
        if workers == 1:
            rows = [_evaluate(domain, data, columns, t) for t in times]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(lambda t: _evaluate(domain, data, columns, t), times))
    except DelabError as exc:
        raise type(exc)(f"evaluation stage: {exc}") from exc

    names = [c[0] for c in columns]
    tables = {name: [[float(t), float(row[j])] for t, row in zip(times, rows)]
              for j, name in enumerate(names)}
    fits = {name: _fit_dict(tables[name]) for name in names}
    digest = config.hash()
    verdicts = [_plain(evaluate_expectation(exp, tables[exp["metric"]], digest)) for exp in config.expectations]
    return Report(config.to_dict(), digest, names, tables, fits, verdicts,
                  runtime_s=round(time.perf_counter() - start, 6))


def export(report, fmt, out_dir, stem=None):
    """Write a report as ``<stem>.csv`` or ``<stem>.json``; returns the path."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or report.config.get("name", "experiment")
    path = out_dir / f"{stem}.{fmt}"
    text = report.to_csv() if fmt == "csv" else report.to_json()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def load_report(path):
    with open(path, encoding="utf-8") as fh:
        return Report.from_dict(json.load(fh))
