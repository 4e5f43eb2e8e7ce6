"""Realised domains: grids, discrete Dirichlet Laplacians and their eigenbases.

Three geometries are supported:

* ``interval`` -- ``(0, L)`` with the exact sine spectrum sampled on a
  uniform grid,
* ``radial`` -- the exterior shell ``r_in < |x| < r_out`` in two or three
  dimensions for radial functions, discretised by finite volumes,
* the whole line, represented only spectrally through a cosine (even data)
  or sine (odd data) transform on a ``xi`` quadrature; see :class:`WholeLine`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import DomainError, NumericError, ShapeError
from .spectral import ModalOperator

MAX_INTERVAL_MODES = 4096
MIN_RADIAL_NODES = 64
EIGEN_CLAMP = 1e-12


def sphere_area(dim):
    """Surface measure of the unit sphere in ``R^dim``."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


@dataclass(frozen=True)
class Grid1D:
    """Nodes with their cell measures.

    ``nodes`` are the unknowns; ``left``/``right`` are the Dirichlet boundary
    positions (``None`` on an unbounded side).  For radial grids the cell
    weights include the surface factor ``|S^{N-1}| r^{N-1}``.
    """

    nodes: np.ndarray
    cellweights: np.ndarray
    geometry: str
    dim: int = 1
    left: float | None = None
    right: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.cellweights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size < 2:
            raise ShapeError("grid nodes and weights must be equal-length vectors")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise DomainError("cell weights must be positive")
        if self.left is not None and not self.left < nodes[0]:
            raise DomainError("left boundary must precede the first node")
        if self.right is not None and not self.right > nodes[-1]:
            raise DomainError("right boundary must follow the last node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "cellweights", weights)

    @property
    def size(self):
        return self.nodes.size

    def check(self, f, name="grid function"):
        f = np.asarray(f, dtype=float)
        if f.shape != self.nodes.shape:
            raise ShapeError(f"{name} has shape {f.shape}, grid has {self.size} nodes")
        return f

    def extended(self, f):
        """Nodes and values including Dirichlet boundary points (value 0)."""
        f = self.check(f)
        x, v = self.nodes, f
        if self.left is not None:
            x, v = np.concatenate([[self.left], x]), np.concatenate([[0.0], v])
        if self.right is not None:
            x, v = np.concatenate([x, [self.right]]), np.concatenate([v, [0.0]])
        return x, v

    def gradient(self, f):
        """Second-order centred derivative at the nodes (one-sided at open ends)."""
        x, v = self.extended(f)
        g = np.gradient(v, x, edge_order=2)
        start = 1 if self.left is not None else 0
        return g[start : start + self.size]

    def extent(self):
        lo = self.left if self.left is not None else self.nodes[0]
        hi = self.right if self.right is not None else self.nodes[-1]
        return lo, hi


def radial_nodes(r_in, r_out, m):
    """``m + 2`` radii from ``r_in`` to ``r_out``: uniform near ``r_in``, log-spaced far out.

    ``r = r_in + r_in * sinh(beta * s)`` on a uniform ``s`` grid.
    """
    beta = math.asinh((r_out - r_in) / r_in)
    s = np.arange(m + 2) / (m + 1)
    r = r_in + r_in * np.sinh(beta * s)
    r[0], r[-1] = r_in, r_out
    return r


def radial_grid(dim, r_in, r_out, m, radii=None):
    """Finite-volume grid of the shell; cell ``i`` spans the face midpoints around ``r_i``."""
    r = radial_nodes(r_in, r_out, m) if radii is None else np.asarray(radii, dtype=float)
    faces = 0.5 * (r[:-1] + r[1:])
    faces[0], faces[-1] = r[0], r[-1]
    area = sphere_area(dim)
    weights = area * (faces[1:] ** dim - faces[:-1] ** dim) / dim
    return Grid1D(r[1:-1], weights, "radial", dim, float(r[0]), float(r[-1]))


def tridiag_eigh(diag, offdiag):
    """All eigenpairs of a symmetric tridiagonal matrix, ascending.

    Each eigenvector is sign-normalised so its largest-magnitude entry is
    positive, which makes the table independent of LAPACK sign choices.
    """
    diag = np.asarray(diag, dtype=float)
    offdiag = np.asarray(offdiag, dtype=float)
    if diag.ndim != 1 or offdiag.shape != (max(diag.size - 1, 0),):
        raise ShapeError("offdiag must have exactly one entry fewer than diag")
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(offdiag))):
        raise DomainError("tridiagonal entries must be finite")
    if diag.size == 1:
        return diag.copy(), np.ones((1, 1))
    try:
        values, vectors = eigh_tridiagonal(diag, offdiag)
    except LinAlgError as exc:
        raise NumericError(f"tridiagonal eigensolver failed: {exc}") from exc
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    vectors *= signs
    return values, vectors


def _clamp_spectrum(values, scale):
    floor = -EIGEN_CLAMP * max(scale, 1.0)
    if np.any(values < floor):
        raise NumericError(f"negative eigenvalue {values.min():.3e} below clamp {floor:.3e}")
    return np.maximum(values, 0.0)


@dataclass
class RealizedDomain:
    """Grid plus orthonormal eigenbasis of the discrete Dirichlet Laplacian.

    ``basis[:, k]`` is the k-th mode shape, orthonormal under the cell weights.
    """

    grid: Grid1D
    operator: ModalOperator
    basis: np.ndarray
    params: dict = field(default_factory=dict)
    stiffness: tuple | None = None

    def analyze(self, f):
        f = self.grid.check(f)
        return self.basis.T @ (self.grid.cellweights * f)

    def synthesize(self, c):
        c = self.operator.check(c, "modal vector")
        return self.basis @ c

    def neg_laplacian(self, f, left=0.0, right=0.0):
        """Discrete ``-Laplacian`` of nodal values with given boundary values."""
        f = self.grid.check(f)
        if self.stiffness is None:
            return self.synthesize(self.operator.lam * self.analyze(f))
        kappa = self.stiffness[0]
        ext = np.concatenate([[left], f, [right]])
        flux = kappa * np.diff(ext)
        return -(flux[1:] - flux[:-1]) / self.grid.cellweights

    def to_dict(self):
        return dict(self.params)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def build_interval(length, m):
    """``(0, L)`` with modes ``sqrt(2/L) sin(k pi x / L)`` sampled on ``m`` interior nodes."""
    if not length > 0:
        raise DomainError(f"interval length must be positive, got {length}")
    if int(m) != m or not 1 <= m <= MAX_INTERVAL_MODES:
        raise DomainError(f"mode count must be an integer in [1, {MAX_INTERVAL_MODES}], got {m}")
    m = int(m)
    h = length / (m + 1)
    x = h * np.arange(1, m + 1)
    k = np.arange(1, m + 1)
    grid = Grid1D(x, np.full(m, h), "interval", 1, 0.0, float(length))
    basis = math.sqrt(2.0 / length) * np.sin(np.outer(x, k) * (math.pi / length))
    op = ModalOperator((k * math.pi / length) ** 2, np.ones(m), f"interval(L={length}, m={m})")
    params = {"geometry": "interval", "L": float(length), "m": m}
    return RealizedDomain(grid, op, basis, params)


def build_radial_exterior(dim, r_in, r_out, m):
    """Dirichlet Laplacian on radial functions in the shell ``r_in < |x| < r_out``.

    Face conductances integrate ``r^(1-N)`` exactly between neighbouring nodes,
    so the radial harmonic functions are discretely harmonic.
    """
    if dim not in (2, 3):
        raise DomainError(f"radial shells are supported for N = 2, 3; got {dim}")
    if not 0 < r_in or not r_out > 4 * r_in:
        raise DomainError(f"need 0 < r_in and r_out > 4 r_in, got ({r_in}, {r_out})")
    if int(m) != m or m < MIN_RADIAL_NODES:
        raise DomainError(f"need at least {MIN_RADIAL_NODES} radial nodes, got {m}")
    m = int(m)
    grid = radial_grid(dim, r_in, r_out, m)
    r = np.concatenate([[grid.left], grid.nodes, [grid.right]])
    area = sphere_area(dim)
    if dim == 2:
        kappa = area / np.log(r[1:] / r[:-1])
    else:
        kappa = area * r[:-1] * r[1:] / np.diff(r)
    w = grid.cellweights
    diag = (kappa[:-1] + kappa[1:]) / w
    off = -kappa[1:-1] / np.sqrt(w[:-1] * w[1:])
    values, vectors = tridiag_eigh(diag, off)
    values = _clamp_spectrum(values, float(diag.max()))
    basis = vectors / np.sqrt(w)[:, None]
    op = ModalOperator(values, np.ones(m), f"radial(N={dim}, r_in={r_in}, r_out={r_out}, m={m})")
    params = {"geometry": "radial", "N": dim, "r_in": float(r_in), "r_out": float(r_out), "m": m}
    return RealizedDomain(grid, op, basis, params, stiffness=(kappa,))


class WholeLine:
    """Continuous spectrum of ``-d^2/dx^2`` on the line, for even or odd data.

    Modes are frequencies ``xi > 0`` with ``lam = xi^2``; coefficients are the
    cosine (sine) transform ``2 * int_0^inf f(x) cos(x xi) dx`` and the weights
    carry ``d xi / pi`` so that the modal norm is the ``L^2(R)`` norm.

    The quadrature is Gauss-Legendre on ``[0, xi_min]`` followed by the
    trapezoid rule in ``log xi`` on ``[xi_min, xi_max]``. It resolves heat and
    damped-wave evolutions up to ``t ~ 0.01 / xi_min^2``.
    """

    def __init__(self, xi_min, xi_max, m, parity="even", low_nodes=8):
        if not 0 < xi_min < xi_max:
            raise DomainError(f"need 0 < xi_min < xi_max, got ({xi_min}, {xi_max})")
        if int(m) != m or m < 4:
            raise DomainError(f"need at least 4 frequency nodes, got {m}")
        if parity not in ("even", "odd"):
            raise DomainError(f"parity must be 'even' or 'odd', got {parity!r}")
        m = int(m)
        gl_x, gl_w = np.polynomial.legendre.leggauss(low_nodes)
        low = 0.5 * xi_min * (gl_x + 1.0)
        low_w = 0.5 * xi_min * gl_w
        u = np.linspace(math.log(xi_min), math.log(xi_max), m)
        h = u[1] - u[0]
        high = np.exp(u)
        high[0], high[-1] = xi_min, xi_max
        high_w = h * high
        high_w[0] *= 0.5
        high_w[-1] *= 0.5
        self.xi = np.concatenate([low, high])
        self.xi_min = float(xi_min)
        self.xi_max = float(xi_max)
        self.m = m
        self.parity = parity
        self.low_nodes = low_nodes
        self.operator = ModalOperator(
            self.xi**2, np.concatenate([low_w, high_w]) / math.pi,
            f"whole_line(xi=[{xi_min}, {xi_max}], m={m}, {parity})",
        )

    def _kernel(self, x, xi):
        arg = np.outer(x, xi)
        return np.cos(arg) if self.parity == "even" else np.sin(arg)

    def analyze(self, f, x, wx):
        """Transform of ``f`` sampled at ``x >= 0`` with quadrature weights ``wx``."""
        f = np.asarray(f, dtype=float)
        return 2.0 * (self._kernel(x, self.xi).T @ (np.asarray(wx) * f))

    def synthesize(self, c, x):
        c = self.operator.check(c, "modal vector")
        return self._kernel(x, self.xi) @ (self.operator.weight * c)

    def validity_horizon(self):
        return 0.01 / self.xi_min**2

    def to_dict(self):
        return {"geometry": "line", "xi_min": self.xi_min, "xi_max": self.xi_max,
                "m": self.m, "parity": self.parity}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def build_whole_line(xi_min, xi_max, m, parity="even"):
    return WholeLine(xi_min, xi_max, m, parity)


def domain_from_dict(spec):
    """Rebuild a domain from its JSON description."""
    geometry = spec.get("geometry")
    if geometry == "interval":
        return build_interval(spec["L"], spec["m"])
    if geometry == "radial":
        return build_radial_exterior(spec["N"], spec["r_in"], spec["r_out"], spec["m"])
    if geometry == "line":
        return build_whole_line(spec["xi_min"], spec["xi_max"], spec["m"], spec.get("parity", "even"))
    raise DomainError(f"unknown geometry {geometry!r}")


def harmonic_profile(dim, r_in):
    """Radial harmonic function vanishing at ``r_in``.

    ``1 - r_in/r`` for ``N = 3`` (tends to 1 at infinity) and ``log(r/r_in)``
    for ``N = 2``.
    """
    if dim not in (2, 3):
        raise DomainError(f"harmonic profiles are provided for N = 2, 3; got {dim}")
    if not r_in > 0:
        raise DomainError(f"r_in must be positive, got {r_in}")

    def h(r):
        r = np.asarray(r, dtype=float)
        if np.any(r < r_in):
            raise DomainError(f"harmonic profile evaluated inside the obstacle (r < {r_in})")
        out = 1.0 - r_in / r if dim == 3 else np.log(r / r_in)
        return float(out) if out.ndim == 0 else out

    return h


def harmonic_profile_derivative(dim, r_in):
    def dh(r):
        r = np.asarray(r, dtype=float)
        if np.any(r < r_in):
            raise DomainError(f"harmonic profile evaluated inside the obstacle (r < {r_in})")
        return r_in / r**2 if dim == 3 else 1.0 / r

    return dh
