import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delab.domains import Grid1D, build_interval, build_radial_exterior, build_whole_line, radial_grid
from delab.errors import ConvergenceError, DegenerateInputError, DomainError, OrderError, ShapeError
from delab.functionals import (
    GeneratorPair,
    dissipation_integral,
    energy,
    energy_report,
    generator_apply,
    graph_norm_sq,
    h_norm_sq,
    heat_square_integral,
    local_energy,
    lq_norm,
    nash_ratio,
    sharp_norm_sq,
    weighted_l1_log,
)
from delab.quadrature import adaptive_simpson
from delab.rates import fit_loglog
from delab.spectral import CauchyPair, ModalOperator, evolve, evolve_derivative


def single(lam):
    return ModalOperator([lam], [1.0])


def random_setup(rng, size=64):
    op = build_interval(10.0, size).operator
    scale = 1.0 / np.sqrt(1.0 + op.lam)
    return op, CauchyPair(rng.standard_normal(size) * scale, rng.standard_normal(size) * scale)


class TestEnergy:
    def test_single_mode(self):
        assert energy(single(1.0), [1.0], [0.0]) == 1.0

    def test_zero(self):
        assert energy(single(3.0), [0.0], [0.0]) == 0.0

    def test_additive(self):
        op = ModalOperator([1.0, 2.0], [1.0, 0.5])
        both = energy(op, [1.0, 2.0], [3.0, 4.0])
        assert both == pytest.approx((9 + 1) + 0.5 * (16 + 2 * 4), rel=1e-15)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            energy(single(1.0), [1.0, 2.0], [0.0])

    def test_monotone_along_flow(self, rng):
        op, data = random_setup(rng)
        values = [energy(op, *evolve(op, data, t)) for t in np.linspace(0, 20, 81)]
        assert all(b <= a for a, b in zip(values, values[1:]))


class TestHNorm:
    def test_zero_mode(self):
        assert h_norm_sq(single(0.0), [1.0], [0.0]) == 0.5

    @pytest.mark.parametrize("lam", [0.0, 1.0, 37.0])
    def test_velocity_only(self, lam):
        assert h_norm_sq(single(lam), [0.0], [1.0]) == 1.0

    def test_equivalence_sandwich(self, rng):
        op = ModalOperator(np.geomspace(1e-3, 1e3, 20), np.ones(20))
        for _ in range(200):
            f, g = rng.standard_normal((2, 20)) * rng.uniform(0.1, 10)
            a_part = op.norm_sq(np.sqrt(op.lam) * f)
            value = h_norm_sq(op, f, g)
            assert a_part + op.norm_sq(f) / 6 + op.norm_sq(g) / 4 <= value * (1 + 1e-14)
            assert value <= (a_part + op.norm_sq(f) + 1.5 * op.norm_sq(g)) * (1 + 1e-14)

    def test_energy_reconstruction(self, rng):
        op, data = random_setup(rng)
        for t in (0.0, 0.7, 4.0):
            u, du = evolve(op, data, t)
            rebuilt = energy(op, u, du) + op.norm_sq(u) / 2 + op.inner(u, du)
            assert sharp_norm_sq(op, u, du) == pytest.approx(rebuilt, rel=1e-12)
            report = energy_report(op, u, du)
            assert report.l2sq == op.norm_sq(u)


class TestGenerator:
    def test_examples(self):
        out = generator_apply(single(2.0), GeneratorPair([1.0], [0.0]))
        assert (out.f[0], out.g[0]) == (0.0, -2.0)
        out = generator_apply(single(0.0), GeneratorPair([0.0], [1.0]))
        assert (out.f[0], out.g[0]) == (1.0, -1.0)

    def test_square(self, rng):
        lam = np.array([0.0, 0.5, 3.0])
        op = ModalOperator(lam, np.ones(3))
        f, g = rng.standard_normal((2, 3))
        twice = generator_apply(op, generator_apply(op, GeneratorPair(f, g)))
        np.testing.assert_allclose(twice.f, -lam * f - g, atol=1e-15)
        np.testing.assert_allclose(twice.g, lam * f + g - lam * g, atol=1e-15)

    def test_graph_norm(self, rng):
        assert graph_norm_sq(single(1.0), GeneratorPair([1.0], [0.0]), 1) == 2.5
        op = ModalOperator(np.linspace(0, 4, 6), np.ones(6))
        p = GeneratorPair(*rng.standard_normal((2, 6)))
        values = [graph_norm_sq(op, p, n) for n in range(6)]
        assert values[0] == h_norm_sq(op, p.f, p.g)
        assert all(b >= a for a, b in zip(values, values[1:]))
        with pytest.raises(OrderError):
            graph_norm_sq(op, p, 13)

    def test_pair_shapes(self):
        with pytest.raises(ShapeError):
            GeneratorPair([1.0], [1.0, 2.0])


class TestDissipation:
    def test_zero_mode_total(self):
        op = single(0.0)
        data = CauchyPair([0.0], [1.0])
        assert dissipation_integral(op, data, 60.0) == pytest.approx(1.0, abs=1e-9)

    def test_zero_data(self):
        assert dissipation_integral(single(1.0), CauchyPair([0.0], [0.0]), 5.0) == 0.0

    def test_energy_identity(self, rng):
        op, data = random_setup(rng)
        e0 = energy(op, data.u0, data.u1)
        for t in (1.0, 5.0, 20.0):
            gap = energy(op, *evolve(op, data, t)) + dissipation_integral(op, data, t) - e0
            assert abs(gap) <= 1e-6 * e0

    def test_bad_arguments(self):
        data = CauchyPair([1.0], [0.0])
        with pytest.raises(DomainError):
            dissipation_integral(single(1.0), data, 0.0)
        with pytest.raises(DomainError):
            dissipation_integral(single(1.0), data, 1.0, tol=1e-14)


class TestSharpNorm:
    @staticmethod
    def rate_error(op, data, t, h):
        def sharp(s):
            return sharp_norm_sq(op, *evolve(op, data, s))

        return abs((sharp(t + h) - sharp(t - h)) / (2 * h) + energy(op, *evolve(op, data, t)))

    def test_second_order_dissipation(self, rng):
        op = ModalOperator(np.geomspace(0.05, 20, 16), np.ones(16))
        data = CauchyPair(*rng.standard_normal((2, 16)))
        ratio = self.rate_error(op, data, 1.0, 1e-3) / self.rate_error(op, data, 1.0, 5e-4)
        assert 3.5 <= ratio <= 4.5

    def test_short_time_bound(self, rng):
        op = ModalOperator(np.geomspace(1e-4, 1e3, 30), np.ones(30))
        for _ in range(200):
            data = CauchyPair(*rng.standard_normal((2, 30)))
            t = float(rng.uniform(0, 50))
            u, du = evolve(op, data, t)
            lhs = 2 * sharp_norm_sq(op, u, du) + t * energy(op, u, du)
            assert lhs <= 2 * h_norm_sq(op, data.u0, data.u1) * (1 + 1e-12)


class TestHeatMoments:
    def test_zero(self):
        assert heat_square_integral(single(1.0), [0.0], 0, 10.0) == 0.0

    def test_single_mode(self):
        assert heat_square_integral(single(1.0), [1.0], 0, 40.0) == pytest.approx(0.5, rel=1e-9)

    @pytest.mark.parametrize("lam", [0.01, 0.1, 1.0, 10.0, 100.0])
    def test_first_moment(self, lam):
        tmax = 40.0 / lam
        value = heat_square_integral(single(lam), [1.0], 1, tmax)
        assert value == pytest.approx(lam / 2 + 0.25, rel=1e-8)
        assert value <= 1.0 * (1 + lam)

    def test_order_cap(self):
        with pytest.raises(OrderError):
            heat_square_integral(single(1.0), [1.0], 9, 1.0)


class TestTimeDerivativeRates:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_smooth_data_derivatives_decay(self, n):
        line = build_whole_line(1e-3, 50.0, 2000)
        op = line.operator
        g = math.sqrt(2 * math.pi) * np.exp(-line.xi**2 / 2)
        data = CauchyPair(g, g)
        samples = [(t, op.norm_sq(evolve_derivative(op, data, t, n)[0])) for t in np.geomspace(10, 1e4, 20)]
        assert fit_loglog(samples).slope <= -2 * n + 0.2


class TestGridNorms:
    def test_constant_on_unit_measure(self):
        w = np.full(10, 0.1)
        for q in (1, 2, 3.5, math.inf):
            assert lq_norm(np.ones(10), w, q) == pytest.approx(1.0, rel=1e-15)

    def test_bad_exponent(self):
        with pytest.raises(DomainError):
            lq_norm(np.ones(3), np.ones(3), 0.5)

    def test_parseval(self):
        dom = build_interval(10.0, 300)
        f = np.exp(-((dom.grid.nodes - 4) ** 2))
        assert lq_norm(f, dom.grid.cellweights, 2) == pytest.approx(float(np.linalg.norm(dom.analyze(f))), rel=1e-10)

    def test_gaussian_l1(self):
        dom = build_interval(40.0, 2000)
        f = np.exp(-((dom.grid.nodes - 20) ** 2) / 2)
        assert lq_norm(f, dom.grid.cellweights, 1) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-4)

    def test_log_weight_zero(self):
        grid = radial_grid(2, 1.0, 10.0, 100)
        assert weighted_l1_log(np.zeros(100), grid, 1.0) == 0.0

    def test_log_weight_annulus(self):
        r_in, k = 1.0, 2000
        h = (math.e - 1) * r_in / (k + 0.5)
        radii = r_in + h * np.arange(0, 2 * k + 3)
        grid = radial_grid(2, r_in, float(radii[-1]), radii.size - 2, radii=radii)
        indicator = (grid.nodes <= math.e * r_in).astype(float)
        exact = 2 * math.pi * r_in**2 * (3 * math.e**2 / 4 - 0.25)
        assert weighted_l1_log(indicator, grid, r_in) == pytest.approx(exact, rel=1e-4)

    def test_log_weight_vanishes_at_inner_radius(self):
        grid = Grid1D([1.0, 2.0], [0.5, 0.5], "radial", 2, None, 3.0)
        assert weighted_l1_log([1.0, 0.0], grid, 1.0) == 0.5

    def test_nodes_inside_inner_radius(self):
        with pytest.raises(DomainError):
            weighted_l1_log(np.ones(100), radial_grid(2, 1.0, 10.0, 100), 2.0)


class TestLocalEnergy:
    @pytest.fixture
    def shell(self, rng):
        dom = build_radial_exterior(3, 1.0, 20.0, 400)
        r = dom.grid.nodes
        u = np.exp(-((r - 5) ** 2))
        du = (r - 5) * np.exp(-((r - 6) ** 2))
        return dom, u, du

    def test_full_radius(self, shell):
        dom, u, du = shell
        grad = dom.grid.gradient(u)
        full = float(np.sum(dom.grid.cellweights * (du * du + grad * grad)))
        assert local_energy(dom, u, du, 20.0) == pytest.approx(full, rel=1e-12)

    def test_inner_radius(self, shell):
        dom, u, du = shell
        assert local_energy(dom, u, du, 1.0) == 0.0

    def test_monotone(self, shell):
        dom, u, du = shell
        values = [local_energy(dom, u, du, R) for R in np.linspace(1, 20, 40)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_out_of_range(self, shell):
        dom, u, du = shell
        with pytest.raises(DomainError):
            local_energy(dom, u, du, 25.0)


def gaussian_on(grid, centre):
    return np.exp(-((grid.nodes - centre) ** 2) / 2)


class TestNash:
    @pytest.mark.parametrize("variant", ["nash", "gn", "lognash"])
    def test_scaling_invariance(self, variant):
        grid = radial_grid(2, 1.0, 40.0, 600)
        f = gaussian_on(grid, 6.0)
        assert nash_ratio(7 * f, grid, variant, 1.0) == pytest.approx(nash_ratio(f, grid, variant, 1.0), rel=1e-12)

    @given(c=st.floats(1e-3, 1e3))
    def test_homogeneity_property(self, c):
        grid = build_interval(40.0, 300).grid
        f = gaussian_on(grid, 20.0)
        assert nash_ratio(c * f, grid, "gn") == pytest.approx(nash_ratio(f, grid, "gn"), rel=1e-12)

    @pytest.mark.parametrize("variant", ["nash", "gn"])
    def test_refinement_stability_1d(self, variant):
        ratios = [nash_ratio(gaussian_on(g, 20.0), g, variant) for g in (build_interval(40.0, m).grid for m in (400, 800, 1600))]
        assert max(ratios) / min(ratios) - 1 <= 0.02
        assert all(math.isfinite(r) for r in ratios)

    def test_zero_function(self):
        with pytest.raises(DegenerateInputError):
            nash_ratio(np.zeros(100), build_interval(1.0, 100).grid)

    def test_unknown_variant(self):
        grid = build_interval(1.0, 100).grid
        with pytest.raises(DomainError):
            nash_ratio(np.sin(np.pi * grid.nodes), grid, "other")

    def test_lognash_needs_inner_radius(self):
        grid = radial_grid(2, 1.0, 10.0, 100)
        with pytest.raises(DomainError):
            nash_ratio(gaussian_on(grid, 3.0), grid, "lognash")


class TestQuadrature:
    def test_polynomial_exact(self):
        assert adaptive_simpson(lambda x: x**3, 0.0, 2.0) == pytest.approx(4.0, rel=1e-14)

    def test_exponential(self):
        assert adaptive_simpson(math.exp, 0.0, 1.0, rtol=1e-12) == pytest.approx(math.e - 1, rel=1e-11)

    def test_cap(self):
        with pytest.raises(ConvergenceError):
            adaptive_simpson(lambda x: math.sin(1 / x) if x else 0.0, 0.0, 1.0, rtol=1e-14, max_intervals=64)

    def test_empty_interval(self):
        assert adaptive_simpson(math.exp, 1.0, 1.0) == 0.0
