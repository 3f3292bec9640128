import math

import numpy as np
import pytest

from mcsn.geometry import Mesh, ProblemSpec, RegionSpec
from mcsn.sn import (
    FOUR_PI,
    SnNonConvergence,
    gauss_legendre_quadrature,
    product_quadrature_2d,
    source_iteration,
    sweep,
)


def slab(regions, cells):
    lo = min(r.lo[0] for r in regions)
    hi = max(r.hi[0] for r in regions)
    return ProblemSpec(Mesh.uniform_1d(lo, hi, cells), regions)


class TestGaussLegendre:
    def test_s2_nodes(self):
        q = gauss_legendre_quadrature(2)
        mu = np.sort(q.directions[:, 2])
        np.testing.assert_allclose(mu, [-1 / math.sqrt(3), 1 / math.sqrt(3)],
                                   rtol=1e-12)
        np.testing.assert_allclose(q.weights, 2 * math.pi, rtol=1e-12)

    def test_s4_nodes_and_weights(self):
        q = gauss_legendre_quadrature(4)
        mu = np.sort(q.directions[:, 2])
        np.testing.assert_allclose(
            np.abs(mu), [0.8611363116, 0.3399810436, 0.3399810436, 0.8611363116],
            rtol=1e-9)
        wmu = np.sort(q.weights / (2 * math.pi))
        np.testing.assert_allclose(
            wmu, [0.3478548451, 0.3478548451, 0.6521451549, 0.6521451549],
            rtol=1e-9)

    def test_first_moment_vanishes(self):
        for order in (2, 4, 8, 16):
            q = gauss_legendre_quadrature(order)
            assert abs(np.sum(q.weights * q.directions[:, 2])) < 1e-12

    def test_moment_exactness(self):
        # order N integrates mu^k exactly for k <= 2N-1
        for order in (2, 4, 8):
            q = gauss_legendre_quadrature(order)
            mu = q.directions[:, 2]
            for k in range(2 * order):
                exact = FOUR_PI / (k + 1) if k % 2 == 0 else 0.0
                assert np.sum(q.weights * mu**k) == pytest.approx(exact, abs=1e-12)

    def test_odd_order_rejected(self):
        with pytest.raises(ValueError):
            gauss_legendre_quadrature(3)


class TestProductQuadrature:
    def test_normalization(self):
        q = product_quadrature_2d(4, 8)
        assert np.sum(q.weights) == pytest.approx(FOUR_PI, rel=1e-12)

    def test_vector_symmetry(self):
        q = product_quadrature_2d(4, 8)
        np.testing.assert_allclose(q.weights @ q.directions, 0.0, atol=1e-12)

    def test_second_moment(self):
        q = product_quadrature_2d(4, 8)
        m = np.sum(q.weights * q.directions[:, 0] ** 2)
        assert m == pytest.approx(FOUR_PI / 3.0, abs=1e-10)

    def test_invalid_counts_rejected(self):
        with pytest.raises(ValueError):
            product_quadrature_2d(3, 8)
        with pytest.raises(ValueError):
            product_quadrature_2d(4, 6)


class TestSweep:
    def test_zero_source_zero_flux(self):
        prob = slab([RegionSpec((0.0,), (1.0,), 1.0, 0.0, 0.0)], 4)
        psi = sweep(np.array([0.0, 0.0, 0.6]), np.zeros(4), prob)
        assert np.all(psi == 0.0)

    def test_single_cell_balance(self):
        h, sigma, s, mu = 0.5, 2.0, 1.3, 0.7
        prob = slab([RegionSpec((0.0,), (h,), sigma, 0.0, 0.0)], 1)
        omega = np.array([math.sqrt(1 - mu**2), 0.0, mu])
        psi = sweep(omega, [s], prob)
        assert psi[0] == pytest.approx(s * h / (mu + sigma * h), rel=1e-12)

    def test_infinite_medium_limit(self):
        sigma, s = 0.5, 2.0
        prob = slab([RegionSpec((0.0,), (400.0,), sigma, 0.0, 0.0)], 400)
        for mu in (0.2, -0.9):
            omega = np.array([math.sqrt(1 - mu**2), 0.0, mu])
            psi = sweep(omega, np.full(400, s), prob)
            assert psi[200] == pytest.approx(s / sigma, rel=1e-6)

    def test_2d_single_cell_balance(self):
        hx, hy, sigma, s = 0.5, 0.25, 1.5, 2.0
        prob = ProblemSpec(Mesh.uniform_2d(0, hx, 1, 0, hy, 1),
                           [RegionSpec((0.0, 0.0), (hx, hy), sigma, 0.0, 0.0)])
        wx, wy = 0.6, -0.3
        wz = math.sqrt(1 - wx**2 - wy**2)
        psi = sweep(np.array([wx, wy, wz]), [s], prob)
        expected = s * hx * hy / (abs(wx) * hy + abs(wy) * hx + sigma * hx * hy)
        assert psi[0] == pytest.approx(expected, rel=1e-12)


class TestSourceIteration:
    def test_zero_source_short_circuits(self):
        prob = slab([RegionSpec((0.0,), (1.0,), 0.5, 0.5, 0.0)], 4)
        sol = source_iteration(np.zeros(4), prob)
        assert sol.iterations == 0
        assert np.all(sol.phi == 0.0)

    def test_pure_absorber_converges_in_one_sweep(self):
        prob = slab([RegionSpec((0.0,), (2.0,), 1.0, 0.0, 0.0)], 8)
        sol = source_iteration(np.full(8, 0.25), prob)
        assert sol.iterations == 1
        assert np.all(sol.phi > 0.0)

    def test_error_reduction_factor_matches_scattering_ratio(self):
        # thick homogeneous medium: the per-iteration contraction approaches
        # c = sigma_s / sigma_t
        c = 0.9
        prob = slab([RegionSpec((0.0,), (200.0,), 1 - c, c, 0.0)], 200)
        quad = gauss_legendre_quadrature(4)
        f = np.full(200, 1.0 / FOUR_PI)
        ref = source_iteration(f, prob, quad, tol=1e-12, max_iter=3000).phi
        phi = np.zeros(200)
        errs = []
        p = prob.packed()
        for _ in range(40):
            src = f + p.sig_s / FOUR_PI * phi
            phi = sum(quad.weights[m] * sweep(quad.directions[m], src, prob)
                      for m in range(len(quad)))
            errs.append(np.max(np.abs(phi - ref)))
        ratios = [errs[i + 1] / errs[i] for i in range(10, 30)]
        assert abs(float(np.mean(ratios)) - c) < 0.05

    def test_positivity(self):
        rng = np.random.default_rng(3)
        prob = slab([RegionSpec((0.0,), (4.0,), 0.3, 0.6, 0.0)], 16)
        for _ in range(5):
            sol = source_iteration(rng.random(16), prob)
            assert np.all(sol.phi >= 0.0)

    def test_scalar_flux_is_weighted_ordinate_sum(self):
        prob = slab([RegionSpec((0.0,), (3.0,), 0.4, 0.5, 0.0)], 12)
        sol = source_iteration(np.full(12, 0.1), prob, tol=1e-8)
        np.testing.assert_allclose(sol.phi, sol.quadrature.weights @ sol.psi,
                                   rtol=1e-12)

    def test_particle_balance_identity(self):
        prob = slab([RegionSpec((0.0,), (5.0,), 0.2, 0.8, 0.0)], 20)
        f = np.linspace(0.1, 0.5, 20)
        sol = source_iteration(f, prob, tol=1e-5)
        assert sol.balance_residual(prob, f) < 1e-8

    def test_2d_particle_balance(self):
        prob = ProblemSpec(Mesh.uniform_2d(0, 4, 8, 0, 4, 8),
                           [RegionSpec((0.0, 0.0), (4.0, 4.0), 0.3, 0.5, 0.0)])
        f = np.full(64, 0.2)
        sol = source_iteration(f, prob, product_quadrature_2d(4, 8), tol=1e-5)
        assert sol.balance_residual(prob, f) < 1e-8

    def test_nonconvergence_carries_last_iterate(self):
        prob = slab([RegionSpec((0.0,), (200.0,), 0.01, 0.99, 0.0)], 100)
        with pytest.raises(SnNonConvergence) as exc:
            source_iteration(np.full(100, 1.0), prob, tol=1e-12, max_iter=3)
        assert exc.value.solution.iterations == 3
        assert np.any(exc.value.solution.phi > 0)

    def test_bad_tolerance_rejected(self):
        prob = slab([RegionSpec((0.0,), (1.0,), 1.0, 0.0, 0.0)], 2)
        with pytest.raises(ValueError):
            source_iteration(np.ones(2), prob, tol=0.0)
