import math

import numpy as np
from django.test import SimpleTestCase

from lyapcert.exceptions import QuadratureError
from lyapcert.hopfield import tanh_activation
from lyapcert.ray_integral import decoupled_row, ray_field, ray_matrix
from lyapcert.sampling import sampling_plan
from lyapcert.serializers import load_system
from lyapcert.system_model import build_system

EXAMPLE_21 = ['-2*x1 + x2^2', 'x1^2 - 2*x2']
EXAMPLE_22 = ['-4*x1 + x1*sech(x1) + 4*x2', '-x1 - 6*x2 - x2*cos(x2)']


def builtin(name):
    return load_system({'kind': 'builtin', 'name': name}).system


def random_points(n, radius, count, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-radius, radius, size=(count, n))


class RayMatrixTest(SimpleTestCase):
    """
    Tests for D(x) on the worked examples.
    """

    def test_example_21_at_0_3(self):
        system = build_system(2, EXAMPLE_21)
        ray = ray_matrix(system, [0.0, 3.0])
        np.testing.assert_allclose(ray.entries, [[-2.0, 3.0], [0.0, -2.0]], atol=1e-12)

    def test_example_21_factored_form(self):
        system = build_system(2, EXAMPLE_21)
        x = np.array([1.3, -0.4])
        ray = ray_matrix(system, x)
        np.testing.assert_allclose(ray.entries, [[-2.0, x[1]], [x[0], -2.0]], atol=1e-12)

    def test_example_22_diagonal_entry(self):
        system = build_system(2, EXAMPLE_22)
        ray = ray_matrix(system, [1.0, 0.0])
        self.assertAlmostEqual(ray.entries[0, 0], -4.0 + 1.0 / math.cosh(1.0), places=10)
        self.assertAlmostEqual(ray.entries[0, 0], -3.35699, places=5)

    def test_example_22_factored_form(self):
        system = build_system(2, EXAMPLE_22)
        x1, x2 = 2.5, -1.7
        ray = ray_matrix(system, [x1, x2])
        expected = [[-4.0 + 1.0 / math.cosh(x1), 4.0], [-1.0, -6.0 - math.cos(x2)]]
        np.testing.assert_allclose(ray.entries, expected, atol=1e-9)

    def test_linear_field_gives_coefficient_matrix(self):
        system = build_system(2, ['-x1 + 2*x2', '3*x1 - 5*x2'])
        ray = ray_matrix(system, [7.0, -4.0])
        np.testing.assert_allclose(ray.entries, [[-1.0, 2.0], [3.0, -5.0]], atol=1e-12)

    def test_origin_uses_jacobian(self):
        system = build_system(2, EXAMPLE_22)
        ray = ray_matrix(system, [0.0, 0.0])
        np.testing.assert_array_equal(ray.entries, system.jacobian_stack(np.zeros(2)))
        self.assertEqual(ray.est_error, 0.0)

    def test_depth_limit_raises(self):
        system = build_system(2, EXAMPLE_22)
        with self.assertRaises(QuadratureError):
            ray_matrix(system, [60.0, 45.0], max_depth=1)

    def test_non_positive_tolerance_is_rejected(self):
        system = build_system(1, ['-x1'])
        with self.assertRaises(QuadratureError):
            ray_matrix(system, [1.0], tol=0.0)


class DecoupledRowTest(SimpleTestCase):
    """
    Tests for the split of g_i into its diagonal and coupling parts.
    """

    def test_linear_decay(self):
        system = build_system(1, ['-x1'])
        ray = ray_matrix(system, [2.5])
        self.assertEqual(decoupled_row(ray, [2.5], 1), (-2.5, 0.0))

    def test_parts_sum_to_component(self):
        system = build_system(2, EXAMPLE_22)
        x = np.array([0.8, 2.0])
        ray = ray_matrix(system, x)
        g = system.evaluate(x)
        for i in (1, 2):
            diag_term, offdiag_sum = decoupled_row(ray, x, i)
            self.assertAlmostEqual(diag_term + offdiag_sum, g[i - 1], places=9)

    def test_row_index_is_one_based(self):
        system = build_system(1, ['-x1'])
        ray = ray_matrix(system, [1.0])
        with self.assertRaises(IndexError):
            decoupled_row(ray, [1.0], 0)


class RayFieldPropertyTest(SimpleTestCase):
    """
    Property checks over seeded random points.
    """

    def test_reconstruction_identity_on_builtins(self):
        for name, radius in (('example-2.1', 4.0), ('example-2.2', 20.0), ('hopfield-2', 5.0)):
            with self.subTest(name=name):
                system = builtin(name)
                points = random_points(2, radius, 1000, seed=11)
                rays = ray_field(system, points)
                g = system.evaluate(points)
                residual = np.linalg.norm(np.einsum('kij,kj->ki', rays.entries, points) - g, axis=-1)
                bound = 1e-8 * (1 + np.linalg.norm(g, axis=-1))
                self.assertEqual(int(np.count_nonzero(residual > bound)), 0)
                np.testing.assert_allclose(rays.est_error, residual, atol=1e-15)

    def test_single_panel_is_exact_for_polynomials(self):
        system = build_system(2, ['-x1 + x1^3*x2^2 - x2^7', 'x1^4*x2 - 3*x2 + x1^2*x2^5'])
        nodes, weights = np.polynomial.legendre.leggauss(4)
        s = 0.5 * (nodes + 1.0)
        for x in random_points(2, 1.5, 20, seed=3):
            single = 0.5 * sum(w * system.jacobian_stack(t * x) for w, t in zip(weights, s))
            adaptive = ray_matrix(system, x).entries
            np.testing.assert_allclose(single, adaptive, rtol=0, atol=1e-13 * max(1.0, np.abs(adaptive).max()))

    def test_hopfield_closed_form(self):
        system = builtin('hopfield-2')
        axis = np.linspace(-5.0, 5.0, 41)
        grid = np.array([[a, b] for a in axis for b in axis])
        rays = ray_field(system, grid)
        tau = tanh_activation(3.0).tau
        np.testing.assert_allclose(rays.entries[:, 0, 0], -10.0 - 3.0 - tau(grid[:, 0]), atol=1e-9)
        np.testing.assert_allclose(rays.entries[:, 1, 1], -10.0 - 1.0 + tau(grid[:, 1]) / 5, atol=1e-9)
        np.testing.assert_allclose(rays.entries[:, 0, 1], 1.0, atol=1e-12)
        np.testing.assert_allclose(rays.entries[:, 1, 0], 1.0, atol=1e-12)

    def test_plan_points_are_chunked_consistently(self):
        system = build_system(2, EXAMPLE_22)
        points = sampling_plan(2, 3.0).points[:300]
        whole = ray_field(system, points)
        chunked = ray_field(system, points, chunk_size=64)
        np.testing.assert_allclose(whole.entries, chunked.entries, atol=1e-10)
