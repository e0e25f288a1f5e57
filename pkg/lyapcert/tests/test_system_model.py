import attrs
import numpy as np
from django.test import SimpleTestCase

from lyapcert.corpus import BUILTIN_NAMES
from lyapcert.exceptions import (
    DimensionError, NotAnEquilibriumError, SystemDefinitionError, ZeroSolutionError,
)
from lyapcert.serializers import load_system
from lyapcert.system_model import (
    UNBOUNDED, build_system, finite_difference, jacobian, translate_equilibrium,
)

EXAMPLE_21 = ['-2*x1 + x2^2', 'x1^2 - 2*x2']
EXAMPLE_22 = ['-4*x1 + x1*sech(x1) + 4*x2', '-x1 - 6*x2 - x2*cos(x2)']


class BuildSystemTest(SimpleTestCase):
    """
    Tests for system construction and the zero-solution check.
    """

    def test_builds_validated_system(self):
        system = build_system(2, EXAMPLE_21, ball_radius=4.0, label='ex21')
        self.assertEqual(system.n, 2)
        self.assertEqual(system.ball_radius, 4.0)
        self.assertFalse(system.unbounded)
        np.testing.assert_array_equal(system.evaluate([0.0, 0.0]), [0.0, 0.0])

    def test_unbounded_ball(self):
        system = build_system(2, EXAMPLE_22, ball_radius='unbounded')
        self.assertTrue(system.unbounded)
        self.assertEqual(system.ball_radius, UNBOUNDED)
        self.assertEqual(system.describe()['ball_radius'], 'unbounded')

    def test_nonzero_at_origin_is_rejected(self):
        with self.assertRaises(ZeroSolutionError):
            build_system(1, ['x1 + 1'])

    def test_component_count_must_match(self):
        with self.assertRaises(SystemDefinitionError):
            build_system(2, ['-x1'])

    def test_ball_radius_must_be_positive(self):
        with self.assertRaises(SystemDefinitionError):
            build_system(1, ['-x1'], ball_radius=0.0)

    def test_point_dimension_is_checked(self):
        system = build_system(2, EXAMPLE_21)
        with self.assertRaises(DimensionError):
            system.evaluate([1.0, 2.0, 3.0])


class JacobianTest(SimpleTestCase):
    """
    Tests for exact and finite-difference Jacobians.
    """

    def test_dual_jacobian_of_example_21(self):
        system = build_system(2, EXAMPLE_21)
        result = jacobian(system, [1.0, 3.0])
        np.testing.assert_allclose(result.entries, [[-2.0, 6.0], [2.0, -2.0]])

    def test_jacobian_at_origin_of_example_22(self):
        system = build_system(2, EXAMPLE_22)
        np.testing.assert_allclose(jacobian(system, [0.0, 0.0]).entries, [[-3.0, 4.0], [-1.0, -7.0]])

    def test_finite_difference_agrees_with_dual(self):
        exact = build_system(2, EXAMPLE_22)
        approximate = build_system(2, EXAMPLE_22, jacobian_mode=finite_difference())
        points = np.array([[0.5, -1.0], [3.0, 2.0], [-10.0, 7.5]])
        np.testing.assert_allclose(
            approximate.jacobian_stack(points), exact.jacobian_stack(points), atol=1e-6)

    def test_finite_difference_agrees_with_dual_on_every_builtin(self):
        rng = np.random.default_rng(31)
        for name in BUILTIN_NAMES:
            with self.subTest(name=name):
                exact = load_system({'kind': 'builtin', 'name': name}).system
                approximate = attrs.evolve(exact, jacobian_mode=finite_difference())
                radius = 10.0 if exact.unbounded else exact.ball_radius
                directions = rng.normal(size=(1000, 2))
                directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
                points = directions * radius * np.sqrt(rng.uniform(size=(1000, 1)))
                expected = exact.jacobian_stack(points)
                np.testing.assert_allclose(
                    approximate.jacobian_stack(points), expected, rtol=1e-5, atol=1e-5)

    def test_stacked_jacobians_have_matrix_shape(self):
        system = build_system(2, EXAMPLE_21)
        self.assertEqual(system.jacobian_stack(np.zeros((5, 2))).shape, (5, 2, 2))


class TranslateEquilibriumTest(SimpleTestCase):
    """
    Tests for moving a nonzero equilibrium to the origin.
    """

    def test_second_equilibrium_of_example_21(self):
        system = build_system(2, EXAMPLE_21)
        shifted = translate_equilibrium(system, [2.0, 2.0])
        np.testing.assert_array_equal(shifted.evaluate([0.0, 0.0]), [0.0, 0.0])
        # linearisation at (2, 2): [[-2, 4], [4, -2]]
        np.testing.assert_allclose(jacobian(shifted, [0.0, 0.0]).entries, [[-2.0, 4.0], [4.0, -2.0]])
        self.assertIn('shifted', shifted.label)

    def test_non_equilibrium_is_rejected(self):
        system = build_system(2, EXAMPLE_21)
        with self.assertRaises(NotAnEquilibriumError):
            translate_equilibrium(system, [1.0, 1.0])

    def test_zero_shift_is_identity(self):
        system = build_system(1, ['-x1'])
        self.assertIs(translate_equilibrium(system, [0.0]), system)

    def test_build_with_equilibrium(self):
        system = build_system(1, ['x1 - x1^2'], equilibrium=[1.0])
        self.assertAlmostEqual(system.evaluate([0.5])[0], -0.75)
