import io
import math

import numpy as np
from django.test import SimpleTestCase

from lyapcert.conf import default_config
from lyapcert.exceptions import IntegrationError
from lyapcert.simulate import (
    RK4, RKF45, IntegratorConfig, ball_initial_conditions, convergence_experiment, integrate,
    integrate_batch, write_trajectory_csv,
)
from lyapcert.serializers import load_system
from lyapcert.system_model import build_system

EXAMPLE_21 = ['-2*x1 + x2^2', 'x1^2 - 2*x2']

# certified radius of example-2.1 and the simulation radius of the global ones
CERTIFIED_RADII = {'example-2.1': 2.82, 'example-2.2': 5.0, 'hopfield-2': 5.0}


def builtin(name):
    return load_system({'kind': 'builtin', 'name': name}).system


class IntegratorTest(SimpleTestCase):
    """
    Tests for the fixed-step RK4 and adaptive RKF45 integrators.
    """

    def setUp(self):
        self.decay = build_system(1, ['-x1'])

    def test_rk4_exponential_decay(self):
        record = integrate(self.decay, [1.0], t_end=1.0, integrator=IntegratorConfig(RK4, dt=1e-3))
        self.assertAlmostEqual(record.terminal_state[0], math.exp(-1.0), delta=1e-8)
        self.assertEqual(record.times[-1], 1.0)
        self.assertEqual(len(record.times), 1001)
        self.assertFalse(record.diverged)

    def test_rkf45_exponential_decay(self):
        record = integrate(self.decay, [1.0], t_end=1.0, integrator=IntegratorConfig(RKF45, dt=1e-2))
        self.assertAlmostEqual(record.terminal_state[0], math.exp(-1.0), delta=1e-7)
        self.assertEqual(record.times[-1], 1.0)

    def test_rk4_is_fourth_order(self):
        errors = []
        for dt in (0.1, 0.05):
            record = integrate(self.decay, [1.0], t_end=1.0, integrator=IntegratorConfig(RK4, dt=dt))
            errors.append(abs(record.terminal_state[0] - math.exp(-1.0)))
        self.assertTrue(8 <= errors[0] / errors[1] <= 32)

    def test_last_step_lands_on_t_end(self):
        record = integrate(self.decay, [1.0], t_end=0.25, integrator=IntegratorConfig(RK4, dt=0.1))
        np.testing.assert_allclose(record.times, [0.0, 0.1, 0.2, 0.25])

    def test_methods_agree_on_example_21(self):
        system = build_system(2, EXAMPLE_21)
        fixed = integrate(system, [1.9, 1.9], t_end=5.0, integrator=IntegratorConfig(RK4, dt=1e-3))
        adaptive = integrate(system, [1.9, 1.9], t_end=5.0, integrator=IntegratorConfig(RKF45))
        np.testing.assert_allclose(fixed.terminal_state, adaptive.terminal_state, atol=1e-6)

    def test_methods_agree_on_every_builtin(self):
        starts = {
            'example-2.1': [[1.9, 1.9], [-2.0, 1.0], [0.5, -2.5]],
            'example-2.2': [[3.0, -2.0], [-8.0, 5.0], [0.1, 0.1]],
            'hopfield-2': [[2.0, -1.0], [-4.0, 3.0], [0.3, 0.0]],
        }
        for name, x0s in starts.items():
            with self.subTest(name=name):
                system = builtin(name)
                fixed = integrate_batch(system, x0s, t_end=10.0, integrator=IntegratorConfig(RK4, dt=1e-3))
                adaptive = integrate_batch(system, x0s, t_end=10.0, integrator=IntegratorConfig(RKF45))
                for first, second in zip(fixed, adaptive):
                    self.assertEqual(second.times[-1], 10.0)
                    np.testing.assert_allclose(first.terminal_state, second.terminal_state, atol=1e-6)

    def test_lyapunov_function_decreases_inside_certified_ball(self):
        system = build_system(2, EXAMPLE_21)
        record = integrate(system, [1.9, 1.9], t_end=10.0, integrator=IntegratorConfig(RK4, dt=1e-2))
        self.assertEqual(record.monotonicity_violations(), 0)
        np.testing.assert_allclose(record.v_values, 0.5 * np.sum(record.states ** 2, axis=-1))


class DivergenceTest(SimpleTestCase):
    """
    Tests for blow-up handling: diverging rows are frozen, never raised.
    """

    def test_finite_time_blow_up(self):
        system = build_system(1, ['x1^2'])
        record = integrate(system, [1.0], t_end=2.0, integrator=IntegratorConfig(RK4, dt=1e-3))
        self.assertTrue(record.diverged)
        self.assertLess(record.times[-1], 1.1)
        self.assertLessEqual(record.terminal_norm, 1e6)

    def test_batch_keeps_converging_rows(self):
        system = build_system(1, ['x1^2 - x1'])
        converging, diverging = integrate_batch(
            system, [[0.5], [2.0]], t_end=3.0, integrator=IntegratorConfig(RK4, dt=1e-3))
        self.assertFalse(converging.diverged)
        self.assertEqual(converging.times[-1], 3.0)
        self.assertTrue(diverging.diverged)
        self.assertLess(len(diverging.times), len(converging.times))

    def test_rkf45_blow_up(self):
        system = build_system(1, ['x1^2'])
        record = integrate(system, [1.0], t_end=2.0, integrator=IntegratorConfig(RKF45))
        self.assertTrue(record.diverged)

    def test_invalid_arguments(self):
        system = build_system(1, ['-x1'])
        with self.assertRaises(IntegrationError):
            integrate(system, [1.0], t_end=0.0)
        with self.assertRaises(IntegrationError):
            integrate_batch(system, [[1.0, 2.0]], t_end=1.0)
        with self.assertRaises(IntegrationError):
            integrate(system, [math.nan], t_end=1.0)


class ConvergenceExperimentTest(SimpleTestCase):
    """
    Tests for seeded convergence experiments.
    """

    def setUp(self):
        self.config = default_config().replace(dt=1e-2)

    def test_radius_zero_converges_trivially(self):
        summary = convergence_experiment(build_system(2, EXAMPLE_21), 0.0, count=5, t_end=1.0, config=self.config)
        self.assertEqual(summary.converged, 5)
        self.assertEqual(summary.max_terminal_norm, 0.0)
        self.assertEqual(summary.fraction_converged, 1.0)

    def test_certified_ball_of_example_21(self):
        summary = convergence_experiment(
            build_system(2, EXAMPLE_21), 2.8, count=10, t_end=20.0, seed=4, config=self.config)
        self.assertEqual(summary.count, 10)
        self.assertEqual(summary.converged, 10)
        self.assertEqual(summary.diverged, 0)
        self.assertEqual(summary.monotonicity_violations, 0)
        self.assertEqual(summary.seed, 4)

    def test_hundred_starts_in_each_certified_region(self):
        config = default_config()
        for name, radius in CERTIFIED_RADII.items():
            with self.subTest(name=name):
                summary = convergence_experiment(builtin(name), radius, count=100, t_end=20.0, seed=0, config=config)
                self.assertEqual(summary.converged, 100)
                self.assertLessEqual(summary.max_terminal_norm, 1e-6)
                self.assertEqual(summary.monotonicity_violations, 0)

    def test_starts_outside_the_basin_diverge(self):
        system = build_system(1, ['x1^2 - x1'])
        summary = convergence_experiment(system, 5.0, count=20, t_end=5.0, seed=1, config=self.config)
        self.assertGreater(summary.diverged, 0)
        self.assertLess(summary.converged, 20)

    def test_initial_conditions_are_seeded_and_inside_the_ball(self):
        first = ball_initial_conditions(3, 2.0, 50, seed=9)
        np.testing.assert_array_equal(first, ball_initial_conditions(3, 2.0, 50, seed=9))
        self.assertTrue(np.all(np.linalg.norm(first, axis=-1) <= 2.0))
        self.assertFalse(np.array_equal(first, ball_initial_conditions(3, 2.0, 50, seed=10)))

    def test_count_must_be_positive(self):
        with self.assertRaises(IntegrationError):
            convergence_experiment(build_system(1, ['-x1']), 1.0, count=0, config=self.config)


class TrajectoryCsvTest(SimpleTestCase):

    def test_columns(self):
        record = integrate(build_system(2, EXAMPLE_21), [1.0, 0.5], t_end=0.1,
                           integrator=IntegratorConfig(RK4, dt=0.05))
        stream = io.StringIO()
        write_trajectory_csv(stream, record)
        lines = stream.getvalue().splitlines()
        self.assertEqual(lines[0], 't,x1,x2,V')
        self.assertEqual(len(lines), 1 + len(record.times))
        self.assertEqual([float(value) for value in lines[1].split(',')], [0.0, 1.0, 0.5, 0.625])
