import math

import numpy as np
from django.test import SimpleTestCase

from simulation.boundary import make_family
from simulation.exceptions import ConfigurationError
from simulation.random_streams import StreamFactory
from simulation.renewal_ode import (
    exponent_integral,
    exponent_integral_limit,
    estimate_residual,
    predict_phi,
    solve_renewal,
)
from simulation.stable_subordinator import K
from simulation.survival_mc import build_survival_curve


class ExponentIntegralTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        # g(s) = s^4 above the floor
        cls.power = make_family('power', 0.25, f0=0.5)
        cls.recurrent = make_family('sqrt_log', 1.0, f0=0.5)

    def test_power_closed_form(self):
        self.assertAlmostEqual(exponent_integral(self.power, 1.0, 10.0), 2 * K * 0.9, places=8)

    def test_additive(self):
        for boundary in (self.power, self.recurrent):
            whole = exponent_integral(boundary, 1.0, 50.0)
            split = exponent_integral(boundary, 1.0, 7.0) + exponent_integral(boundary, 7.0, 50.0)
            self.assertAlmostEqual(whole, split, places=8)

    def test_limit(self):
        self.assertAlmostEqual(exponent_integral_limit(self.power, 1.0), 2 * K, places=6)
        self.assertEqual(exponent_integral_limit(self.recurrent, 1.0), math.inf)

    def test_base_point_below_floor(self):
        with self.assertRaises(ConfigurationError):
            exponent_integral(self.power, 0.1, 2.0)


class SolveRenewalTests(SimpleTestCase):

    def setUp(self):
        self.boundary = make_family('power', 0.25, f0=0.5)

    def test_base_value_preserved(self):
        solution = solve_renewal(self.boundary, 1.0, 0.7, [2.0, 5.0])
        self.assertEqual(solution.t_grid[0], 1.0)
        self.assertEqual(solution.phi_solution[0], 0.7)
        self.assertAlmostEqual(solution.value_at(2.0), 0.7 * math.exp(K), places=8)
        self.assertTrue(np.all(np.diff(solution.phi_solution) > 0))

    def test_constant_residual(self):
        plain = solve_renewal(self.boundary, 1.0, 1.0, [2.0, 4.0])
        shifted = solve_renewal(self.boundary, 1.0, 1.0, [2.0, 4.0], rho=([1.0, 4.0], [0.1, 0.1]))
        np.testing.assert_allclose(shifted.rho_integral, [0.0, 0.1, 0.3], atol=1e-12)
        np.testing.assert_allclose(shifted.phi_solution / plain.phi_solution, np.exp([0.0, 0.1, 0.3]))

    def test_rejects_bad_inputs(self):
        with self.assertRaises(ConfigurationError):
            solve_renewal(self.boundary, 0.5, 1.0, [2.0])
        with self.assertRaises(ConfigurationError):
            solve_renewal(self.boundary, 1.0, 0.0, [2.0])
        with self.assertRaises(ConfigurationError):
            solve_renewal(self.boundary, 1.0, 1.0, [3.0, 2.0])

    def test_value_outside_range(self):
        solution = solve_renewal(self.boundary, 1.0, 1.0, [2.0])
        with self.assertRaises(ConfigurationError):
            solution.value_at(3.0)


class PredictionTests(SimpleTestCase):

    def test_transient_plateau(self):
        boundary = make_family('power', 0.25, f0=0.5)
        solution = solve_renewal(boundary, 1.0, 1.0, [2.0, 5.0])
        prediction = predict_phi(boundary, solution, 2.0)
        self.assertAlmostEqual(prediction.value, 2 * K * math.exp(K) / 4.0, places=8)
        self.assertAlmostEqual(prediction.plateau, 2 * K * math.exp(2 * K) / 4.0, places=5)
        self.assertGreater(prediction.plateau, prediction.value)

    def test_recurrent_has_no_plateau(self):
        boundary = make_family('sqrt_log', 1.0, f0=0.5)
        solution = solve_renewal(boundary, 1.0, 1.0, [3.0])
        self.assertIsNone(predict_phi(boundary, solution, 3.0).plateau)


class AsymptoticTrendTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.t0 = 2.0
        cls.transient = make_family('sqrt_log', 1.5, f0=0.5)
        cls.transient_curve = build_survival_curve(
            cls.transient, [cls.t0, 5.0, 10.0], 20000, StreamFactory(seed=41, stream='trend')
        )
        cls.recurrent = make_family('sqrt_log', 1.0, f0=0.5)
        cls.recurrent_curve = build_survival_curve(
            cls.recurrent, [cls.t0, 5.0, 20.0], 20000, StreamFactory(seed=42, stream='trend')
        )

    def mc_ratio(self, index):
        estimate = self.transient_curve.estimates[index]
        root_g = math.sqrt(float(self.transient.g(estimate.t)))
        return estimate.point * root_g / (2 * K * float(self.transient_curve.phi_integral[index]))

    def test_transient_prediction_tracks_monte_carlo(self):
        phi0 = float(self.transient_curve.phi_integral[0])
        solution = solve_renewal(self.transient, self.t0, phi0, [5.0, 10.0])
        for estimate in self.transient_curve.estimates[1:]:
            with self.subTest(t=estimate.t):
                prediction = predict_phi(self.transient, solution, estimate.t)
                self.assertLess(abs(prediction.value / estimate.point - 1.0), 0.25)
                self.assertGreater(prediction.plateau, prediction.value)

    def test_transient_ratio_approaches_one(self):
        last = self.mc_ratio(-1)
        self.assertGreaterEqual(last, 0.75)
        self.assertLessEqual(last, 1.25)
        self.assertLessEqual(abs(last - 1.0), abs(self.mc_ratio(0) - 1.0) + 0.05)

    def test_recurrent_log_growth(self):
        log_phi0 = math.log(float(self.recurrent_curve.phi_integral[0]))
        for index in (1, 2):
            t = self.recurrent_curve.estimates[index].t
            with self.subTest(t=t):
                growth = exponent_integral(self.recurrent, self.t0, t)
                observed = math.log(float(self.recurrent_curve.phi_integral[index])) - log_phi0
                self.assertLessEqual(abs(observed - growth) / growth, 0.35)


class ResidualTests(SimpleTestCase):

    def test_identity_holds(self):
        boundary = make_family('sqrt_log', 1.5, f0=0.5)
        streams = StreamFactory(seed=31, stream='residual')
        for t in (2.0, 5.0, 10.0):
            with self.subTest(t=t):
                diagnostic = estimate_residual(boundary, t, 40000, streams.child(f't{t:g}'))
                tolerance = 3 * diagnostic.identity_se + diagnostic.identity_band
                self.assertLess(abs(diagnostic.identity_gap), tolerance)
                self.assertEqual(diagnostic.n_paths, 40000)

    def test_rate(self):
        boundary = make_family('sqrt_log', 1.5, f0=0.5)
        diagnostic = estimate_residual(boundary, 2.0, 2000, StreamFactory(seed=32, stream='residual'))
        self.assertAlmostEqual(diagnostic.rate, 2 * K / math.sqrt(max(float(boundary.g(2.0)), 1.0)))

    def test_horizon_below_floor(self):
        boundary = make_family('sqrt_log', 1.5, f0=0.5)
        with self.assertRaises(ConfigurationError):
            estimate_residual(boundary, 0.25, 1000, StreamFactory(seed=1, stream='residual'))
