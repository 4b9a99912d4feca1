import math

from django.test import SimpleTestCase

from simulation.exceptions import QuadratureError
from simulation.quadrature import (
    integrate_chunked,
    integrate_log_log_to_infinity,
    integrate_log_space,
    quad_checked,
)


class QuadCheckedTests(SimpleTestCase):

    def test_polynomial(self):
        value, error = quad_checked(lambda x: x * x, 0.0, 1.0)
        self.assertAlmostEqual(value, 1.0 / 3.0, places=12)
        self.assertLess(error, 1e-10)

    def test_empty_interval(self):
        self.assertEqual(quad_checked(math.exp, 2.0, 2.0), (0.0, 0.0))

    def test_non_finite_result(self):
        with self.assertRaises(QuadratureError):
            quad_checked(lambda x: math.nan, 0.0, 1.0, what='nan integrand')


class LogSpaceTests(SimpleTestCase):

    def test_log_space(self):
        # ∫_1^e ds in u = ln s
        self.assertAlmostEqual(integrate_log_space(lambda u: u, 0.0, 1.0), math.e - 1.0, places=10)

    def test_chunks_cover_long_ranges(self):
        self.assertAlmostEqual(integrate_chunked(lambda u: 1.0, 0.0, 30.0), 30.0, places=10)
        self.assertEqual(integrate_chunked(lambda u: 1.0, 5.0, 5.0), 0.0)

    def test_convergent_tail(self):
        # ∫_1^∞ u^{-2} du = 1
        value = integrate_log_log_to_infinity(lambda u: -2.0 * math.log(u), 1.0)
        self.assertAlmostEqual(value, 1.0, places=6)

    def test_divergent_tail(self):
        value = integrate_log_log_to_infinity(lambda u: -math.log(u), 1.0)
        self.assertEqual(value, math.inf)

    def test_lower_limit_must_be_positive(self):
        with self.assertRaises(ValueError):
            integrate_log_log_to_infinity(lambda u: 0.0, 0.0)
