import math

import numpy as np
from django.test import SimpleTestCase

from simulation.boundary import make_family
from simulation.exceptions import ConfigurationError, EnvelopeError
from simulation.random_streams import StreamFactory
from simulation.repulsion import (
    OUTSIDE_RANGE_TAG,
    Verdict,
    WFunction,
    WKind,
    envelope_boundary_gamma,
    envelope_criterion,
    envelope_integral,
    mc_repulsion_check,
)


class WFunctionTests(SimpleTestCase):

    def test_values(self):
        self.assertAlmostEqual(WFunction(WKind.POWER, 0.5).w(100.0), 10.0)
        self.assertAlmostEqual(WFunction(WKind.LOG_POWER, 1.0).w(math.e ** 3), 3.0)
        self.assertAlmostEqual(WFunction(WKind.EXP_LOG_POWER, 0.5).w(math.e ** 4), math.e ** 2)
        self.assertEqual(WFunction(WKind.CONSTANT, 1.0).w(50.0), 1.0)

    def test_membership(self):
        grid = np.geomspace(math.log(1e2), 1e3, 8)
        WFunction(WKind.LOG_POWER, 1.0).check_membership(grid)
        with self.assertRaises(EnvelopeError):
            WFunction(WKind.CONSTANT, 5.0).check_membership(grid)
        with self.assertRaises(EnvelopeError):
            WFunction(WKind.POWER, -0.1).check_membership(grid)
        with self.assertRaises(EnvelopeError):
            # ln ln h < 0 for h < e
            WFunction(WKind.LOG_POWER, 1.0).check_membership([0.5, 2.0])


class ClosedFormTests(SimpleTestCase):

    def test_rule(self):
        boundary_family = WFunction(WKind.EXP_LOG_POWER, 0.9)
        self.assertEqual(envelope_boundary_gamma(0.9, boundary_family)['verdict'], Verdict.NOT_IN_ENVELOPE)
        self.assertEqual(
            envelope_boundary_gamma(0.9, WFunction(WKind.EXP_LOG_POWER, 0.5))['verdict'], Verdict.IN_ENVELOPE
        )
        self.assertEqual(envelope_boundary_gamma(1.0, WFunction(WKind.POWER, 0.1))['verdict'], Verdict.NOT_IN_ENVELOPE)
        self.assertEqual(envelope_boundary_gamma(1.0, WFunction(WKind.LOG_POWER, 1.0))['verdict'], Verdict.IN_ENVELOPE)

    def test_outside_analyzed_range(self):
        self.assertEqual(
            envelope_boundary_gamma(0.5, WFunction(WKind.LOG_POWER, 1.0))['verdict'], Verdict.INCONCLUSIVE
        )


class EnvelopeCriterionTests(SimpleTestCase):

    def test_builtin_pairs_agree(self):
        scales = (
            WFunction(WKind.EXP_LOG_POWER, 0.5),
            WFunction(WKind.LOG_POWER, 1.0),
            WFunction(WKind.POWER, 0.1),
        )
        for gamma in (0.9, 1.0):
            boundary = make_family('sqrt_log', gamma, f0=0.5)
            for w in scales:
                with self.subTest(gamma=gamma, w=w.describe()):
                    result = envelope_criterion(boundary, w)
                    self.assertNotEqual(result.verdict, Verdict.INCONCLUSIVE)
                    self.assertTrue(result.agrees)
                    self.assertTrue(np.all(result.values >= 0))

    def test_power_scale_limit(self):
        # f(t) = sqrt(t)/ln t, w = h^a: J_w → ½ ln(1 + a/2)
        boundary = make_family('sqrt_log', 1.0, f0=0.5)
        result = envelope_criterion(boundary, WFunction(WKind.POWER, 0.1))
        expected = 0.5 * math.log(1.05)
        self.assertLess(abs(result.limit - expected) / expected, 0.05)

    def test_larger_scale_dominates(self):
        boundary = make_family('sqrt_log', 1.0, f0=0.5)
        for log_h in (1e2, 1e4):
            small = envelope_integral(boundary, WFunction(WKind.LOG_POWER, 1.0), log_h)
            large = envelope_integral(boundary, WFunction(WKind.POWER, 0.1), log_h)
            self.assertLessEqual(small, large)

    def test_tag_below_analyzed_range(self):
        boundary = make_family('sqrt_log', 0.8, f0=0.5)
        result = envelope_criterion(boundary, WFunction(WKind.LOG_POWER, 1.0), np.geomspace(1e2, 1e4, 5))
        self.assertIn(OUTSIDE_RANGE_TAG, result.tags)
        self.assertIsNone(result.agrees)

    def test_grid_validated(self):
        boundary = make_family('sqrt_log', 1.0, f0=0.5)
        with self.assertRaises(ConfigurationError):
            envelope_criterion(boundary, WFunction(WKind.LOG_POWER, 1.0), [1e3, 1e2])


class RepulsionCheckTests(SimpleTestCase):

    def test_unit_scale_is_sure(self):
        boundary = make_family('sqrt_log', 1.0, f0=0.5)
        estimate = mc_repulsion_check(
            boundary, WFunction(WKind.CONSTANT, 1.0), 1.0, 2000,
            StreamFactory(seed=6, stream='repulsion'), t_prelimit=3.0,
        )
        self.assertEqual(estimate.probability, 1.0)
        self.assertGreater(estimate.survivors, 0)

    def test_transient_rejected(self):
        boundary = make_family('sqrt_log', 1.5, f0=0.5)
        with self.assertRaises(ConfigurationError):
            mc_repulsion_check(
                boundary, WFunction(WKind.POWER, 0.1), 1.0, 2000, StreamFactory(seed=6, stream='repulsion')
            )
