import math

import numpy as np
from django.test import SimpleTestCase

from simulation.boundary import make_family
from simulation.exceptions import ConfigurationError
from simulation.limit_process import (
    balance_time,
    clock_distribution,
    estimate_q_marginal,
    excursion_max_cdf,
    finiteness_integral,
    q_dominant_factor,
    sample_bessel3,
    sample_clock,
    sample_conditioned_skeleton,
    sample_normalized_excursion,
    sample_transient_paths,
)
from simulation.random_streams import StreamFactory
from simulation.survival_mc import build_survival_curve


class ExcursionTests(SimpleTestCase):

    def test_max_cdf_median(self):
        self.assertLess(excursion_max_cdf(1.2), 0.5)
        self.assertGreater(excursion_max_cdf(1.25), 0.5)
        self.assertEqual(excursion_max_cdf(0.0), 0.0)
        self.assertAlmostEqual(excursion_max_cdf(5.0), 1.0)

    def test_vervaat_sample_maximum(self):
        rng = np.random.Generator(np.random.Philox(8))
        maxima = [sample_normalized_excursion(1001, rng)[1].max() for _ in range(2000)]
        self.assertLess(abs(np.median(maxima) - 1.22), 0.06)

    def test_excursion_shape(self):
        rng = np.random.Generator(np.random.Philox(9))
        times, values = sample_normalized_excursion(257, rng)
        self.assertEqual(times[-1], 1.0)
        self.assertEqual(values[0], 0.0)
        self.assertEqual(values[-1], 0.0)
        self.assertTrue(np.all(values >= 0))
        with self.assertRaises(ConfigurationError):
            sample_normalized_excursion(2, rng)


class BesselTests(SimpleTestCase):

    def test_starts_at_zero_and_stays_positive(self):
        rng = np.random.Generator(np.random.Philox(10))
        times, values = sample_bessel3(1.0, 0.01, rng, size=4000)
        self.assertEqual(values.shape, (4000, times.size))
        self.assertTrue(np.all(values[:, 0] == 0))
        self.assertTrue(np.all(values[:, 1:] > 0))
        # E R_t² = 3t
        self.assertLess(abs(np.mean(values[:, -1] ** 2) - 3.0), 0.2)

    def test_rejects_bad_step(self):
        with self.assertRaises(ConfigurationError):
            sample_bessel3(1.0, 0.0, np.random.Generator(np.random.Philox(1)))


class ClockTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        # g(s) = s^10, so Φ beyond s = 8 is negligible
        cls.boundary = make_family('power', 0.1, f0=0.5)
        cls.streams = StreamFactory(seed=17, stream='clock')
        cls.curve = build_survival_curve(
            cls.boundary, [2.0, 8.0], 20000, cls.streams, grid_points=64, rare_event_policy=False
        )

    def test_limit_clock(self):
        clock = clock_distribution(self.boundary, self.curve)
        self.assertTrue(clock.is_limit)
        self.assertEqual(clock.cdf[-1], 1.0)
        self.assertLess(clock.tail_fraction, 1e-4)
        self.assertTrue(np.all(np.diff(clock.cdf) >= 0))
        # φ = 1 below the floor
        self.assertAlmostEqual(float(np.interp(0.5, clock.grid, clock.cdf)), 0.5 / clock.total)

    def test_finite_horizon(self):
        clock = clock_distribution(self.boundary, self.curve, horizon=2.0)
        self.assertFalse(clock.is_limit)
        self.assertEqual(clock.grid[-1], 2.0)
        self.assertEqual(clock.tail_probability(2.0), 0.0)
        with self.assertRaises(ConfigurationError):
            clock_distribution(self.boundary, self.curve, horizon=9.0)

    def test_recurrent_limit_clock_rejected(self):
        recurrent = make_family('sqrt_log', 1.0, f0=0.5)
        with self.assertRaises(ConfigurationError):
            clock_distribution(recurrent, self.curve)

    def test_sampled_mean(self):
        clock = clock_distribution(self.boundary, self.curve)
        draws = sample_clock(clock, np.random.Generator(np.random.Philox(3)), size=20000)
        self.assertTrue(np.all((draws >= 0) & (draws <= 8.0)))
        self.assertLess(abs(draws.mean() - clock.mean()), 4 * draws.std() / math.sqrt(draws.size))

    def test_skeleton_satisfies_lower_bracket(self):
        rng = np.random.Generator(np.random.Philox(21))
        path, attempts = sample_conditioned_skeleton(self.boundary, 1.5, None, rng)
        self.assertGreaterEqual(attempts, 1)
        self.assertTrue(np.all(path.values[:-1] > self.boundary.g(path.grid[1:])))

    def test_transient_paths(self):
        clock = clock_distribution(self.boundary, self.curve, horizon=2.0)
        samples = sample_transient_paths(
            self.boundary, clock, 3, StreamFactory(seed=4, stream='paths'),
            dt=0.05, tail_duration=1.0,
        )
        self.assertEqual(len(samples), 3)
        for sample in samples:
            self.assertTrue(sample.constraint_satisfied(self.boundary))
            self.assertTrue(np.all(sample.bessel_values[1:] > 0))
            self.assertLessEqual(sample.clock, 2.0)
            frame = sample.as_frame()
            self.assertIn('bessel_tail', set(frame['segment']))
            series = sample.as_series()
            self.assertTrue(series.index.is_monotonic_increasing)
            self.assertTrue(series.index.is_unique)
            self.assertEqual(series.loc[sample.skeleton.values].abs().max(), 0.0)
            self.assertAlmostEqual(series.index[-1], sample.explosion_time + 1.0)


class QMarginalTests(SimpleTestCase):

    def test_recurrent_marginal(self):
        boundary = make_family('sqrt_log', 1.0, f0=0.5)
        g_h = float(boundary.g(1.0))
        estimate = estimate_q_marginal(
            boundary, 1.0, np.geomspace(g_h, 100.0 * g_h, 9), 4000, StreamFactory(seed=12, stream='q'),
            t_prelimit=4.0, max_doublings=0,
        )
        q_hat = estimate.q_hat[np.isfinite(estimate.q_hat)]
        self.assertTrue(np.all(np.diff(q_hat) >= -1e-12))
        total = estimate.mass_below + estimate.mass.sum() + estimate.mass_above
        self.assertAlmostEqual(total, 1.0, places=9)
        self.assertEqual(estimate.tv_history, [])
        self.assertEqual(len(estimate.to_frame()), 8)

    def test_transient_rejected(self):
        boundary = make_family('sqrt_log', 1.5, f0=0.5)
        with self.assertRaises(ConfigurationError):
            estimate_q_marginal(boundary, 1.0, None, 4000, StreamFactory(seed=1, stream='q'))

    def test_edges_below_g_rejected(self):
        boundary = make_family('sqrt_log', 1.0, f0=0.5)
        with self.assertRaises(ConfigurationError):
            estimate_q_marginal(boundary, 2.0, [0.5, 1.0, 2.0], 4000, StreamFactory(seed=1, stream='q'))


class DominantFactorTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.boundary = make_family('sqrt_log', 1.0, f0=0.5)

    def test_balance_time(self):
        self.assertAlmostEqual(float(self.boundary.g(balance_time(self.boundary, 4.0))), 1.5, places=8)

    def test_finiteness_integral(self):
        result = finiteness_integral(self.boundary, 1.0, 2.0)
        self.assertGreaterEqual(result.start, balance_time(self.boundary, result.a))
        self.assertTrue(math.isfinite(result.shifted_value))
        self.assertTrue(math.isfinite(result.upper_value))
        self.assertGreater(result.upper_value, 0.0)
        self.assertGreater(result.bound, 0.0)

    def test_finiteness_integral_rejects(self):
        with self.assertRaises(ConfigurationError):
            finiteness_integral(self.boundary, 1.0, 2.0, a=3.0)
        with self.assertRaises(ConfigurationError):
            finiteness_integral(self.boundary, 1.0, 0.5)

    def test_dominant_factor(self):
        factor = q_dominant_factor(self.boundary, 1.0, 2.0, phi_one=0.8, phi_shifted=0.5)
        self.assertGreater(factor.value, 0.0)
        self.assertGreater(factor.exponent_head, 0.0)
        with self.assertRaises(ConfigurationError):
            q_dominant_factor(self.boundary, 1.0, 2.0, phi_one=0.0, phi_shifted=0.5)
