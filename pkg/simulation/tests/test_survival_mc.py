import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from simulation.boundary import make_family
from simulation.exceptions import ConfigurationError
from simulation.random_streams import StreamFactory
from simulation.stable_subordinator import K
from simulation.survival_mc import (
    EstimationMethod,
    build_survival_curve,
    check_grid,
    default_grid,
    estimate_big_jump_ratio,
    estimate_bracket_refinement,
    estimate_one_jump,
    estimate_shifted_survival,
    estimate_survival_bracket,
    first_failures,
    refine_grid,
)


class GridTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.boundary = make_family('sqrt_log', 1.5, f0=0.5)

    def test_default_grid_shape(self):
        grid = default_grid(self.boundary, 5.0, points=64)
        self.assertEqual(grid[0], 0.0)
        self.assertEqual(grid[-1], 5.0)
        self.assertAlmostEqual(grid[1], 0.5 / 8.0)
        self.assertIn(0.5, grid)
        self.assertTrue(np.all(np.diff(grid) > 0))

    def test_check_grid_rejects(self):
        with self.assertRaises(ConfigurationError):
            check_grid(np.array([0.0, 1.0, 2.0]), 2.0, 0.5)
        with self.assertRaises(ConfigurationError):
            check_grid(np.array([0.0, 0.1, 1.0]), 2.0, 0.5)
        with self.assertRaises(ConfigurationError):
            check_grid(np.array([0.1, 0.2, 2.0]), 2.0, 0.5)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(min_value=1e-3, max_value=100.0), min_size=2, max_size=20, unique=True))
    def test_refined_grid_contains_old_grid(self, points):
        grid = np.concatenate(([0.0], np.sort(points)))
        refined = refine_grid(grid)
        self.assertEqual(refined.size, 2 * grid.size - 1)
        np.testing.assert_array_equal(refined[0::2], grid)
        self.assertTrue(np.all(np.diff(refined) > 0))

    def test_first_failures(self):
        grid_g = np.array([-1.0, -0.5, 1.0])
        values = np.array([
            [0.0, 1.5, 2.0],   # never fails
            [0.0, 0.6, 0.8],   # upper fails at 2, lower at 1
            [0.0, 0.6, 1.5],   # upper survives, lower fails at 1
        ])
        upper, lower = first_failures(values, grid_g)
        np.testing.assert_array_equal(upper, [3, 2, 3])
        np.testing.assert_array_equal(lower, [2, 1, 1])


class BracketTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.boundary = make_family('sqrt_log', 1.5, f0=0.5)
        cls.streams = StreamFactory(seed=424242, stream='tests')

    def test_bracket_order(self):
        estimate = estimate_survival_bracket(self.boundary, 2.0, None, 20000, self.streams.child('a'))
        self.assertLessEqual(estimate.lower, estimate.point)
        self.assertLessEqual(estimate.point, estimate.upper)
        self.assertEqual(estimate.method, EstimationMethod.DIRECT_BRACKET)

    def test_too_few_paths(self):
        with self.assertRaises(ConfigurationError):
            estimate_survival_bracket(self.boundary, 2.0, None, 10, self.streams)

    def test_refinement_narrows_the_bracket(self):
        grid = default_grid(self.boundary, 5.0, points=64)
        estimates = estimate_bracket_refinement(
            self.boundary, 5.0, grid, 10000, self.streams.child('refine'), levels=2
        )
        uppers = [e.upper for e in estimates]
        lowers = [e.lower for e in estimates]
        self.assertTrue(all(b <= a for a, b in zip(uppers, uppers[1:])))
        self.assertTrue(all(b >= a for a, b in zip(lowers, lowers[1:])))
        self.assertEqual(estimates[-1].grid_points, (grid.size - 1) * 4 + 1)
        for coarse, fine in zip(estimates, estimates[1:]):
            se = math.sqrt(coarse.gap * (1.0 - coarse.gap) / coarse.n_paths)
            self.assertLessEqual(fine.gap, 0.6 * coarse.gap + 3 * se)

    def test_one_jump_agrees_with_direct(self):
        direct = estimate_survival_bracket(self.boundary, 2.0, None, 20000, self.streams.child('d'))
        jump = estimate_one_jump(self.boundary, 2.0, None, 20000, self.streams.child('j'))
        self.assertEqual(jump.method, EstimationMethod.ONE_JUMP)
        self.assertIn('jump_term', jump.components)
        tolerance = 4 * math.hypot(direct.stderr, jump.stderr) + 0.5 * (direct.gap + jump.gap)
        self.assertLess(abs(direct.point - jump.point), tolerance)

    def test_big_jump_ratio(self):
        ratio = estimate_big_jump_ratio(self.boundary, 5.0, None, 5000, self.streams.child('big'))
        self.assertLessEqual(ratio.ci_low, ratio.ratio)
        self.assertLessEqual(ratio.ratio, ratio.ci_high)
        self.assertLessEqual(ratio.lower_ratio, 1.0)

    def test_big_jump_dominates_for_large_t(self):
        recurrent = make_family('sqrt_log', 1.0, f0=0.5)
        ratios = [
            estimate_big_jump_ratio(recurrent, t, None, 20000, self.streams.child(f'dominance/{t:g}'))
            for t in (2.0, 5.0, 20.0)
        ]
        self.assertGreaterEqual(ratios[-1].ratio, 0.8)
        for earlier, later in zip(ratios, ratios[1:]):
            self.assertGreaterEqual(later.ratio, earlier.ratio - 3 * math.hypot(earlier.stderr, later.stderr))

    def test_big_jump_ratio_below_the_floor(self):
        # every path survives before f(0), so the ratio is P(first big jump ≤ t) with cap 1
        ratio = estimate_big_jump_ratio(self.boundary, 0.3, None, 20000, self.streams.child('floor'))
        self.assertEqual(ratio.survivors, 20000)
        expected = 1.0 - math.exp(-2 * K * 0.3)
        self.assertLess(abs(ratio.ratio - expected), 4 * ratio.stderr)


class SurvivalCurveTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.boundary = make_family('sqrt_log', 1.5, f0=0.5)
        cls.streams = StreamFactory(seed=99, stream='curve')

    def test_floor_and_monotone(self):
        curve = build_survival_curve(
            self.boundary, [0.25, 0.5, 1.0, 2.0, 5.0], 5000, self.streams,
            grid_points=128, rare_event_policy=False,
        )
        frame = curve.to_frame()
        self.assertTrue(frame['Phi_floor_ok'].all())
        self.assertAlmostEqual(frame['Phi_hat'].iloc[0], 0.25)
        self.assertTrue(np.all(np.diff(frame['point']) <= 0))
        self.assertTrue(np.all(np.diff(frame['Phi_hat']) > 0))
        self.assertEqual(curve.horizon, 5.0)

    def test_identical_for_any_worker_count(self):
        kwargs = dict(grid_points=64, rare_event_policy=False)
        serial = build_survival_curve(self.boundary, [1.0, 3.0], 5000, self.streams, 1, **kwargs)
        parallel = build_survival_curve(self.boundary, [1.0, 3.0], 5000, self.streams, 2, **kwargs)
        self.assertTrue(serial.to_frame().equals(parallel.to_frame()))

    def test_t_grid_validated(self):
        with self.assertRaises(ConfigurationError):
            build_survival_curve(self.boundary, [2.0, 1.0], 5000, self.streams)


class ShiftedSurvivalTests(SimpleTestCase):

    def test_monotone_in_starting_value(self):
        boundary = make_family('sqrt_log', 1.5, f0=0.5)
        g_h = float(boundary.g(1.0))
        y_grid = g_h + np.array([0.0, 0.5, 2.0, 10.0, 50.0])
        shifted = estimate_shifted_survival(
            boundary, 1.0, y_grid, 2.0, 4000, StreamFactory(seed=5, stream='shift'), grid_points=64
        )
        self.assertTrue(np.all(np.diff(shifted.point) >= 0))
        self.assertTrue(np.all(shifted.lower <= shifted.upper))
        at = shifted.at(y_grid)
        np.testing.assert_allclose(at, shifted.point)
