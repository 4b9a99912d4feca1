"""
Survival Monte Carlo

Estimates φ(t) = P(O_t), O_t = {τ_s > g(s), s ≤ t}, and Φ(t) = ∫₀ᵗ φ(s) ds.

On a grid 0 = s_0 < ... < s_m = t the event is bracketed by
- upper: τ(s_i) > g(s_i) for all i,
- lower: τ(s_i) > g(s_{i+1}) for all i < m,
which are rigorous because τ and g are nondecreasing. The one-jump
estimator integrates the exponential clock of the first jump above
a = g(t)∨1 analytically over each truncated path.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .boundary import BoundaryFunction
from .conf import get_simulation_setting
from .exceptions import ConfigurationError, FeasibilityError
from .random_streams import StreamFactory, run_blocks
from .stable_subordinator import (
    TruncationSpec,
    levy_tail,
    sample_conditional_jump_size,
    sample_exact_ensemble,
    sample_first_big_jump,
    sample_truncated_ensemble,
)

logger = logging.getLogger(__name__)


class EstimationMethod(str, Enum):
    DIRECT_BRACKET = "DirectBracket"
    ONE_JUMP = "OneJumpDecomposition"


@dataclass
class SurvivalEstimate:
    """Bracketed estimate of P(O_t)"""
    t: float
    lower: float
    upper: float
    point: float
    stderr: float
    n_paths: int
    grid_points: int
    method: EstimationMethod
    components: Dict[str, float] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["method"] = self.method.value
        return data


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

def default_grid(boundary: BoundaryFunction, t: float, points: int = None) -> np.ndarray:
    """
    Geometric local-time grid on [0, t] whose first positive point is f(0)/8.

    The floor level f0 is inserted when it lies inside (0, t).
    """
    points = points or get_simulation_setting('GRID_POINTS')
    if t <= 0:
        raise ConfigurationError("survival horizon must be positive")
    first = boundary.f0 / 8.0
    if t <= first:
        return np.linspace(0.0, t, points)
    grid = np.concatenate(([0.0], np.geomspace(first, t, points - 1)))
    if first < boundary.f0 < t:
        grid = np.union1d(grid, [boundary.f0])
    grid[-1] = t
    return grid


def refine_grid(grid: np.ndarray) -> np.ndarray:
    """Insert one midpoint per cell (geometric away from 0) so the old grid is a subgrid"""
    grid = np.asarray(grid, dtype=float)
    left, right = grid[:-1], grid[1:]
    mids = np.where(left > 0, np.sqrt(left * right), 0.5 * right)
    out = np.empty(grid.size + mids.size)
    out[0::2] = grid
    out[1::2] = mids
    return out


def check_grid(grid: np.ndarray, t: float, zero_level: float) -> np.ndarray:
    """Validate an estimation grid: starts at 0, ends at t, first point below the floor"""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("grid must start at 0 and be strictly increasing")
    if not math.isclose(grid[-1], t, rel_tol=1e-12):
        raise ConfigurationError(f"grid must end at t={t}, ends at {grid[-1]}")
    if not grid[1] < zero_level:
        raise ConfigurationError(
            f"first grid point {grid[1]:g} must lie below f(0)={zero_level:g} "
            "(otherwise the lower bracket is vacuously 0)"
        )
    return grid


def _check_paths(n_paths: int) -> int:
    minimum = get_simulation_setting('MIN_PATHS')
    if n_paths < minimum:
        raise ConfigurationError(f"n_paths={n_paths} is below the minimum of {minimum}")
    return int(n_paths)


# ---------------------------------------------------------------------------
# Bracket evaluation
# ---------------------------------------------------------------------------

def _first_false(ok: np.ndarray) -> np.ndarray:
    """Index of the first False per row; row length when all True"""
    idx = np.argmax(~ok, axis=1)
    idx[ok.all(axis=1)] = ok.shape[1]
    return idx


def first_failures(values: np.ndarray, g_at: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    First failing grid index of the upper and lower bracket events per path.

    Returns:
        (upper, lower): upper in 0..m+1 (m+1 = never fails), lower in 0..m
        (m = never fails). O_{s_k} holds in the upper bracket iff upper > k and
        in the lower bracket iff lower ≥ k.
    """
    upper = _first_false(values > g_at)
    lower = _first_false(values[:, :-1] > g_at[1:])
    return upper, lower


def _direct_block(rng: np.random.Generator, n: int, grid: np.ndarray, g_at: np.ndarray):
    values = sample_exact_ensemble(grid, n, rng)
    upper, lower = first_failures(values, g_at)
    m = grid.size - 1
    return (
        np.bincount(upper, minlength=m + 2),
        np.bincount(lower, minlength=m + 1),
    )


def survival_profile(
    grid: np.ndarray, g_at: np.ndarray, n_paths: int, streams: StreamFactory, workers: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Survivor counts per grid index: (upper_k, lower_k) for k = 0..m"""
    blocks = run_blocks(partial(_direct_block, grid=grid, g_at=g_at), n_paths, streams, workers)
    upper_hist = np.sum([b[0] for b in blocks], axis=0)
    lower_hist = np.sum([b[1] for b in blocks], axis=0)
    m = grid.size - 1
    # survivors of O_{s_k}: upper index > k, lower index ≥ k
    upper_surv = n_paths - np.cumsum(upper_hist)[: m + 1]
    lower_surv = n_paths - np.concatenate(([0], np.cumsum(lower_hist)[:m]))
    return upper_surv, lower_surv


def _direct_estimate(t: float, upper: int, lower: int, n: int, grid_points: int) -> SurvivalEstimate:
    p_up, p_low = upper / n, lower / n
    point = 0.5 * (p_up + p_low)
    return SurvivalEstimate(
        t=float(t),
        lower=p_low,
        upper=p_up,
        point=point,
        stderr=math.sqrt(point * (1.0 - point) / n),
        n_paths=n,
        grid_points=grid_points,
        method=EstimationMethod.DIRECT_BRACKET,
    )


def estimate_survival_bracket(
    boundary: BoundaryFunction,
    t: float,
    grid: Optional[np.ndarray],
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
) -> SurvivalEstimate:
    """
    Direct bracket estimate of P(O_t) from exact τ increments.

    Args:
        boundary: Boundary (g is evaluated on the grid)
        t: Local-time horizon
        grid: Grid on [0, t] (default_grid when None)
        n_paths: Number of paths (≥ MIN_PATHS)
        streams: Random stream of this estimate
        workers: Worker processes

    Returns:
        SurvivalEstimate with lower ≤ point ≤ upper
    """
    n_paths = _check_paths(n_paths)
    grid = default_grid(boundary, t) if grid is None else grid
    grid = check_grid(grid, t, boundary.f0)
    upper, lower = survival_profile(grid, boundary.g(grid), n_paths, streams, workers)
    return _direct_estimate(t, upper[-1], lower[-1], n_paths, grid.size)


def _refinement_block(rng, n, finest, g_fine, levels):
    values = sample_exact_ensemble(finest, n, rng)
    counts = []
    for level in range(levels + 1):
        stride = 2 ** (levels - level)
        upper, lower = first_failures(values[:, ::stride], g_fine[::stride])
        m = g_fine[::stride].size - 1
        counts.append((int(np.sum(upper > m)), int(np.sum(lower >= m))))
    return counts


def estimate_bracket_refinement(
    boundary: BoundaryFunction,
    t: float,
    grid: np.ndarray,
    n_paths: int,
    streams: StreamFactory,
    levels: int = 1,
    workers: int = 1,
) -> List[SurvivalEstimate]:
    """
    Brackets on a grid and its successive refinements from one common ensemble.

    The ensemble is simulated on the finest grid; every coarser level uses
    the same paths, so the upper bracket can only fall and the lower only
    rise as the grid is refined.

    Returns:
        Estimates from the coarsest to the finest grid
    """
    n_paths = _check_paths(n_paths)
    grid = check_grid(grid, t, boundary.f0)
    finest = grid
    for _ in range(levels):
        finest = refine_grid(finest)
    worker = partial(_refinement_block, finest=finest, g_fine=boundary.g(finest), levels=levels)
    results = run_blocks(worker, n_paths, streams, workers)
    estimates = []
    for level in range(levels + 1):
        upper = sum(r[level][0] for r in results)
        lower = sum(r[level][1] for r in results)
        points = (grid.size - 1) * 2 ** level + 1
        estimates.append(_direct_estimate(t, upper, lower, n_paths, points))
    return estimates


# ---------------------------------------------------------------------------
# One-jump decomposition
# ---------------------------------------------------------------------------

def _survival_times(grid: np.ndarray, upper: np.ndarray, lower: np.ndarray):
    """Local time up to which each bracket survives (t when it never fails)"""
    m = grid.size - 1
    t = grid[-1]
    upper_time = np.where(upper <= m, grid[np.minimum(upper, m)], np.inf)
    lower_time = np.where(lower < m, grid[np.minimum(lower, m)], np.inf)
    return np.minimum(upper_time, t), np.minimum(lower_time, t), upper > m, lower >= m


def _one_jump_weights(grid, values, g_at, rate):
    upper, lower = first_failures(values, g_at)
    t = grid[-1]
    up_time, low_time, up_alive, low_alive = _survival_times(grid, upper, lower)
    # ∫₀ᵗ r e^{-rs} 1{O_s} ds + e^{-rt} 1{O_t}
    w_up = -np.expm1(-rate * up_time) + np.exp(-rate * t) * up_alive
    w_low = -np.expm1(-rate * low_time) + np.exp(-rate * t) * low_alive
    return w_low, w_up, low_alive


def _one_jump_block(rng, n, grid, g_at, spec, rate):
    ensemble = sample_truncated_ensemble(spec, grid, n, rng)
    w_low, w_up, alive = _one_jump_weights(grid, ensemble.values, g_at, rate)
    mid = 0.5 * (w_low + w_up)
    no_jump = math.exp(-rate * grid[-1]) * alive
    return np.array([w_low.sum(), w_up.sum(), mid.sum(), (mid ** 2).sum(),
                     no_jump.sum(), (mid - no_jump).sum()])


def estimate_one_jump(
    boundary: BoundaryFunction,
    t: float,
    grid: Optional[np.ndarray],
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
) -> SurvivalEstimate:
    """
    P(O_t) = E[∫₀ᵗ r e^{-rs} 1{O^a_s} ds + e^{-rt} 1{O^a_t}], a = g(t)∨1, r = 2K/sqrt(a).

    O^a is the event for the path truncated at a; a jump above a at local
    time s ≤ t lifts τ over g on all of [s, t]. Falls back to the direct
    estimator when g(t) ≤ 1.

    Returns:
        SurvivalEstimate with components 'jump_term' and 'no_jump_term'
    """
    n_paths = _check_paths(n_paths)
    grid = default_grid(boundary, t) if grid is None else grid
    grid = check_grid(grid, t, boundary.f0)
    g_t = float(boundary.g(t))
    if g_t <= 1.0:
        logger.info(f"g({t:g}) = {g_t:.3g} ≤ 1, using the direct bracket estimator")
        return estimate_survival_bracket(boundary, t, grid, n_paths, streams, workers)

    cap = max(g_t, 1.0)
    spec = TruncationSpec(cap=cap, small_cut=get_simulation_setting('SMALL_JUMP_CUT'))
    rate = float(levy_tail(cap))
    worker = partial(_one_jump_block, grid=grid, g_at=boundary.g(grid), spec=spec, rate=rate)
    sums = np.sum(run_blocks(worker, n_paths, streams, workers), axis=0)

    lower, upper, point = sums[0] / n_paths, sums[1] / n_paths, sums[2] / n_paths
    variance = max(sums[3] / n_paths - point ** 2, 0.0)
    return SurvivalEstimate(
        t=float(t),
        lower=float(lower),
        upper=float(upper),
        point=float(point),
        stderr=math.sqrt(variance / n_paths),
        n_paths=n_paths,
        grid_points=grid.size,
        method=EstimationMethod.ONE_JUMP,
        components={
            "jump_term": float(sums[5] / n_paths),
            "no_jump_term": float(sums[4] / n_paths),
            "cap": cap,
        },
    )


# ---------------------------------------------------------------------------
# Big-jump ratio
# ---------------------------------------------------------------------------

@dataclass
class BigJumpRatio:
    """P(O_t ∩ {Δ₁^a ≤ t}) / P(O_t) with a = g(t)∨1"""
    t: float
    ratio: float
    stderr: float
    ci_low: float
    ci_high: float
    lower_ratio: float
    upper_ratio: float
    survivors: int
    n_paths: int

    def to_dict(self) -> Dict:
        return asdict(self)


def _big_jump_block(rng, n, grid, g_at, spec):
    ensemble = sample_truncated_ensemble(spec, grid, n, rng)
    values = ensemble.values
    t = grid[-1]
    jump_time = sample_first_big_jump(spec.cap, rng, size=n)
    jump_size = sample_conditional_jump_size(spec.cap, rng, size=n)
    jumped = jump_time <= t
    values = values + np.where(grid[None, :] >= jump_time[:, None], jump_size[:, None], 0.0)
    upper, lower = first_failures(values, g_at)
    m = grid.size - 1
    up_alive, low_alive = upper > m, lower >= m
    return np.array([
        low_alive.sum(), (low_alive & jumped).sum(),
        up_alive.sum(), (up_alive & jumped).sum(),
    ])


def estimate_big_jump_ratio(
    boundary: BoundaryFunction,
    t: float,
    grid: Optional[np.ndarray],
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
) -> BigJumpRatio:
    """
    Share of surviving paths whose first jump above g(t)∨1 came before t.

    Paths are the truncated process plus an independent stream of jumps
    above the cap (only the first one matters on [0, t]).

    Raises:
        FeasibilityError: no surviving path
    """
    n_paths = _check_paths(n_paths)
    grid = default_grid(boundary, t) if grid is None else grid
    grid = check_grid(grid, t, boundary.f0)
    cap = max(float(boundary.g(t)), 1.0)
    spec = TruncationSpec(cap=cap, small_cut=get_simulation_setting('SMALL_JUMP_CUT'))
    worker = partial(_big_jump_block, grid=grid, g_at=boundary.g(grid), spec=spec)
    low_n, low_j, up_n, up_j = np.sum(run_blocks(worker, n_paths, streams, workers), axis=0)

    if low_n == 0 or up_n == 0:
        raise FeasibilityError(f"no surviving paths at t={t:g}; the big-jump ratio is undefined")
    lower_ratio, upper_ratio = low_j / low_n, up_j / up_n
    ratio = 0.5 * (lower_ratio + upper_ratio)
    survivors = int(0.5 * (low_n + up_n))
    stderr = math.sqrt(max(ratio * (1.0 - ratio), 0.0) / survivors)
    return BigJumpRatio(
        t=float(t),
        ratio=float(ratio),
        stderr=stderr,
        ci_low=max(0.0, ratio - 1.96 * stderr),
        ci_high=min(1.0, ratio + 1.96 * stderr),
        lower_ratio=float(lower_ratio),
        upper_ratio=float(upper_ratio),
        survivors=survivors,
        n_paths=n_paths,
    )


# ---------------------------------------------------------------------------
# Survival curve
# ---------------------------------------------------------------------------

def _cumulative_trapezoid(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


@dataclass
class SurvivalCurve:
    """φ̂ on a t-grid and Φ̂ with its discretization band and MC error"""
    f0: float
    estimates: List[SurvivalEstimate]
    phi_integral: np.ndarray
    phi_band: np.ndarray
    phi_stderr: np.ndarray
    fine_grid: np.ndarray
    fine_point: np.ndarray
    fine_integral: np.ndarray

    @property
    def t_grid(self) -> np.ndarray:
        return np.array([e.t for e in self.estimates])

    @property
    def horizon(self) -> float:
        return float(self.fine_grid[-1])

    def phi_at(self, s: Sequence[float]) -> np.ndarray:
        """Point estimate of φ (right-continuous step between grid points)"""
        idx = np.searchsorted(self.fine_grid, np.asarray(s, dtype=float), side="right") - 1
        return self.fine_point[np.clip(idx, 0, self.fine_point.size - 1)]

    def integral_at(self, s: Sequence[float]) -> np.ndarray:
        """Φ̂ interpolated on the integration grid"""
        return np.interp(s, self.fine_grid, self.fine_integral)

    def to_frame(self) -> pd.DataFrame:
        t = self.t_grid
        floor = np.minimum(t, self.f0)
        return pd.DataFrame({
            "t": t,
            "lower": [e.lower for e in self.estimates],
            "point": [e.point for e in self.estimates],
            "upper": [e.upper for e in self.estimates],
            "stderr": [e.stderr for e in self.estimates],
            "n": [e.n_paths for e in self.estimates],
            "method": [e.method.value for e in self.estimates],
            "Phi_hat": self.phi_integral,
            "Phi_band": self.phi_band,
            "Phi_stderr": self.phi_stderr,
            "Phi_floor": floor,
            "Phi_floor_ok": self.phi_integral >= floor - 1e-12,
        })


def build_survival_curve(
    boundary: BoundaryFunction,
    t_grid: Sequence[float],
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    grid_points: int = None,
    rare_event_policy: bool = True,
) -> SurvivalCurve:
    """
    φ̂ at every t in t_grid from one ensemble, and Φ̂ by trapezoid.

    One path set serves all t. Points where the direct estimate has fewer
    than RARE_EVENT_MIN_HITS survivors are re-estimated with the one-jump
    decomposition (on their own stream).

    Args:
        boundary: Boundary
        t_grid: Increasing horizons
        n_paths: Paths (≥ MIN_PATHS)
        streams: Random stream
        workers: Worker processes
        grid_points: Points of the underlying simulation grid
        rare_event_policy: Enable the one-jump fallback

    Returns:
        SurvivalCurve
    """
    n_paths = _check_paths(n_paths)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ConfigurationError("t_grid must be positive and increasing")

    fine = np.union1d(default_grid(boundary, float(t_grid[-1]), grid_points), t_grid)
    fine = check_grid(fine, float(t_grid[-1]), boundary.f0)
    logger.info(f"Survival curve for {boundary.describe()}: {t_grid.size} horizons, "
                f"{fine.size}-point grid, {n_paths} paths")

    upper, lower = survival_profile(fine, boundary.g(fine), n_paths, streams, workers)
    p_up, p_low = upper / n_paths, lower / n_paths
    point = 0.5 * (p_up + p_low)
    stderr = np.sqrt(point * (1.0 - point) / n_paths)

    integral = _cumulative_trapezoid(fine, point)
    band = _cumulative_trapezoid(fine, 0.5 * (p_up - p_low))
    integral_se = _cumulative_trapezoid(fine, stderr)

    index = np.searchsorted(fine, t_grid)
    min_hits = get_simulation_setting('RARE_EVENT_MIN_HITS')
    estimates = []
    for i, (t, k) in enumerate(zip(t_grid, index)):
        estimate = _direct_estimate(t, upper[k], lower[k], n_paths, k + 1)
        if rare_event_policy and estimate.point * n_paths < min_hits and t > boundary.f0:
            logger.info(f"⚠ Rare event at t={t:g} ({estimate.point * n_paths:.0f} hits), "
                        "switching to the one-jump decomposition")
            estimate = estimate_one_jump(
                boundary, float(t), fine[: k + 1], n_paths, streams.child(f"one_jump/{i}"), workers
            )
        estimates.append(estimate)

    logger.info(f"✓ Survival curve done: Φ̂({t_grid[-1]:g}) = {integral[-1]:.6g}")
    return SurvivalCurve(
        f0=boundary.f0,
        estimates=estimates,
        phi_integral=integral[index],
        phi_band=band[index],
        phi_stderr=integral_se[index],
        fine_grid=fine,
        fine_point=point,
        fine_integral=integral,
    )


# ---------------------------------------------------------------------------
# Shifted boundaries
# ---------------------------------------------------------------------------

@dataclass
class ShiftedSurvival:
    """P(O_t(h, y)) for every y of a grid, from common paths"""
    h: float
    t: float
    y_grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    point: np.ndarray
    stderr: np.ndarray
    n_paths: int
    method: EstimationMethod
    lower_thresholds: Optional[np.ndarray] = None
    upper_thresholds: Optional[np.ndarray] = None

    def at(self, y: Sequence[float]) -> np.ndarray:
        """Point estimate at arbitrary starting values y"""
        y = np.asarray(y, dtype=float)
        if self.lower_thresholds is not None:
            lower = np.searchsorted(self.lower_thresholds, y, side="left")
            upper = np.searchsorted(self.upper_thresholds, y, side="left")
            return 0.5 * (lower + upper) / self.n_paths
        return np.interp(y, self.y_grid, self.point)


def _shifted_thresholds_block(rng, n, grid, g_shift):
    values = sample_exact_ensemble(grid, n, rng)
    # survives level y iff y exceeds the largest deficit along the path
    lower = np.max(g_shift[None, 1:] - values[:, :-1], axis=1)
    upper = np.max(g_shift[None, :] - values, axis=1)
    return lower, upper


def _shifted_one_jump_block(rng, n, grid, g_shift, y_grid, spec, rate):
    ensemble = sample_truncated_ensemble(spec, grid, n, rng)
    values = ensemble.values
    low_deficit = np.maximum.accumulate(g_shift[None, 1:] - values[:, :-1], axis=1)
    up_deficit = np.maximum.accumulate(g_shift[None, :] - values, axis=1)
    t = grid[-1]
    m = grid.size - 1
    tail = math.exp(-rate * t)
    sums = np.zeros((y_grid.size, 3))
    for j, y in enumerate(y_grid):
        low_idx = (low_deficit < y).sum(axis=1)
        up_idx = (up_deficit < y).sum(axis=1)
        low_time = np.where(low_idx < m, grid[np.minimum(low_idx, m)], t)
        up_time = np.where(up_idx <= m, grid[np.minimum(up_idx, m)], t)
        w_low = -np.expm1(-rate * low_time) + tail * (low_idx >= m)
        w_up = -np.expm1(-rate * up_time) + tail * (up_idx > m)
        mid = 0.5 * (w_low + w_up)
        sums[j] = (w_low.sum(), w_up.sum(), (mid ** 2).sum())
    return sums


def estimate_shifted_survival(
    boundary: BoundaryFunction,
    h: float,
    y_grid: Sequence[float],
    t: float,
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    method: EstimationMethod = EstimationMethod.DIRECT_BRACKET,
    grid_points: int = None,
) -> ShiftedSurvival:
    """
    P(τ'_s > g(s + h) − y, s ≤ t) for all y at once.

    Common paths make every estimate nondecreasing in y.

    Args:
        boundary: Base boundary
        h: Local-time shift
        y_grid: Increasing starting values τ_h = y
        t: Remaining horizon
        n_paths: Paths
        streams: Random stream
        workers: Worker processes
        method: DirectBracket or OneJumpDecomposition

    Returns:
        ShiftedSurvival
    """
    n_paths = _check_paths(n_paths)
    y_grid = np.asarray(y_grid, dtype=float)
    grid = default_grid(boundary, t, grid_points)
    # deficits against g(s + h); each y is compared with them afterwards
    g_shift = boundary.shifted(h, 0.0).g(grid)

    low_thr = up_thr = None
    if method == EstimationMethod.DIRECT_BRACKET:
        blocks = run_blocks(partial(_shifted_thresholds_block, grid=grid, g_shift=g_shift),
                            n_paths, streams, workers)
        low_thr = np.sort(np.concatenate([b[0] for b in blocks]))
        up_thr = np.sort(np.concatenate([b[1] for b in blocks]))
        lower = np.searchsorted(low_thr, y_grid, side="left") / n_paths
        upper = np.searchsorted(up_thr, y_grid, side="left") / n_paths
        point = 0.5 * (lower + upper)
        stderr = np.sqrt(point * (1.0 - point) / n_paths)
    else:
        cap = max(float(boundary.g(t + h)) - float(y_grid.min()), 1.0)
        spec = TruncationSpec(cap=cap, small_cut=get_simulation_setting('SMALL_JUMP_CUT'))
        worker = partial(_shifted_one_jump_block, grid=grid, g_shift=g_shift, y_grid=y_grid,
                         spec=spec, rate=float(levy_tail(cap)))
        sums = np.sum(run_blocks(worker, n_paths, streams, workers), axis=0)
        lower, upper = sums[:, 0] / n_paths, sums[:, 1] / n_paths
        point = 0.5 * (lower + upper)
        stderr = np.sqrt(np.maximum(sums[:, 2] / n_paths - point ** 2, 0.0) / n_paths)

    return ShiftedSurvival(
        h=float(h), t=float(t), y_grid=y_grid, lower=lower, upper=upper,
        point=point, stderr=stderr, n_paths=n_paths, method=EstimationMethod(method),
        lower_thresholds=low_thr, upper_thresholds=up_thr,
    )
