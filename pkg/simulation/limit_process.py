"""
Limit Process

Sampling and evaluation of the limiting law Q of Brownian motion conditioned
on L_t ≤ f(t):

- the clock: the local time at which the decisive big jump of τ arrives,
  with density φ(s)/Φ(t);
- transient boundaries: conditioned skeleton on [0, x], excursion fills
  (Vervaat transform of a Brownian bridge) and a Bessel(3) tail after τ_x;
- recurrent boundaries: the Q-marginal of τ_h through the pre-limit
  identity P(τ_h ∈ dy | O_t) = P(O_{t−h}(h, y)) P(τ_h ∈ dy; O_h) / P(O_t).
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .boundary import BoundaryFunction, Classification, classify
from .conf import get_simulation_setting
from .exceptions import ConfigurationError, FeasibilityError
from .quadrature import integrate_chunked, integrate_log_log_to_infinity, integrate_log_space
from .random_streams import StreamFactory, run_blocks
from .renewal_ode import exponent_integral_limit
from .stable_subordinator import (
    K,
    SubordinatorPath,
    TruncationSpec,
    sample_exact_ensemble,
    sample_truncated_ensemble,
)
from .survival_mc import (
    EstimationMethod,
    SurvivalCurve,
    _check_paths,
    _cumulative_trapezoid,
    check_grid,
    default_grid,
    estimate_shifted_survival,
    first_failures,
    survival_profile,
)

logger = logging.getLogger(__name__)

# span in ln s of the signed shift integral; its integrand decays like 1/s
SHIFT_INTEGRAL_SPAN = 40.0
# excursion maximum: terms of the theta series
EXCURSION_SERIES_TERMS = 200


# ---------------------------------------------------------------------------
# Clock
# ---------------------------------------------------------------------------

@dataclass
class ClockDistribution:
    """Law of the clock on a local-time grid (density φ̂/Φ̂ and its CDF)"""
    horizon: float
    grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    total: float
    tail_fraction: float = 0.0

    @property
    def is_limit(self) -> bool:
        return math.isinf(self.horizon)

    def mean(self) -> float:
        """Mean of the sampled law (piecewise-uniform within grid cells)"""
        mids = 0.5 * (self.grid[1:] + self.grid[:-1])
        return float(np.sum(np.diff(self.cdf) * mids))

    def tail_probability(self, h: float) -> float:
        """P(clock > h)"""
        return float(1.0 - np.interp(h, self.grid, self.cdf))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.grid, "density": self.density, "cdf": self.cdf})


def clock_distribution(
    boundary: BoundaryFunction,
    curve: SurvivalCurve,
    horizon: float = math.inf,
    max_tail_fraction: float = 0.01,
) -> ClockDistribution:
    """
    Build the clock law φ̂(s)/Φ̂(horizon) from a survival curve.

    For horizon = ∞ (the limit clock) the boundary must be transient and the
    mass of Φ beyond the curve, predicted by the renewal solution, must stay
    below max_tail_fraction; the law is then renormalized on the curve range.

    Raises:
        ConfigurationError: recurrent boundary with horizon = ∞, or horizon beyond the curve
        FeasibilityError: curve too short for the limit clock
    """
    tail_fraction = 0.0
    if math.isinf(horizon):
        if classify(boundary) != Classification.TRANSIENT:
            raise ConfigurationError(
                f"{boundary.describe()} is recurrent: Φ(∞) = ∞ and the limit clock does not exist",
                hint="use a finite horizon",
            )
        end = curve.horizon
        limit = exponent_integral_limit(boundary, end)
        tail_fraction = -math.expm1(-limit)
        if tail_fraction > max_tail_fraction:
            raise FeasibilityError(
                f"Φ mass beyond t={end:g} is {tail_fraction:.2%} of Φ(∞) "
                f"(allowed {max_tail_fraction:.0%})",
                hint="extend the survival curve",
            )
    else:
        end = float(horizon)
        if end <= 0 or end > curve.horizon * (1.0 + 1e-12):
            raise ConfigurationError(f"clock horizon {end:g} outside the survival curve (0, {curve.horizon:g}]")

    inside = curve.fine_grid < end
    grid = np.append(curve.fine_grid[inside], end)
    values = np.interp(grid, curve.fine_grid, curve.fine_point)
    cumulative = _cumulative_trapezoid(grid, values)
    total = float(cumulative[-1])
    if total <= 0:
        raise FeasibilityError("survival curve integrates to zero")

    logger.info(f"Clock for {boundary.describe()} on [0, {end:g}]: Φ̂ = {total:.6g}"
                + (f", tail fraction {tail_fraction:.2e}" if tail_fraction else ""))
    return ClockDistribution(
        horizon=float(horizon),
        grid=grid,
        density=values / total,
        cdf=cumulative / total,
        total=total,
        tail_fraction=tail_fraction,
    )


def sample_clock(dist: ClockDistribution, rng: np.random.Generator, size=None):
    """Inverse-CDF draw, linear between grid nodes"""
    keep = np.concatenate(([True], np.diff(dist.cdf) > 0))
    u = rng.random(size)
    return np.interp(u, dist.cdf[keep], dist.grid[keep])


# ---------------------------------------------------------------------------
# Conditioned skeleton
# ---------------------------------------------------------------------------

def sample_conditioned_skeleton(
    boundary: BoundaryFunction,
    x: float,
    grid: Optional[np.ndarray],
    rng: np.random.Generator,
    max_attempts: int = 100000,
    record_threshold: float = math.inf,
    batch_size: int = 256,
) -> Tuple[SubordinatorPath, int]:
    """
    Rejection-sample a τ path on [0, x] from the lower-bracket event.

    The lower bracket τ(s_i) > g(s_{i+1}) implies O_x, so every accepted
    path satisfies the constraint.

    Args:
        boundary: Boundary
        x: Clock value
        grid: Grid on [0, x] (default_grid when None)
        rng: numpy Generator
        max_attempts: Rejection budget
        record_threshold: Jumps above this keep their size and position
        batch_size: Paths proposed per round

    Returns:
        (accepted path, number of attempts)

    Raises:
        FeasibilityError: budget exhausted
    """
    if x <= 0:
        raise ConfigurationError("clock value must be positive")
    grid = default_grid(boundary, x) if grid is None else grid
    grid = check_grid(grid, x, boundary.f0)
    g_next = boundary.g(grid[1:])
    spec = TruncationSpec(small_cut=get_simulation_setting('SMALL_JUMP_CUT'))

    attempts = 0
    while attempts < max_attempts:
        n = min(batch_size, max_attempts - attempts)
        ensemble = sample_truncated_ensemble(spec, grid, n, rng, record_threshold=record_threshold)
        accepted = np.all(ensemble.values[:, :-1] > g_next, axis=1)
        if accepted.any():
            index = int(np.argmax(accepted))
            return ensemble.path(index), attempts + index + 1
        attempts += n

    raise FeasibilityError(
        f"no path of {attempts} accepted for O_{x:g} (acceptance rate < {1.0 / attempts:.1e})",
        hint="raise max_attempts or lower the clock horizon",
    )


# ---------------------------------------------------------------------------
# Excursions and Bessel(3)
# ---------------------------------------------------------------------------

def sample_normalized_excursion(n_points: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit-length Brownian excursion on n_points equally spaced times.

    Vervaat transform: a Brownian bridge is rotated at its minimum.
    """
    if n_points < 3:
        raise ConfigurationError("an excursion needs at least 3 points")
    steps = n_points - 1
    walk = np.concatenate(([0.0], np.cumsum(rng.standard_normal(steps)) / math.sqrt(steps)))
    bridge = walk - np.linspace(0.0, 1.0, n_points) * walk[-1]
    k = int(np.argmin(bridge[:-1]))
    rotated = bridge[(k + np.arange(n_points)) % steps] - bridge[k]
    rotated[-1] = 0.0
    return np.linspace(0.0, 1.0, n_points), rotated


def excursion_max_cdf(x):
    """P(max of a normalized Brownian excursion ≤ x), theta series"""
    x = np.asarray(x, dtype=float)
    k = np.arange(1, EXCURSION_SERIES_TERMS + 1)
    x2 = (x[..., None] ** 2) * (k ** 2)
    series = np.sum((4.0 * x2 - 1.0) * np.exp(-2.0 * x2), axis=-1)
    out = np.clip(1.0 - 2.0 * series, 0.0, 1.0)
    out = np.where(x <= 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass
class ExcursionFill:
    """One excursion of the assembled path"""
    local_time: float
    start: float
    duration: float
    sign: int
    times: np.ndarray
    values: np.ndarray


def fill_excursions(
    skeleton: SubordinatorPath,
    rng: np.random.Generator,
    dt: float,
    max_points: int = 20000,
) -> List[ExcursionFill]:
    """
    Fill every recorded jump of the skeleton with a signed excursion.

    A jump of size ζ becomes a unit excursion on ⌈ζ/dt⌉ steps (capped at
    max_points), scaled by sqrt(ζ) in space and ζ in time. Unrecorded jumps
    stay at zero.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    fills = []
    for local_time, size, start in zip(skeleton.jump_local_times, skeleton.jump_sizes, skeleton.jump_starts):
        n_points = int(min(max(math.ceil(size / dt), 2), max_points - 1)) + 1
        unit_times, unit_values = sample_normalized_excursion(n_points, rng)
        sign = 1 if rng.random() < 0.5 else -1
        fills.append(ExcursionFill(
            local_time=float(local_time),
            start=float(start),
            duration=float(size),
            sign=sign,
            times=start + size * unit_times,
            values=sign * math.sqrt(size) * unit_values,
        ))
    return fills


def sample_bessel3(duration: float, dt: float, rng: np.random.Generator, size=None):
    """
    Bessel(3) path from 0: norm of three independent Brownian motions.

    Returns:
        (times, values); values has shape (n_steps + 1,) or (size, n_steps + 1)
    """
    if duration <= 0 or dt <= 0:
        raise ConfigurationError("duration and dt must be positive")
    steps = max(int(math.ceil(duration / dt)), 1)
    step = duration / steps
    shape = (steps, 3) if size is None else (size, steps, 3)
    increments = rng.standard_normal(shape) * math.sqrt(step)
    positions = np.cumsum(increments, axis=-2)
    radius = np.linalg.norm(positions, axis=-1)
    zero = np.zeros(radius.shape[:-1] + (1,))
    return np.linspace(0.0, duration, steps + 1), np.concatenate((zero, radius), axis=-1)


# ---------------------------------------------------------------------------
# Transient limit path
# ---------------------------------------------------------------------------

@dataclass
class LimitPathSample:
    """One path of the transient limit process"""
    clock: float
    skeleton: SubordinatorPath
    fills: List[ExcursionFill]
    sign: int
    bessel_times: np.ndarray
    bessel_values: np.ndarray
    attempts: int
    kind: str = "Transient"

    @property
    def explosion_time(self) -> float:
        """τ_x: the last zero of the path"""
        return float(self.skeleton.values[-1])

    def as_frame(self) -> pd.DataFrame:
        """time, value, segment rows (excursion_k, bessel_tail)"""
        parts = [
            pd.DataFrame({"time": fill.times, "value": fill.values, "segment": f"excursion_{k}"})
            for k, fill in enumerate(self.fills)
        ]
        parts.append(pd.DataFrame({
            "time": self.explosion_time + self.bessel_times,
            "value": self.sign * self.bessel_values,
            "segment": "bessel_tail",
        }))
        return pd.concat(parts, ignore_index=True)

    def as_series(self) -> pd.Series:
        """Assembled path indexed by real time, zeros at the skeleton points"""
        frame = self.as_frame()
        zeros = pd.DataFrame({"time": self.skeleton.values, "value": 0.0})
        merged = pd.concat([zeros, frame[["time", "value"]]], ignore_index=True)
        merged = merged.sort_values("time", kind="stable").drop_duplicates("time", keep="last")
        return pd.Series(merged["value"].to_numpy(), index=merged["time"].to_numpy(), name="B")

    def local_time_at(self, times) -> np.ndarray:
        """Reconstructed local time: skeleton inverse up to τ_x, constant x after"""
        times = np.asarray(times, dtype=float)
        return np.where(times >= self.explosion_time, self.clock, self.skeleton.inverse(times))

    def constraint_satisfied(self, boundary: BoundaryFunction) -> bool:
        """L_{g(s)} ≤ s at every skeleton grid point with g(s) inside [0, τ_x)"""
        grid = self.skeleton.grid
        g_at = boundary.g(grid)
        inside = (g_at >= 0) & (g_at < self.explosion_time)
        return bool(np.all(self.local_time_at(g_at[inside]) <= grid[inside] + 1e-12))

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "clock": self.clock,
            "explosion_time": self.explosion_time,
            "sign": self.sign,
            "attempts": self.attempts,
            "excursions": len(self.fills),
        }


def sample_transient_path(
    boundary: BoundaryFunction,
    clock: ClockDistribution,
    rng: np.random.Generator,
    dt: float = 0.01,
    tail_duration: float = 5.0,
    max_attempts: int = 100000,
    record_threshold: Optional[float] = None,
    max_points: int = 20000,
) -> LimitPathSample:
    """
    Sample one path of the transient limit process.

    clock → conditioned skeleton on [0, x] → excursion fills → sign →
    Bessel(3) tail after τ_x.

    Args:
        boundary: Transient boundary
        clock: Clock law (finite horizon or limit)
        rng: numpy Generator
        dt: Real-time resolution of fills and tail
        tail_duration: Length of the Bessel(3) tail
        max_attempts: Rejection budget of the skeleton
        record_threshold: Smallest filled excursion (default 4·dt)
        max_points: Cap on points per excursion

    Returns:
        LimitPathSample
    """
    if classify(boundary) != Classification.TRANSIENT:
        raise ConfigurationError(f"{boundary.describe()} is recurrent; there is no transient limit path")
    record_threshold = 4.0 * dt if record_threshold is None else record_threshold

    x = float(sample_clock(clock, rng))
    skeleton, attempts = sample_conditioned_skeleton(
        boundary, x, None, rng, max_attempts=max_attempts, record_threshold=record_threshold
    )
    fills = fill_excursions(skeleton, rng, dt, max_points=max_points)
    sign = 1 if rng.random() < 0.5 else -1
    times, values = sample_bessel3(tail_duration, dt, rng)
    logger.debug(f"Transient path: x={x:.4g}, τ_x={skeleton.values[-1]:.4g}, "
                 f"{len(fills)} excursions, {attempts} attempts")
    return LimitPathSample(
        clock=x,
        skeleton=skeleton,
        fills=fills,
        sign=sign,
        bessel_times=times,
        bessel_values=values,
        attempts=attempts,
    )


def _transient_block(rng, n, boundary, clock, options):
    return [sample_transient_path(boundary, clock, rng, **options) for _ in range(n)]


def sample_transient_paths(
    boundary: BoundaryFunction,
    clock: ClockDistribution,
    n_samples: int,
    streams: StreamFactory,
    workers: int = 1,
    block_size: int = 8,
    **options,
) -> List[LimitPathSample]:
    """Independent transient paths, deterministic for any worker count"""
    worker = partial(_transient_block, boundary=boundary, clock=clock, options=options)
    blocks = run_blocks(worker, n_samples, streams, workers, block_size=block_size)
    return [sample for block in blocks for sample in block]


# ---------------------------------------------------------------------------
# Q-marginals (recurrent boundaries)
# ---------------------------------------------------------------------------

def _ratio_stderr(numerator: np.ndarray, denominator: np.ndarray, n: int) -> Tuple[float, float]:
    """Ratio Σa/Σb over n draws (zero-padded) and its delta-method standard error"""
    total_b = float(np.sum(denominator))
    if total_b <= 0:
        return math.nan, math.nan
    ratio = float(np.sum(numerator)) / total_b
    residual = numerator - ratio * denominator
    mean_b = total_b / n
    variance = (np.sum(residual ** 2) / n - (np.sum(residual) / n) ** 2) / n
    return ratio, math.sqrt(max(variance, 0.0)) / mean_b


@dataclass
class PrelimitEnsemble:
    """
    τ_h of paths surviving O_h with their pre-limit weights.

    weight is the bracket-averaged indicator of O_h, psi the estimate of
    P(O_{t−h}(h, y)) at y = τ_h; Q-weights are weight·psi.
    """
    h: float
    t: float
    y: np.ndarray
    weight: np.ndarray
    psi: np.ndarray
    n_paths: int
    method: EstimationMethod

    @property
    def q_weight(self) -> np.ndarray:
        return self.weight * self.psi

    @property
    def normalizer(self) -> float:
        """P̂(O_t) = E[1{O_h} P(O_{t−h}(h, τ_h))]"""
        return float(np.sum(self.q_weight) / self.n_paths)

    def q_mass(self, y_lo: float, y_hi: float = math.inf) -> Tuple[float, float]:
        """Pre-limit Q-mass of τ_h in [y_lo, y_hi) and its standard error"""
        inside = (self.y >= y_lo) & (self.y < y_hi)
        return _ratio_stderr(self.q_weight * inside, self.q_weight, self.n_paths)


def _survivors_block(rng, n, grid, g_at):
    values = sample_exact_ensemble(grid, n, rng)
    upper, lower = first_failures(values, g_at)
    m = grid.size - 1
    weight = 0.5 * ((upper > m).astype(float) + (lower >= m))
    keep = weight > 0
    return values[keep, -1], weight[keep]


def _stage_one(
    boundary: BoundaryFunction,
    h: float,
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    grid_points: int = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """τ_h and bracket weights of the paths surviving O_h"""
    grid = default_grid(boundary, h, grid_points)
    blocks = run_blocks(
        partial(_survivors_block, grid=grid, g_at=boundary.g(grid)),
        n_paths, streams.child("stage_one"), workers,
    )
    y = np.concatenate([b[0] for b in blocks])
    weight = np.concatenate([b[1] for b in blocks])
    if y.size == 0:
        raise FeasibilityError(f"no path survives O_h at h={h:g}", hint="raise n_paths or lower h")
    return y, weight


def _prelimit_ensemble(
    boundary: BoundaryFunction,
    h: float,
    t: float,
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    grid_points: int = None,
    stage_one: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> PrelimitEnsemble:
    """
    Two-stage pre-limit estimate: τ_h on O_h, then P(O_{t−h}(h, y)) by common paths.

    The second stage uses the one-jump decomposition when fewer than
    RARE_EVENT_MIN_HITS paths survive even at the largest y.
    """
    n_paths = _check_paths(n_paths)
    if not t > h:
        raise ConfigurationError(f"pre-limit horizon t={t:g} must exceed h={h:g}")
    if stage_one is None:
        stage_one = _stage_one(boundary, h, n_paths, streams, workers, grid_points)
    y, weight = stage_one

    stage_two = streams.child(f"stage_two/{t:g}")
    method = EstimationMethod.DIRECT_BRACKET
    shifted = estimate_shifted_survival(
        boundary, h, [float(y.max())], t - h, n_paths, stage_two, workers, grid_points=grid_points
    )
    psi = shifted.at(y)
    if shifted.point[-1] * n_paths < get_simulation_setting('RARE_EVENT_MIN_HITS'):
        logger.info(f"⚠ Shifted survival is rare at t={t:g}, switching to the one-jump decomposition")
        method = EstimationMethod.ONE_JUMP
        y_eval = np.geomspace(max(float(y.min()), 1e-12), float(y.max()), 128)
        shifted = estimate_shifted_survival(
            boundary, h, y_eval, t - h, n_paths, stage_two, workers,
            method=method, grid_points=grid_points,
        )
        psi = shifted.at(y)

    return PrelimitEnsemble(
        h=float(h), t=float(t), y=y, weight=weight, psi=psi, n_paths=n_paths, method=method
    )


def default_q_edges(boundary: BoundaryFunction, h: float, bins: int = 24) -> np.ndarray:
    """Geometric bin edges from g(h) to 100·g(h)"""
    lo = max(float(boundary.g(h)), 1e-6)
    return np.geomspace(lo, 100.0 * lo, bins + 1)


@dataclass
class QMarginalEstimate:
    """Binned density of τ_h under Q relative to P(τ_h ∈ dy; O_h)"""
    h: float
    y_edges: np.ndarray
    q_hat: np.ndarray
    stderr: np.ndarray
    mass: np.ndarray
    mass_below: float
    mass_above: float
    t_prelimit: float
    n_paths: int
    survivors: int
    method: EstimationMethod
    tv_history: List[float] = field(default_factory=list)
    tail_ratio: float = math.nan

    @property
    def y_mid(self) -> np.ndarray:
        return np.sqrt(self.y_edges[1:] * self.y_edges[:-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "y_lo": self.y_edges[:-1],
            "y_hi": self.y_edges[1:],
            "y": self.y_mid,
            "q_hat": self.q_hat,
            "stderr": self.stderr,
            "mass": self.mass,
        })

    def to_dict(self) -> Dict:
        return {
            "h": self.h,
            "t_prelimit": self.t_prelimit,
            "n_paths": self.n_paths,
            "survivors": self.survivors,
            "method": self.method.value,
            "mass_below": self.mass_below,
            "mass_above": self.mass_above,
            "tv_history": self.tv_history,
            "tail_ratio": self.tail_ratio,
        }


def _bin_prelimit(ensemble: PrelimitEnsemble, edges: np.ndarray):
    n = ensemble.n_paths
    q_hat, stderr, mass = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        inside = (ensemble.y >= lo) & (ensemble.y < hi)
        restricted = float(np.sum(ensemble.weight * inside)) / n
        q_mass, q_se = ensemble.q_mass(lo, hi)
        mass.append(q_mass)
        if restricted > 0:
            q_hat.append(q_mass / restricted)
            stderr.append(q_se / restricted)
        else:
            q_hat.append(math.nan)
            stderr.append(math.nan)
    below, _ = ensemble.q_mass(-math.inf, edges[0])
    above, _ = ensemble.q_mass(edges[-1])
    return np.array(q_hat), np.array(stderr), np.array(mass), below, above


def _tail_envelope_ratio(ensemble: PrelimitEnsemble, y_star: float) -> float:
    """
    Observed Q-mass above y* over the y^{-3/2} envelope fitted on [y*/2, 2y*].

    A density d (y/y*)^{-3/2} puts mass sqrt(2)·d·y* on the window and 2·d·y*
    above y*, so the envelope tail mass is sqrt(2) times the window mass.
    """
    window, _ = ensemble.q_mass(0.5 * y_star, 2.0 * y_star)
    tail, _ = ensemble.q_mass(y_star)
    if not window > 0:
        logger.warning(f"⚠ No Q-mass near y*={y_star:g}; tail envelope ratio undefined")
        return math.nan
    return tail / (math.sqrt(2.0) * window)


def estimate_q_marginal(
    boundary: BoundaryFunction,
    h: float,
    y_edges: Optional[Sequence[float]],
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    t_prelimit: Optional[float] = None,
    tv_tolerance: float = 0.02,
    max_doublings: int = 3,
    grid_points: int = None,
) -> QMarginalEstimate:
    """
    Q-marginal of τ_h for a recurrent boundary.

    The pre-limit horizon starts at t_prelimit (20h by default) and is doubled
    until the binned Q-masses move by less than tv_tolerance in total
    variation, or max_doublings is reached.

    Args:
        boundary: Recurrent boundary
        h: Local time of the marginal
        y_edges: Increasing bin edges above g(h)∨0 (default_q_edges when None)
        n_paths: Paths per stage
        streams: Random stream
        workers: Worker processes
        t_prelimit: First pre-limit horizon
        tv_tolerance: Total-variation stopping rule
        max_doublings: Maximum number of doublings of t

    Returns:
        QMarginalEstimate (monotone in y by construction)
    """
    if classify(boundary) != Classification.RECURRENT:
        raise ConfigurationError(f"{boundary.describe()} is transient; use the clock for Q(τ_h < ∞)")
    edges = default_q_edges(boundary, h) if y_edges is None else np.asarray(y_edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigurationError("y_edges must be increasing")
    if edges[0] < max(float(boundary.g(h)), 0.0):
        raise ConfigurationError(f"y_edges must lie above g(h)∨0 = {max(float(boundary.g(h)), 0.0):g}")

    t = 20.0 * h if t_prelimit is None else float(t_prelimit)
    stage_one = _stage_one(boundary, h, _check_paths(n_paths), streams, workers, grid_points)
    history = []
    previous = None
    for doubling in range(max_doublings + 1):
        ensemble = _prelimit_ensemble(
            boundary, h, t, n_paths, streams, workers, grid_points, stage_one=stage_one
        )
        q_hat, stderr, mass, below, above = _bin_prelimit(ensemble, edges)
        masses = np.concatenate(([below], mass, [above]))
        if previous is not None:
            tv = 0.5 * float(np.sum(np.abs(masses - previous)))
            history.append(tv)
            logger.info(f"Q-marginal h={h:g}: t={t:g}, TV change {tv:.4f}")
            if tv < tv_tolerance:
                break
        previous = masses
        if doubling < max_doublings:
            t *= 2.0
    else:
        if history and history[-1] >= tv_tolerance:
            logger.warning(f"⚠ Q-marginal did not settle below TV {tv_tolerance} by t={t:g}")

    tail_ratio = _tail_envelope_ratio(ensemble, 20.0 * float(boundary.g(h)))
    logger.info(f"✓ Q-marginal h={h:g} at t={t:g}: {ensemble.y.size} survivors, "
                f"tail ratio {tail_ratio:.3g}")
    return QMarginalEstimate(
        h=float(h),
        y_edges=edges,
        q_hat=q_hat,
        stderr=stderr,
        mass=mass,
        mass_below=below,
        mass_above=above,
        t_prelimit=t,
        n_paths=ensemble.n_paths,
        survivors=int(ensemble.y.size),
        method=ensemble.method,
        tv_history=history,
        tail_ratio=tail_ratio,
    )


# ---------------------------------------------------------------------------
# Dominant-factor form of q_h
# ---------------------------------------------------------------------------

def estimate_shifted_phi(
    boundary: BoundaryFunction,
    h: float,
    y: float,
    t: float,
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    grid_points: int = None,
) -> Tuple[float, float]:
    """Φ^h_y(t) = ∫₀ᵗ P(O_s(h, y)) ds and its standard error"""
    n_paths = _check_paths(n_paths)
    grid = default_grid(boundary, t, grid_points)
    g_shift = boundary.shifted(h, y).g(grid)
    upper, lower = survival_profile(grid, g_shift, n_paths, streams, workers)
    point = 0.5 * (upper + lower) / n_paths
    stderr = np.sqrt(point * (1.0 - point) / n_paths)
    return float(_cumulative_trapezoid(grid, point)[-1]), float(_cumulative_trapezoid(grid, stderr)[-1])


def balance_time(boundary: BoundaryFunction, a: float) -> float:
    """t(A) with g(t(A)) = 1 + 2/A"""
    return float(boundary.f(1.0 + 2.0 / a))


@dataclass
class FinitenessIntegral:
    h: float
    y: float
    a: float
    start: float
    shifted_value: float
    upper_value: float
    bound: float

    def to_dict(self) -> Dict:
        return asdict(self)


def _shift_integral(boundary: BoundaryFunction, h: float, y: float, start: float) -> float:
    """∫_start^∞ (2K/sqrt(g(s+h) − y) − 2K/sqrt(g(s))) ds, integrand in u = ln s"""
    moved = boundary.shifted(h, y)

    def integrand(u):
        s = math.exp(u)
        g_s = float(boundary.g(s))
        shifted = float(moved.g(s))
        # difference of inverse square roots without cancellation in the roots
        numerator = g_s - shifted
        denominator = math.sqrt(shifted * g_s) * (math.sqrt(shifted) + math.sqrt(g_s))
        return 2.0 * K * s * numerator / denominator

    u0 = math.log(start)
    return integrate_chunked(integrand, u0, u0 + SHIFT_INTEGRAL_SPAN, what="shift integral")


def finiteness_integral(boundary: BoundaryFunction, h: float, y: float, a: float = None) -> FinitenessIntegral:
    """
    The shift integral of q_h and its majorant.

    shifted_value: ∫_T^∞ (2K/sqrt(g(s+h)−y) − 2K/sqrt(g(s))) ds
    upper_value:   ∫_T^∞ (1/sqrt(g(s)−y) − 1/sqrt(g(s))) ds
    bound:         f(y) / (2 sqrt(y(1 − 1/A)))
    with T = f(Ay)∨t(A).
    """
    a = get_simulation_setting('Q_MARGINAL_A') if a is None else float(a)
    if a <= 3:
        raise ConfigurationError("A must exceed 3")
    if not y > max(float(boundary.g(h)), 0.0):
        raise ConfigurationError(f"y must exceed g(h)∨0 = {max(float(boundary.g(h)), 0.0):g}")
    start = max(float(boundary.f(a * y)), balance_time(boundary, a))

    def log_upper(u):
        log_g = boundary.log_g(u)
        ratio = math.exp(math.log(y) - log_g)
        return u - 0.5 * log_g + math.log(math.expm1(-0.5 * math.log1p(-ratio)))

    return FinitenessIntegral(
        h=float(h),
        y=float(y),
        a=a,
        start=start,
        shifted_value=_shift_integral(boundary, h, y, start),
        upper_value=integrate_log_log_to_infinity(log_upper, math.log(start), what="finiteness integral"),
        bound=float(boundary.f(y)) / (2.0 * math.sqrt(y * (1.0 - 1.0 / a))),
    )


@dataclass
class DominantFactor:
    """q_h(y) without the ρ-terms"""
    h: float
    y: float
    a: float
    start: float
    exponent_head: float
    shift_integral: float
    phi_one: float
    phi_shifted: float
    value: float

    def to_dict(self) -> Dict:
        return asdict(self)


def q_dominant_factor(
    boundary: BoundaryFunction,
    h: float,
    y: float,
    phi_one: float,
    phi_shifted: float,
    a: float = None,
) -> DominantFactor:
    """
    Φ^h_y(T)/Φ(1) · exp(−∫_1^T 2K/sqrt(g) + ∫_T^∞ (2K/sqrt(g(s+h)−y) − 2K/sqrt(g(s))) ds)

    with T = f(Ay)∨t(A). phi_one = Φ(1) and phi_shifted = Φ^h_y(T) are
    supplied by the caller (Monte Carlo).
    """
    if phi_one <= 0 or phi_shifted <= 0:
        raise ConfigurationError("Φ(1) and Φ^h_y(T) must be positive")
    a = get_simulation_setting('Q_MARGINAL_A') if a is None else float(a)
    start = max(float(boundary.f(a * y)), balance_time(boundary, a))
    head = integrate_log_space(
        lambda u: math.log(2.0 * K) + u - 0.5 * boundary.log_g(u),
        0.0, math.log(start), what="exponent integral",
    )
    shift = _shift_integral(boundary, h, y, start)
    return DominantFactor(
        h=float(h),
        y=float(y),
        a=a,
        start=start,
        exponent_head=head,
        shift_integral=shift,
        phi_one=float(phi_one),
        phi_shifted=float(phi_shifted),
        value=phi_shifted / phi_one * math.exp(shift - head),
    )
