"""
Renewal ODE

φ and Φ are linked by the exact identity

    φ(t) − (2K/sqrt(a)) Φ(t) = H(t),    a = g(t)∨1,

with H(t) = e^{-rt} S^a(t) − r² ∫₀ᵗ (t−v) S^a(v) e^{-rv} dv, r = 2K/sqrt(a),
S^a the survival of the path truncated at a. Dropping H gives the renewal
solution Φ(t) = Φ(t₀) exp(∫ 2K/sqrt(g) + ∫ ρ), ρ = H/Φ, and the asymptotic
prediction φ(t) ≈ 2KΦ(t)/sqrt(g(t)).
"""

import logging
import math
from dataclasses import dataclass, asdict
from functools import partial
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .boundary import BoundaryFunction, Classification, classify
from .conf import get_simulation_setting
from .exceptions import ConfigurationError, FeasibilityError
from .quadrature import integrate_log_log_to_infinity, integrate_log_space
from .random_streams import StreamFactory, run_blocks
from .stable_subordinator import K, TruncationSpec, levy_tail, sample_truncated_ensemble
from .survival_mc import (
    build_survival_curve,
    check_grid,
    default_grid,
    first_failures,
    _survival_times,
)

logger = logging.getLogger(__name__)

LOG_TWO_K = math.log(2.0 * K)


def _log_rate_integrand(boundary: BoundaryFunction):
    # u = ln s: 2K g(s)^{-1/2} ds = exp(ln 2K + u − ½ ln g(e^u)) du
    return lambda u: LOG_TWO_K + u - 0.5 * boundary.log_g(u)


def exponent_integral(boundary: BoundaryFunction, t0: float, t: float) -> float:
    """∫_{t0}^t 2K / sqrt(g(s)) ds"""
    if float(boundary.g(t0)) <= 0:
        raise ConfigurationError(f"g({t0:g}) ≤ 0: the renewal base point must lie above the floor")
    return integrate_log_space(
        _log_rate_integrand(boundary), math.log(t0), math.log(t), what="exponent integral"
    )


def exponent_integral_limit(boundary: BoundaryFunction, t0: float) -> float:
    """∫_{t0}^∞ 2K / sqrt(g(s)) ds; +inf for recurrent boundaries"""
    if float(boundary.g(t0)) <= 0:
        raise ConfigurationError(f"g({t0:g}) ≤ 0: the renewal base point must lie above the floor")
    log_rate = _log_rate_integrand(boundary)
    u0 = math.log(t0)
    head = 0.0
    if u0 < 1.0:
        head = integrate_log_space(log_rate, u0, 1.0, what="exponent integral")
        u0 = 1.0
    return head + integrate_log_log_to_infinity(log_rate, u0, what="exponent integral tail")


@dataclass
class RenewalSolution:
    """Φ(t) = Φ0 exp(∫_{t0}^t 2K/sqrt(g) + ∫_{t0}^t ρ) on a t-grid"""
    t0: float
    phi0: float
    t_grid: np.ndarray
    phi_solution: np.ndarray
    exponent_integral: np.ndarray
    rho_integral: np.ndarray

    def value_at(self, t: float) -> float:
        """Φ_solution at t (log-linear between grid points)"""
        if t < self.t_grid[0] or t > self.t_grid[-1]:
            raise ConfigurationError(f"t={t:g} outside the solution range "
                                     f"[{self.t_grid[0]:g}, {self.t_grid[-1]:g}]")
        return float(np.exp(np.interp(t, self.t_grid, np.log(self.phi_solution))))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.t_grid,
            "Phi_solution": self.phi_solution,
            "exponent_integral": self.exponent_integral,
            "rho_integral": self.rho_integral,
        })


def solve_renewal(
    boundary: BoundaryFunction,
    t0: float,
    phi0: float,
    t_grid: Sequence[float],
    rho: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
) -> RenewalSolution:
    """
    Closed-form solution of the renewal ODE from a base point.

    Args:
        boundary: Boundary
        t0: Base point, t0 ≥ 1
        phi0: Φ(t0) > 0
        t_grid: Evaluation points ≥ t0 (t0 is prepended when missing)
        rho: Optional tabulated residual (t values, ρ values); 0 when omitted

    Returns:
        RenewalSolution with Φ_solution(t0) = phi0
    """
    if t0 < 1.0:
        raise ConfigurationError("renewal base point t0 must be ≥ 1")
    if phi0 <= 0:
        raise ConfigurationError("Φ(t0) must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < t0) or np.any(np.diff(t_grid) <= 0):
        raise ConfigurationError("t_grid must be increasing and ≥ t0")
    if t_grid[0] != t0:
        t_grid = np.concatenate(([t0], t_grid))

    increments = [exponent_integral(boundary, a, b) for a, b in zip(t_grid[:-1], t_grid[1:])]
    exponent = np.concatenate(([0.0], np.cumsum(increments)))

    rho_integral = np.zeros_like(t_grid)
    if rho is not None:
        rho_t, rho_v = (np.asarray(v, dtype=float) for v in rho)
        fine = np.union1d(t_grid, rho_t[(rho_t > t0) & (rho_t < t_grid[-1])])
        values = np.interp(fine, rho_t, rho_v)
        cumulative = np.concatenate(([0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(fine))))
        rho_integral = cumulative[np.searchsorted(fine, t_grid)]

    return RenewalSolution(
        t0=float(t0),
        phi0=float(phi0),
        t_grid=t_grid,
        phi_solution=phi0 * np.exp(exponent + rho_integral),
        exponent_integral=exponent,
        rho_integral=rho_integral,
    )


@dataclass
class PhiPrediction:
    t: float
    value: float
    plateau: Optional[float] = None

    def to_dict(self) -> Dict:
        return asdict(self)


def predict_phi(boundary: BoundaryFunction, solution: RenewalSolution, t: float) -> PhiPrediction:
    """
    Asymptotic prediction 2KΦ(t)/sqrt(g(t)); transient boundaries also get
    the plateau version 2KΦ(∞)/sqrt(g(t)).
    """
    phi = solution.value_at(t)
    root_g = math.sqrt(float(boundary.g(t)))
    plateau = None
    if classify(boundary) == Classification.TRANSIENT:
        limit = exponent_integral_limit(boundary, solution.t0)
        if math.isfinite(limit):
            plateau = 2.0 * K * solution.phi0 * math.exp(limit) / root_g
    return PhiPrediction(t=float(t), value=2.0 * K * phi / root_g, plateau=plateau)


# ---------------------------------------------------------------------------
# Residual
# ---------------------------------------------------------------------------

@dataclass
class ResidualDiagnostic:
    """Estimate of H(t), ρ = H/Φ and the exact-identity check"""
    t: float
    H_hat: float
    H_stderr: float
    rho_hat: float
    smallness: float
    first_term: float
    second_term: float
    phi_hat: float
    phi_stderr: float
    Phi_hat: float
    Phi_stderr: float
    rate: float
    identity_gap: float
    identity_se: float
    identity_band: float
    n_paths: int

    def to_dict(self) -> Dict:
        return asdict(self)


def _residual_block(rng, n, grid, g_at, spec, rate, nodes):
    ensemble = sample_truncated_ensemble(spec, grid, n, rng)
    upper, lower = first_failures(ensemble.values, g_at)
    t = grid[-1]
    up_time, low_time, up_alive, low_alive = _survival_times(grid, upper, lower)

    weights = np.full(nodes.size, nodes[1] - nodes[0])
    weights[[0, -1]] *= 0.5
    kernel = weights * (t - nodes) * np.exp(-rate * nodes)

    terms = []
    for alive_until, alive in ((up_time, up_alive), (low_time, low_alive)):
        first = math.exp(-rate * t) * alive
        survived = nodes[None, :] < alive_until[:, None]
        second = rate ** 2 * (survived * kernel).sum(axis=1)
        terms.append((first, second))
    first = 0.5 * (terms[0][0] + terms[1][0])
    second = 0.5 * (terms[0][1] + terms[1][1])
    h_values = first - second
    return np.array([first.sum(), second.sum(), h_values.sum(), (h_values ** 2).sum()])


def estimate_residual(
    boundary: BoundaryFunction,
    t: float,
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    nodes: int = 64,
) -> ResidualDiagnostic:
    """
    Estimate H(t) with a = g(t)∨1 and check φ̂ − rΦ̂ = Ĥ.

    H uses truncated paths and a `nodes`-point tabulation of the clock
    integral; φ̂ and Φ̂ come from an independent direct survival curve.

    Args:
        boundary: Boundary
        t: Horizon, t ≥ f(0)
        n_paths: Paths for each ensemble
        streams: Random stream ('residual' and 'curve' children are used)
        workers: Worker processes
        nodes: Tabulation nodes of the inner integral

    Returns:
        ResidualDiagnostic
    """
    if t < boundary.f0:
        raise ConfigurationError(f"residual needs t ≥ f(0) = {boundary.f0:g}")
    grid = check_grid(default_grid(boundary, t), t, boundary.f0)
    cap = max(float(boundary.g(t)), 1.0)
    rate = float(levy_tail(cap))
    spec = TruncationSpec(cap=cap, small_cut=get_simulation_setting('SMALL_JUMP_CUT'))
    worker = partial(
        _residual_block, grid=grid, g_at=boundary.g(grid), spec=spec, rate=rate,
        nodes=np.linspace(0.0, t, nodes),
    )
    sums = np.sum(run_blocks(worker, n_paths, streams.child("residual"), workers), axis=0)
    first, second, h_hat = sums[0] / n_paths, sums[1] / n_paths, sums[2] / n_paths
    h_se = math.sqrt(max(sums[3] / n_paths - h_hat ** 2, 0.0) / n_paths)

    curve = build_survival_curve(
        boundary, [t], n_paths, streams.child("curve"), workers, rare_event_policy=False
    )
    estimate = curve.estimates[-1]
    phi_total = float(curve.phi_integral[-1])
    if estimate.point * n_paths < 1 or phi_total <= 0:
        raise FeasibilityError(f"no surviving paths at t={t:g}; cannot estimate the residual")

    rho = h_hat / phi_total
    identity_gap = estimate.point - rate * phi_total - h_hat
    identity_se = math.sqrt(
        estimate.stderr ** 2 + (rate * float(curve.phi_stderr[-1])) ** 2 + h_se ** 2
    )
    identity_band = 0.5 * estimate.gap + rate * float(curve.phi_band[-1])

    logger.info(f"Residual at t={t:g}: H={h_hat:.4g}±{h_se:.2g}, identity gap "
                f"{identity_gap:.3g} (se {identity_se:.2g})")
    return ResidualDiagnostic(
        t=float(t),
        H_hat=float(h_hat),
        H_stderr=h_se,
        rho_hat=float(rho),
        smallness=float(rho * math.sqrt(max(float(boundary.g(t)), 0.0))),
        first_term=float(first),
        second_term=float(second),
        phi_hat=estimate.point,
        phi_stderr=estimate.stderr,
        Phi_hat=phi_total,
        Phi_stderr=float(curve.phi_stderr[-1]),
        rate=rate,
        identity_gap=float(identity_gap),
        identity_se=identity_se,
        identity_band=float(identity_band),
        n_paths=int(n_paths),
    )
