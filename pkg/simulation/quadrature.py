"""
Adaptive Quadrature Helpers

Thin wrappers around scipy.integrate.quad that turn non-convergence into
QuadratureError and provide integration in log and log-log coordinates for
integrands spanning many decades (boundary integrals up to e^(10^6)).
"""

import logging
import math
import warnings
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .conf import get_simulation_setting
from .exceptions import QuadratureError

logger = logging.getLogger(__name__)

# widest chunk integrated in one quad call (log coordinates)
LOG_CHUNK_WIDTH = 8.0


def quad_checked(
    func: Callable[[float], float],
    a: float,
    b: float,
    what: str = "integral",
    points: Optional[Sequence[float]] = None,
    epsabs: Optional[float] = None,
    epsrel: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Adaptive Gauss-Kronrod quadrature with convergence checking.

    Args:
        func: Integrand
        a: Lower limit
        b: Upper limit (may be np.inf)
        what: Label used in error messages
        points: Optional break points inside (a, b)
        epsabs: Absolute tolerance (settings default 1e-10)
        epsrel: Relative tolerance (settings default 1e-8)

    Returns:
        (value, absolute error estimate)

    Raises:
        QuadratureError: on non-convergence or non-finite result
    """
    if b == a:
        return 0.0, 0.0
    epsabs = get_simulation_setting('QUADRATURE_EPSABS') if epsabs is None else epsabs
    epsrel = get_simulation_setting('QUADRATURE_EPSREL') if epsrel is None else epsrel
    limit = get_simulation_setting('QUADRATURE_LIMIT')

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(
                func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, points=points
            )
        except (integrate.IntegrationWarning, OverflowError, FloatingPointError) as exc:
            raise QuadratureError(f"{what} on [{a:g}, {b:g}] did not converge: {exc}")

    if not math.isfinite(value):
        raise QuadratureError(f"{what} on [{a:g}, {b:g}] is not finite")
    return float(value), float(abserr)


def integrate_chunked(
    integrand: Callable[[float], float],
    u_lo: float,
    u_hi: float,
    what: str = "integral",
) -> float:
    """Integrate a (possibly signed) integrand over [u_lo, u_hi] in LOG_CHUNK_WIDTH pieces"""
    if u_hi <= u_lo:
        return 0.0
    edges = np.append(np.arange(u_lo, u_hi, LOG_CHUNK_WIDTH), u_hi)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, _ = quad_checked(integrand, lo, hi, what=what)
        total += value
    return total


def integrate_log_space(
    log_integrand: Callable[[float], float],
    u_lo: float,
    u_hi: float,
    what: str = "integral",
) -> float:
    """
    Integrate exp(log_integrand(u)) du over [u_lo, u_hi] in fixed-width chunks.

    Used with u = ln s so that ∫ F(s) ds becomes ∫ F(e^u) e^u du.
    """
    return integrate_chunked(lambda u: math.exp(log_integrand(u)), u_lo, u_hi, what=what)


def integrate_log_log_to_infinity(
    log_integrand: Callable[[float], float],
    u_lo: float,
    v_max: float = math.log(1e8),
    what: str = "integral",
) -> float:
    """
    Integrate exp(log_integrand(u)) du over [u_lo, ∞) with u = e^v.

    The part beyond v_max is extrapolated from the local exponential decay
    rate of the v-integrand; a non-decaying integrand gives +inf.

    Args:
        log_integrand: log of the integrand in the u variable
        u_lo: Lower limit, u_lo > 0
        v_max: Cut-off in v = ln u beyond which the tail is extrapolated
        what: Label used in error messages

    Returns:
        Integral value (np.inf when divergent)
    """
    if u_lo <= 0:
        raise ValueError("u_lo must be positive for log-log integration")

    def log_v_integrand(v: float) -> float:
        return log_integrand(math.exp(v)) + v

    v_lo = math.log(u_lo)
    body = integrate_log_space(log_v_integrand, v_lo, v_max, what=what)

    decay = log_v_integrand(v_max - 1.0) - log_v_integrand(v_max)
    if decay <= 1e-3:
        logger.info(f"{what}: integrand does not decay (rate {decay:.2e}), treating as divergent")
        return math.inf
    tail = math.exp(log_v_integrand(v_max)) / decay
    return body + tail
