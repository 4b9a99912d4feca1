"""
Entropic Repulsion

Under Q the local time stays well below f: the repulsion envelope is the set
of w → ∞ with Q(τ_h ≥ w(h) g(h)) → 1, characterized by

    J_w(h) = ∫_h^{f(g(h) w(h))} g(s)^{-1/2} ds → 0.

J_w is evaluated in ln ln s so that h can reach e^(10^5); the Monte Carlo
check reuses the pre-limit ensemble of the Q-marginals.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .boundary import BoundaryFunction, BoundaryKind, Classification, classify
from .conf import get_simulation_setting
from .exceptions import ConfigurationError, EnvelopeError
from .quadrature import integrate_log_space
from .random_streams import StreamFactory
from .limit_process import _prelimit_ensemble

logger = logging.getLogger(__name__)

# recurrent analysis covers γ in (4/5, 1]
ANALYZED_GAMMA_RANGE = (0.8, 1.0)
OUTSIDE_RANGE_TAG = "outside-analyzed-range"


class Verdict(str, Enum):
    IN_ENVELOPE = "InEnvelope"
    NOT_IN_ENVELOPE = "NotInEnvelope"
    INCONCLUSIVE = "Inconclusive"


class WKind(str, Enum):
    POWER = "power"                  # w(h) = h^a
    LOG_POWER = "log_power"          # w(h) = ln^b h
    EXP_LOG_POWER = "exp_log_power"  # w(h) = exp(ln^c h)
    CONSTANT = "constant"            # w(h) = c


@dataclass(frozen=True)
class WFunction:
    """Repulsion scale w, evaluated through ln w as a function of ln h"""
    kind: WKind
    parameter: float

    def log_w(self, log_h: float) -> float:
        kind = WKind(self.kind)
        if kind == WKind.POWER:
            return self.parameter * log_h
        if kind == WKind.LOG_POWER:
            return self.parameter * math.log(log_h)
        if kind == WKind.EXP_LOG_POWER:
            return log_h ** self.parameter
        return math.log(self.parameter)

    def w(self, h: float) -> float:
        return math.exp(self.log_w(math.log(h)))

    def describe(self) -> str:
        kind = WKind(self.kind)
        if kind == WKind.POWER:
            return f"h^{self.parameter:g}"
        if kind == WKind.LOG_POWER:
            return f"ln^{self.parameter:g}(h)"
        if kind == WKind.EXP_LOG_POWER:
            return f"exp(ln^{self.parameter:g}(h))"
        return f"{self.parameter:g}"

    def check_membership(self, log_h_grid: Sequence[float]) -> None:
        """w ≥ 1, nondecreasing and unbounded (grid check)"""
        values = np.array([self.log_w(u) for u in log_h_grid])
        if WKind(self.kind) == WKind.CONSTANT or not self.parameter > 0:
            raise EnvelopeError(f"w = {self.describe()} does not tend to infinity")
        if np.any(values < 0):
            raise EnvelopeError(f"w = {self.describe()} drops below 1 on the grid")
        if np.any(np.diff(values) < 0):
            raise EnvelopeError(f"w = {self.describe()} is not nondecreasing on the grid")


def default_log_h_grid(points: int = 41) -> np.ndarray:
    """ln h geometric on [ln 10², 10⁵]"""
    return np.geomspace(math.log(1e2), 1e5, points)


def envelope_integral(boundary: BoundaryFunction, w: WFunction, log_h: float) -> float:
    """J_w(h) at h = e^{log_h}"""
    log_upper_level = boundary.log_g(log_h) + w.log_w(log_h)
    log_upper = float(boundary.log_f(log_upper_level))
    if log_upper <= log_h:
        return 0.0
    # s = exp(exp(v)): g(s)^{-1/2} ds = exp(v + e^v − ½ ln g) dv
    return integrate_log_space(
        lambda v: v + math.exp(v) - 0.5 * boundary.log_g(math.exp(v)),
        math.log(log_h), math.log(log_upper), what="envelope integral",
    )


def envelope_boundary_gamma(gamma: float, w: WFunction) -> Dict:
    """
    Closed rule for f(t) = sqrt(t)/ln^γ(t): w is in the envelope iff ln w(h) = o(ln^γ h).

    Returns:
        dict with 'verdict' and 'note'
    """
    lo, hi = ANALYZED_GAMMA_RANGE
    if not lo < gamma <= hi:
        return {"verdict": Verdict.INCONCLUSIVE, "note": f"γ={gamma:g} outside ({lo:g}, {hi:g}]"}
    kind = WKind(w.kind)
    if kind == WKind.POWER:
        # ln w = a ln h is never o(ln^γ h) for γ ≤ 1
        return {"verdict": Verdict.NOT_IN_ENVELOPE, "note": "ln w ≍ ln h"}
    if kind == WKind.LOG_POWER:
        return {"verdict": Verdict.IN_ENVELOPE, "note": "ln w ≍ ln ln h"}
    if kind == WKind.EXP_LOG_POWER:
        if w.parameter < gamma:
            return {"verdict": Verdict.IN_ENVELOPE, "note": f"ln w = ln^{w.parameter:g} h"}
        return {"verdict": Verdict.NOT_IN_ENVELOPE, "note": f"ln w = ln^{w.parameter:g} h, c ≥ γ"}
    return {"verdict": Verdict.INCONCLUSIVE, "note": "constant w is not admissible"}


@dataclass
class EnvelopeVerdict:
    w: str
    log_h_grid: np.ndarray
    values: np.ndarray
    verdict: Verdict
    closed_form: Optional[Verdict]
    lower_threshold: float
    upper_threshold: float
    tags: List[str] = field(default_factory=list)

    @property
    def agrees(self) -> Optional[bool]:
        """Numeric vs analytic verdict (None when either is missing or inconclusive)"""
        if self.closed_form in (None, Verdict.INCONCLUSIVE) or self.verdict == Verdict.INCONCLUSIVE:
            return None
        return self.verdict == self.closed_form

    @property
    def limit(self) -> float:
        """Last computed value of J_w"""
        return float(self.values[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "log_h": self.log_h_grid,
            "J_w": self.values,
            "verdict": self.verdict.value,
        })

    def to_dict(self) -> Dict:
        return {
            "w": self.w,
            "verdict": self.verdict.value,
            "closed_form": self.closed_form.value if self.closed_form else None,
            "limit": self.limit,
            "lower_threshold": self.lower_threshold,
            "upper_threshold": self.upper_threshold,
            "tags": self.tags,
        }


def _numeric_verdict(log_h: np.ndarray, values: np.ndarray, lower: float, upper: float) -> Verdict:
    last = values[log_h >= log_h[-1] / 10.0]
    if np.all(last < lower) and np.all(np.diff(last) <= 0):
        return Verdict.IN_ENVELOPE
    if np.all(last >= upper):
        return Verdict.NOT_IN_ENVELOPE
    return Verdict.INCONCLUSIVE


def envelope_criterion(
    boundary: BoundaryFunction,
    w: WFunction,
    log_h_grid: Optional[Sequence[float]] = None,
) -> EnvelopeVerdict:
    """
    Evaluate J_w on a ln h grid and decide membership in the envelope.

    InEnvelope: J_w below ENVELOPE_LOWER_THRESHOLD and decreasing over the
    last decade of ln h; NotInEnvelope: J_w ≥ ENVELOPE_UPPER_THRESHOLD
    there; otherwise Inconclusive.

    Raises:
        EnvelopeError: w is not an admissible scale
    """
    log_h = default_log_h_grid() if log_h_grid is None else np.asarray(log_h_grid, dtype=float)
    if log_h.size < 2 or np.any(np.diff(log_h) <= 0):
        raise ConfigurationError("ln h grid must be increasing")
    w.check_membership(log_h)

    lower = get_simulation_setting('ENVELOPE_LOWER_THRESHOLD')
    upper = get_simulation_setting('ENVELOPE_UPPER_THRESHOLD')
    values = np.array([envelope_integral(boundary, w, u) for u in log_h])
    verdict = _numeric_verdict(log_h, values, lower, upper)

    closed_form = None
    tags = []
    if boundary.kind == BoundaryKind.SQRT_LOG:
        closed_form = envelope_boundary_gamma(boundary.parameter, w)["verdict"]
        lo, hi = ANALYZED_GAMMA_RANGE
        if boundary.parameter <= lo:
            tags.append(OUTSIDE_RANGE_TAG)

    logger.info(f"Envelope {boundary.describe()} / w={w.describe()}: J_w → {values[-1]:.4g}, "
                f"{verdict.value}" + (f" (analytic {closed_form.value})" if closed_form else ""))
    return EnvelopeVerdict(
        w=w.describe(),
        log_h_grid=log_h,
        values=values,
        verdict=verdict,
        closed_form=closed_form,
        lower_threshold=lower,
        upper_threshold=upper,
        tags=tags,
    )


@dataclass
class RepulsionEstimate:
    """Q̂(τ_h ≥ w(h) g(h)) from the pre-limit ensemble"""
    h: float
    w: str
    threshold: float
    probability: float
    stderr: float
    ci_low: float
    ci_high: float
    t_prelimit: float
    n_paths: int
    survivors: int

    def to_dict(self) -> Dict:
        return asdict(self)


def mc_repulsion_check(
    boundary: BoundaryFunction,
    w: WFunction,
    h: float,
    n_paths: int,
    streams: StreamFactory,
    workers: int = 1,
    t_prelimit: Optional[float] = None,
) -> RepulsionEstimate:
    """
    Monte Carlo estimate of Q(τ_h ≥ w(h) g(h)) at pre-limit horizon t (20h by default).

    Args:
        boundary: Recurrent boundary
        w: Repulsion scale (constant 1 gives the sure event)
        h: Local time
        n_paths: Paths per stage
        streams: Random stream
        workers: Worker processes
        t_prelimit: Pre-limit horizon

    Returns:
        RepulsionEstimate
    """
    if classify(boundary) != Classification.RECURRENT:
        raise ConfigurationError(f"{boundary.describe()} is transient; repulsion is defined for recurrent boundaries")
    t = 20.0 * h if t_prelimit is None else float(t_prelimit)
    ensemble = _prelimit_ensemble(boundary, h, t, n_paths, streams, workers)
    threshold = w.w(h) * float(boundary.g(h))
    probability, stderr = ensemble.q_mass(threshold)
    logger.info(f"Repulsion h={h:g}, w={w.describe()}: Q̂ = {probability:.4f} ± {stderr:.4f}")
    return RepulsionEstimate(
        h=float(h),
        w=w.describe(),
        threshold=threshold,
        probability=probability,
        stderr=stderr,
        ci_low=max(0.0, probability - 1.96 * stderr),
        ci_high=min(1.0, probability + 1.96 * stderr),
        t_prelimit=t,
        n_paths=ensemble.n_paths,
        survivors=int(ensemble.y.size),
    )
