"""
Boundary Functions

The boundary f (local time L_t must stay below f(t)), its inverse g and the
analytic criteria on them: the integral test separating transient from
recurrent conditioning, and grid-verified growth conditions.

Builtin families (all with f(1) = 1 and a floor f(0) = f0):
- sqrt_log: f(t) = max(f0, sqrt(t)·(ln(1+c)/ln(c+t))^γ)
- power:    f(t) = max(f0, t^β), β in (0, 1/2)
- tabulated: two-column CSV (t, f(t)) with a power-law tail

f and g are evaluated in log coordinates so that criteria can be pushed to
h = e^(10^6) and beyond.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import optimize

from .conf import get_simulation_setting
from .exceptions import BoundaryValidationError, ConfigurationError
from .quadrature import integrate_log_space, quad_checked
from .stable_subordinator import tau_density

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# largest γ for which the shift e-1 keeps sqrt(t)/ln^γ(c+t) monotone
SQRT_LOG_MONOTONE_GAMMA = 1.2
# log-time bracket used when inverting f
LOG_T_MIN = -700.0
LOG_T_MAX = 1e15
# cutoffs of the integral test when none are given
DEFAULT_CUTOFFS = (1e2, 1e4, 1e6, 1e8)
# increment ratio over equal log-blocks below which I(f) is taken as convergent
CONVERGENT_INCREMENT_RATIO = 0.9


class BoundaryKind(str, Enum):
    SQRT_LOG = "sqrt_log"
    POWER = "power"
    TABULATED = "tabulated"


class Classification(str, Enum):
    TRANSIENT = "Transient"
    RECURRENT = "Recurrent"


@dataclass
class BoundaryValidation:
    """Validity metadata of a boundary, evaluated on a geometric grid"""
    monotone: bool
    normalized: bool
    floor_ok: bool
    sqrt_ratio_decreasing: bool
    roundtrip_max_error: float
    horizon: float

    @property
    def valid(self) -> bool:
        return self.monotone and self.floor_ok

    def to_dict(self) -> Dict:
        return asdict(self)


def sqrt_log_shift(gamma: float) -> float:
    """Shift c in ln(c+t): e-1 while it keeps the raw curve monotone, else e^{2γ-1}"""
    if gamma <= SQRT_LOG_MONOTONE_GAMMA:
        return math.e - 1.0
    return math.exp(2.0 * gamma - 1.0)


class BoundaryFunction:
    """
    Boundary f with floor f0 and its generalized inverse g.

    g(x) = inf{t: f(t) > x} for x > f0; below f0 g is extended linearly
    with slope 1/f'(t_cross+), so g(x) < 0 for x < f0 and g(f0) = 0.
    """

    def __init__(
        self,
        kind: BoundaryKind,
        parameter: Optional[float],
        f0: float,
        table: Optional[np.ndarray] = None,
        tail_exponent: float = 0.25,
        horizon: float = 1e8,
    ):
        self.kind = BoundaryKind(kind)
        self.parameter = None if parameter is None else float(parameter)
        self.f0 = float(f0)
        self.horizon = float(horizon)
        self.tail_exponent = float(tail_exponent)
        self.table = table
        self.log_f0 = math.log(self.f0)

        if self.kind == BoundaryKind.SQRT_LOG:
            self.shift = sqrt_log_shift(self.parameter)
            self._log_norm = self.parameter * math.log(math.log(1.0 + self.shift))
        elif self.kind == BoundaryKind.TABULATED:
            self._t_table = table[:, 0]
            self._f_table = table[:, 1]
            self._log_t_last = math.log(self._t_table[-1])
            self._log_f_last = math.log(self._f_table[-1])

        self.t_cross = self._crossing_time()
        self.floor_slope = self._right_slope_at_crossing()
        self.validation: Optional[BoundaryValidation] = None

    # -- description -------------------------------------------------------

    def describe(self) -> str:
        if self.kind == BoundaryKind.SQRT_LOG:
            return f"sqrt_log(gamma={self.parameter:g}, f0={self.f0:g})"
        if self.kind == BoundaryKind.POWER:
            return f"power(beta={self.parameter:g}, f0={self.f0:g})"
        return f"tabulated({len(self.table)} rows, f0={self.f0:g})"

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "parameter": self.parameter,
            "f0": self.f0,
            "t_cross": self.t_cross,
            "validation": self.validation.to_dict() if self.validation else None,
        }

    def __repr__(self) -> str:
        return f"BoundaryFunction({self.describe()})"

    # -- f -----------------------------------------------------------------

    def raw_log_f(self, log_t: ArrayLike) -> ArrayLike:
        """log of the floor-free curve at t = e^{log_t}"""
        log_t = np.asarray(log_t, dtype=float)
        if self.kind == BoundaryKind.SQRT_LOG:
            log_shifted = np.logaddexp(math.log(self.shift), log_t)
            return 0.5 * log_t + self._log_norm - self.parameter * np.log(log_shifted)
        if self.kind == BoundaryKind.POWER:
            return self.parameter * log_t
        inside = log_t <= self._log_t_last
        with np.errstate(over="ignore"):
            t = np.exp(np.minimum(log_t, self._log_t_last))
        table_part = np.log(np.interp(t, self._t_table, self._f_table))
        tail_part = self._log_f_last + self.tail_exponent * (log_t - self._log_t_last)
        return np.where(inside, table_part, tail_part)

    def log_f(self, log_t: ArrayLike) -> ArrayLike:
        """ln f(e^{log_t}) including the floor"""
        return np.maximum(self.log_f0, self.raw_log_f(log_t))

    def f(self, t: ArrayLike) -> ArrayLike:
        """Evaluate f at times t ≥ 0"""
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.f0)
        positive = t > 0
        if np.any(positive):
            out[positive] = np.exp(self.log_f(np.log(t[positive])))
        return float(out) if out.ndim == 0 else out

    # -- g -----------------------------------------------------------------

    def _crossing_time(self) -> float:
        """Last time at which f sits on its floor"""
        if self.kind == BoundaryKind.POWER:
            return self.f0 ** (1.0 / self.parameter)
        if self.kind == BoundaryKind.TABULATED:
            on_floor = np.nonzero(self._f_table <= self.f0)[0]
            return float(self._t_table[on_floor[-1]])
        log_t = optimize.brentq(
            lambda u: float(self.raw_log_f(u)) - self.log_f0, LOG_T_MIN, 50.0, xtol=1e-14
        )
        return math.exp(log_t)

    def _right_slope_at_crossing(self) -> float:
        eta = 1e-7 * max(self.t_cross, 1e-3)
        slope = (float(self.f(self.t_cross + eta)) - self.f0) / eta
        return max(slope, 1e-12)

    def log_g(self, log_x: float) -> float:
        """ln g(e^{log_x}) for levels above the floor"""
        log_x = float(log_x)
        if log_x <= self.log_f0:
            raise ConfigurationError(f"log_g is defined only above the floor f0={self.f0}")
        lo = math.log(self.t_cross) if self.t_cross > 0 else LOG_T_MIN
        if float(self.raw_log_f(lo)) >= log_x:
            return lo
        hi = max(lo + 1.0, 2.0 * log_x + 1.0)
        while float(self.raw_log_f(hi)) < log_x:
            hi = hi + max(10.0, abs(hi))
            if hi > LOG_T_MAX:
                raise ConfigurationError(f"level e^{log_x:g} is beyond the inversion range of f")
        return optimize.brentq(
            lambda u: float(self.raw_log_f(u)) - log_x, lo, hi, xtol=1e-13, rtol=1e-15
        )

    def _g_scalar(self, x: float) -> float:
        if x <= self.f0:
            return (x - self.f0) / self.floor_slope
        return math.exp(self.log_g(math.log(x)))

    def g(self, x: ArrayLike) -> ArrayLike:
        """Generalized inverse of f (negative below the floor)"""
        x = np.asarray(x, dtype=float)
        out = np.array([self._g_scalar(v) for v in x.ravel()]).reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def shifted(self, h: float, y: float) -> "ShiftedBoundary":
        """Boundary seen after local time h with τ_h = y"""
        return ShiftedBoundary(self, h, y)


@dataclass(frozen=True)
class ShiftedBoundary:
    """g_{y,h}(s) = g(s + h) − y, the constraint on τ' = τ_{h+·} − τ_h"""
    base: BoundaryFunction
    h: float
    y: float

    def g(self, s: ArrayLike) -> ArrayLike:
        return self.base.g(np.asarray(s, dtype=float) + self.h) - self.y

    def zero_level(self) -> float:
        """Local time at which g_{y,h} becomes positive"""
        return max(float(self.base.f(self.y)) - self.h, 0.0)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def validate_boundary(
    boundary: BoundaryFunction,
    horizon: float = None,
    points_per_decade: int = 32,
) -> BoundaryValidation:
    """
    Check f on a geometric grid from 1e-3 to horizon.

    Args:
        boundary: Boundary to check
        horizon: Largest grid time (defaults to boundary.horizon)
        points_per_decade: Grid density

    Returns:
        BoundaryValidation (also attached to the boundary)
    """
    horizon = horizon or boundary.horizon
    decades = math.log10(horizon) + 3.0
    grid = np.concatenate(([0.0], np.logspace(-3.0, math.log10(horizon), int(decades * points_per_decade) + 1)))
    values = boundary.f(grid)

    monotone = bool(np.all(np.diff(values) >= -1e-14 * values[1:]))
    normalized = abs(float(boundary.f(1.0)) - 1.0) <= 1e-12
    floor_ok = 0.0 < boundary.f0 < 1.0 and values[0] == boundary.f0

    beyond_one = grid[grid >= 1.0]
    ratio = boundary.f(beyond_one) / np.sqrt(beyond_one)
    sqrt_ratio_decreasing = bool(np.all(np.diff(ratio) <= 1e-14 * ratio[1:]) and ratio[-1] < ratio[0])

    above = grid[(values > boundary.f0 * (1.0 + 1e-9)) & (grid > boundary.t_cross)]
    roundtrip = 0.0
    if above.size:
        roundtrip = float(np.max(np.abs(boundary.g(boundary.f(above)) - above) / above))

    validation = BoundaryValidation(
        monotone=monotone,
        normalized=normalized,
        floor_ok=floor_ok,
        sqrt_ratio_decreasing=sqrt_ratio_decreasing,
        roundtrip_max_error=roundtrip,
        horizon=horizon,
    )
    boundary.validation = validation
    if roundtrip > 1e-10:
        logger.warning(f"⚠ {boundary.describe()}: g(f(t)) round-trip error {roundtrip:.2e}")
    return validation


def make_family(
    kind: Union[str, BoundaryKind],
    parameter: float,
    f0: float = 0.5,
    horizon: float = 1e8,
) -> BoundaryFunction:
    """
    Build a builtin boundary family and validate it.

    Args:
        kind: 'sqrt_log' (parameter γ > 0) or 'power' (parameter β in (0, 1/2))
        parameter: γ or β
        f0: Floor level f(0) in (0, 1)
        horizon: Validation horizon

    Returns:
        Validated BoundaryFunction

    Raises:
        BoundaryValidationError: bad parameters or failed monotonicity check
    """
    kind = BoundaryKind(kind)
    if not 0.0 < f0 < 1.0:
        raise BoundaryValidationError(f"f0 must lie in (0, 1), got {f0}")
    if kind == BoundaryKind.SQRT_LOG and not parameter > 0:
        raise BoundaryValidationError(f"sqrt_log needs γ > 0, got {parameter}")
    if kind == BoundaryKind.POWER and not 0.0 < parameter < 0.5:
        raise BoundaryValidationError(f"power needs β in (0, 1/2), got {parameter}")
    if kind == BoundaryKind.TABULATED:
        raise BoundaryValidationError("tabulated boundaries are built with load_tabulated")

    boundary = BoundaryFunction(kind, parameter, f0, horizon=horizon)
    validation = validate_boundary(boundary, horizon)
    if not validation.monotone:
        raise BoundaryValidationError(f"{boundary.describe()} is not monotone on the validation grid")
    logger.debug(f"✓ Built boundary {boundary.describe()}")
    return boundary


def load_tabulated(
    csv_path: Union[str, Path],
    tail_exponent: float = 0.25,
    horizon: float = 1e8,
) -> BoundaryFunction:
    """
    Load a tabulated boundary from a two-column CSV (t, f).

    The first row must be t = 0; t strictly increasing; f nondecreasing.
    Beyond the last row f grows like t^tail_exponent.
    """
    frame = pd.read_csv(csv_path)
    if frame.shape[1] < 2:
        raise BoundaryValidationError(f"{csv_path}: expected two columns (t, f)")
    table = frame.iloc[:, :2].to_numpy(dtype=float)
    return tabulated_boundary(table, tail_exponent=tail_exponent, horizon=horizon)


def tabulated_boundary(
    table: np.ndarray,
    tail_exponent: float = 0.25,
    horizon: float = 1e8,
) -> BoundaryFunction:
    """Build a tabulated boundary from an (n, 2) array of (t, f) rows"""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] != 2:
        raise BoundaryValidationError("table must have at least two (t, f) rows")
    t, values = table[:, 0], table[:, 1]
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise BoundaryValidationError("t column must start at 0 and be strictly increasing")
    if np.any(np.diff(values) < 0):
        raise BoundaryValidationError("f column is not monotone")
    if not 0.0 < values[0] < 1.0:
        raise BoundaryValidationError(f"f(0) must lie in (0, 1), got {values[0]}")
    if not 0.0 < tail_exponent < 0.5:
        raise BoundaryValidationError("tail_exponent must lie in (0, 1/2)")

    boundary = BoundaryFunction(
        BoundaryKind.TABULATED, None, values[0], table=table,
        tail_exponent=tail_exponent, horizon=horizon,
    )
    validate_boundary(boundary, horizon)
    if not boundary.validation.normalized:
        logger.info(f"Tabulated boundary has f(1)={float(boundary.f(1.0)):.6g} (not normalized)")
    return boundary


# ---------------------------------------------------------------------------
# Integral test
# ---------------------------------------------------------------------------

@dataclass
class IntegralTestResult:
    """Partial values of I(f), J(g) and E f(τ₁) at increasing cutoffs"""
    classification: Classification
    cutoffs: List[float]
    i_f_partial: List[float]
    j_g_partial: List[float]
    e_f_partial: List[float]
    divergence_evidence: Optional[float] = None
    heuristic: bool = False

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["classification"] = self.classification.value
        return data


def _family_classification(boundary: BoundaryFunction) -> Optional[Classification]:
    if boundary.kind == BoundaryKind.SQRT_LOG:
        return Classification.TRANSIENT if boundary.parameter > 1.0 else Classification.RECURRENT
    if boundary.kind == BoundaryKind.POWER:
        return Classification.TRANSIENT
    return None


def classify(boundary: BoundaryFunction) -> Classification:
    """Family rule, or the integral-test heuristic for tabulated boundaries"""
    family = _family_classification(boundary)
    if family is not None:
        return family
    return integral_test(boundary, DEFAULT_CUTOFFS).classification


def integral_test(boundary: BoundaryFunction, cutoffs: Sequence[float]) -> IntegralTestResult:
    """
    Partial values of I(f) = ∫₁^T f(t) t^{-3/2} dt, J(g) = ∫₁^T g(s)^{-1/2} ds
    and E f(τ₁) restricted to τ₁ ≤ T.

    Args:
        boundary: Validated boundary
        cutoffs: Increasing cutoffs T ≥ 1

    Returns:
        IntegralTestResult with classification per family rule
    """
    cutoffs = [float(c) for c in cutoffs]
    if not cutoffs or cutoffs[0] < 1.0 or np.any(np.diff(cutoffs) <= 0):
        raise ConfigurationError("cutoffs must be increasing and ≥ 1")

    def log_i_integrand(u):
        return float(boundary.log_f(u)) - 0.5 * u

    def log_j_integrand(u):
        return u - 0.5 * boundary.log_g(u)

    def log_e_integrand(u):
        t = math.exp(u)
        return float(boundary.log_f(u)) + math.log(float(tau_density(1.0, t))) + u

    head_e, _ = quad_checked(
        lambda t: float(boundary.f(t)) * float(tau_density(1.0, t)) if t > 0 else 0.0,
        0.0, 1.0, what="E f(tau_1) on [0, 1]",
    )

    i_parts, j_parts, e_parts = [], [], []
    i_total = j_total = 0.0
    e_total = head_e
    previous = 0.0
    for cutoff in cutoffs:
        u = math.log(cutoff)
        i_total += integrate_log_space(log_i_integrand, previous, u, what="I(f)")
        j_total += integrate_log_space(log_j_integrand, previous, u, what="J(g)")
        e_total += integrate_log_space(log_e_integrand, previous, u, what="E f(tau_1)")
        i_parts.append(i_total)
        j_parts.append(j_total)
        e_parts.append(e_total)
        previous = u

    classification = _family_classification(boundary)
    heuristic = False
    if classification is None:
        heuristic = True
        increments = np.diff([0.0] + i_parts)
        decaying = (
            len(increments) >= 3 and increments[-1] < CONVERGENT_INCREMENT_RATIO * increments[-2]
        )
        classification = Classification.TRANSIENT if decaying else Classification.RECURRENT

    evidence = None
    if len(cutoffs) >= 2 and cutoffs[-2] > math.e:
        loglog = np.log(np.log(cutoffs[-2:]))
        evidence = float((j_parts[-1] - j_parts[-2]) / (loglog[1] - loglog[0]))

    return IntegralTestResult(
        classification=classification,
        cutoffs=cutoffs,
        i_f_partial=i_parts,
        j_g_partial=j_parts,
        e_f_partial=e_parts,
        divergence_evidence=evidence,
        heuristic=heuristic,
    )


# ---------------------------------------------------------------------------
# Growth conditions
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    """Grid-verified proxies of the growth conditions (never proofs)"""
    sqrt_ratio_decreasing: bool
    mild_condition: bool
    growth_condition: bool
    epsilon: float
    horizon: float
    status: str = "grid-verified"
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


def _increasing(values: np.ndarray) -> bool:
    return bool(np.all(np.diff(values) > -1e-12 * np.maximum(1.0, np.abs(values[1:]))))


def check_conditions(
    boundary: BoundaryFunction,
    horizon: float = 1e6,
    epsilon: float = None,
    points_per_decade: int = None,
) -> ConditionReport:
    """
    Evaluate the growth conditions on a geometric grid.

    (a) f(t)/sqrt(t) nonincreasing on [1, horizon] and decreasing overall;
    (b) g(x)/(x² ln x) increasing on the grid tail [sqrt(horizon), horizon];
    (c) g(x)/(x² ln^{8/5+ε} x) increasing on the same tail.

    Args:
        boundary: Boundary to check
        horizon: Largest grid point, ≥ 10³
        epsilon: ε of condition (c) (settings default 0.1)
        points_per_decade: Grid density (settings default 512)

    Returns:
        ConditionReport
    """
    if horizon < 1e3:
        raise ConfigurationError("check_conditions needs horizon ≥ 10³")
    epsilon = get_simulation_setting('CONDITION_EPSILON') if epsilon is None else epsilon
    points_per_decade = points_per_decade or get_simulation_setting('POINTS_PER_DECADE')

    decades = math.log10(horizon)
    grid = np.logspace(0.0, decades, int(decades * points_per_decade) + 1)
    ratio = boundary.f(grid) / np.sqrt(grid)
    part_a = bool(np.all(np.diff(ratio) <= 1e-14 * ratio[1:]) and ratio[-1] < ratio[0])

    tail = grid[grid >= math.sqrt(horizon)]
    log_x = np.log(tail)
    log_g = np.array([boundary.log_g(u) for u in log_x])
    base = log_g - 2.0 * log_x
    part_b = _increasing(base - np.log(log_x))
    part_c = _increasing(base - (1.6 + epsilon) * np.log(log_x))

    report = ConditionReport(
        sqrt_ratio_decreasing=part_a,
        mild_condition=part_b,
        growth_condition=part_c,
        epsilon=epsilon,
        horizon=horizon,
    )
    if boundary.kind == BoundaryKind.TABULATED:
        report.notes.append("tail beyond the table is the configured power law")
    logger.info(
        f"Conditions for {boundary.describe()}: (a)={part_a} (b)={part_b} (c)={part_c} [grid-verified]"
    )
    return report
