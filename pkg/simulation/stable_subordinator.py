"""
Stable-1/2 Subordinator (Inverse Local Time)

Exact and truncated sampling of the inverse local time τ of Brownian motion
at 0, its jump structure and its truncated Laplace exponents.

τ is a stable subordinator of index 1/2 with Lévy measure K s^{-3/2} ds,
K = 1/sqrt(2π). Exact increments use τ_δ = (δ/|Z|)^2; truncated paths keep
jumps in (ε, a] as a compound Poisson process and replace jumps ≤ ε by
their mean.
"""

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
from scipy import special

from .exceptions import ConfigurationError, QuadratureError
from .quadrature import quad_checked

logger = logging.getLogger(__name__)

K = 1.0 / math.sqrt(2.0 * math.pi)

# below this the Laplace-exponent integrand is replaced by its series
SERIES_CUTOFF = 1e-8
# λ·a above this overflows exp in double precision
MAX_EXPONENT_ARGUMENT = 700.0

PATH_DUMP_MAGIC = b"TAUPATH1"

ArrayLike = Union[float, np.ndarray]


# ---------------------------------------------------------------------------
# Lévy measure
# ---------------------------------------------------------------------------

def levy_density(s: ArrayLike) -> ArrayLike:
    """Lévy density K s^{-3/2} of τ"""
    return K * np.power(s, -1.5)


def levy_tail(x: ArrayLike) -> ArrayLike:
    """Tail Π̄(x) = ∫_x^∞ K s^{-3/2} ds = 2K/sqrt(x)"""
    return 2.0 * K / np.sqrt(x)


# ---------------------------------------------------------------------------
# Marginal law of τ
# ---------------------------------------------------------------------------

def tau_survival(u: ArrayLike, t: ArrayLike) -> ArrayLike:
    """
    P(τ_u > t) = erf(u / sqrt(2t)).

    Args:
        u: Local-time level, u > 0
        t: Time, t > 0

    Returns:
        Survival probability
    """
    return special.erf(np.asarray(u, dtype=float) / np.sqrt(2.0 * np.asarray(t, dtype=float)))


def tau_cdf(u: ArrayLike, t: ArrayLike) -> ArrayLike:
    """P(τ_u ≤ t) = erfc(u / sqrt(2t)) = 2(1 - Φ_N(u/sqrt(t)))"""
    return special.erfc(np.asarray(u, dtype=float) / np.sqrt(2.0 * np.asarray(t, dtype=float)))


def tau_density(u: ArrayLike, t: ArrayLike) -> ArrayLike:
    """Density of τ_u at t: u e^{-u²/2t} / sqrt(2π t³)"""
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    return u * np.exp(-u * u / (2.0 * t)) / np.sqrt(2.0 * math.pi * t ** 3)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def _nonzero_normals(rng: np.random.Generator, size) -> np.ndarray:
    z = np.abs(rng.standard_normal(size))
    zero = z == 0.0
    while np.any(zero):
        z[zero] = np.abs(rng.standard_normal(int(np.count_nonzero(zero))))
        zero = z == 0.0
    return z


def sample_tau_increment(delta: ArrayLike, rng: np.random.Generator, size=None) -> ArrayLike:
    """
    Exact draw of τ_δ via the hitting-time identity τ_δ = (δ/|Z|)².

    Args:
        delta: Local-time step(s), δ > 0
        rng: numpy Generator
        size: Output shape (defaults to the shape of delta)

    Returns:
        Duration(s) τ_δ, always finite and positive
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise ConfigurationError("local-time step must be positive")
    shape = delta.shape if size is None else size
    z = _nonzero_normals(rng, shape)
    out = (delta / z) ** 2
    return float(out) if np.ndim(out) == 0 else out


def sample_first_big_jump(a: float, rng: np.random.Generator, size=None) -> ArrayLike:
    """
    Local time Δ₁ᵃ of the first jump larger than a, Exp(2K/sqrt(a)).

    Its mean is sqrt(π a / 2).
    """
    if a <= 0:
        raise ConfigurationError("jump level must be positive")
    return rng.exponential(scale=1.0 / levy_tail(a), size=size)


def sample_conditional_jump_size(a: float, rng: np.random.Generator, size=None) -> ArrayLike:
    """
    Size of a jump conditioned to exceed a: S = a / U², U ~ Uniform(0, 1].

    P(S > x) = sqrt(a/x) for x ≥ a.
    """
    if a <= 0:
        raise ConfigurationError("jump level must be positive")
    u = 1.0 - rng.random(size)
    return a / u ** 2


# ---------------------------------------------------------------------------
# Truncated paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationSpec:
    """Jump truncation of τ: keep jumps in (small_cut, cap], compensate jumps ≤ small_cut"""
    cap: float = math.inf
    small_cut: float = 1e-8

    def __post_init__(self):
        if not (self.small_cut > 0):
            raise ConfigurationError("small_cut must be positive")
        if not (self.cap > self.small_cut):
            raise ConfigurationError("truncation cap must exceed small_cut")

    @property
    def drift(self) -> float:
        """Mean contribution of jumps ≤ ε per unit local time: 2K sqrt(ε)"""
        return 2.0 * K * math.sqrt(self.small_cut)

    @property
    def jump_rate(self) -> float:
        """Rate of jumps in (ε, cap] per unit local time"""
        return 2.0 * K * (self.small_cut ** -0.5 - self.cap ** -0.5)

    def sample_jump_sizes(self, rng: np.random.Generator, size) -> np.ndarray:
        """Inverse-CDF draw from the Lévy measure restricted to (ε, cap]"""
        u = 1.0 - rng.random(size)
        inv_cap = 0.0 if math.isinf(self.cap) else self.cap ** -0.5
        return (inv_cap + u * (self.small_cut ** -0.5 - inv_cap)) ** -2

    def to_dict(self) -> Dict:
        return {"cap": self.cap, "small_cut": self.small_cut}


@dataclass
class SubordinatorPath:
    """
    One τ path on a local-time grid.

    Recorded jumps are those above ``record_threshold``; ``jump_starts``
    holds the real time at which each recorded excursion begins.
    """
    grid: np.ndarray
    values: np.ndarray
    truncation: TruncationSpec
    record_threshold: float = math.inf
    jump_local_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_starts: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def value_at(self, s: float) -> float:
        """τ at local time s (linear between grid points)"""
        return float(np.interp(s, self.grid, self.values))

    def inverse(self, times: ArrayLike) -> ArrayLike:
        """Reconstructed local time L_u = inf{s: τ_s > u} on the grid skeleton"""
        return np.interp(times, self.values, self.grid, right=self.grid[-1])

    def to_dict(self) -> Dict:
        return {
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "truncation": self.truncation.to_dict(),
            "record_threshold": self.record_threshold,
            "jumps": [
                {"local_time": float(l), "size": float(z), "start": float(s)}
                for l, z, s in zip(self.jump_local_times, self.jump_sizes, self.jump_starts)
            ],
        }


@dataclass
class TruncatedEnsemble:
    """Many truncated τ paths on one grid (values[:, 0] = 0)"""
    grid: np.ndarray
    values: np.ndarray
    truncation: TruncationSpec
    jump_path: np.ndarray
    jump_cell: np.ndarray
    jump_local_times: np.ndarray
    jump_sizes: np.ndarray
    record_threshold: float

    @property
    def n_paths(self) -> int:
        return int(self.values.shape[0])

    def path(self, index: int) -> SubordinatorPath:
        """Extract one path with its recorded jumps and their start times"""
        mask = self.jump_path == index
        local_times = self.jump_local_times[mask]
        sizes = self.jump_sizes[mask]
        cells = self.jump_cell[mask]
        order = np.argsort(local_times, kind="stable")
        local_times, sizes, cells = local_times[order], sizes[order], cells[order]

        values = self.values[index]
        deltas = np.diff(self.grid)
        starts = np.empty_like(local_times)
        for cell in np.unique(cells):
            in_cell = cells == cell
            recorded = sizes[in_cell]
            # unrecorded mass is spread linearly across the cell
            spread = values[cell + 1] - values[cell] - recorded.sum()
            frac = (local_times[in_cell] - self.grid[cell]) / deltas[cell]
            before = np.concatenate(([0.0], np.cumsum(recorded)[:-1]))
            starts[in_cell] = values[cell] + spread * frac + before

        return SubordinatorPath(
            grid=self.grid.copy(),
            values=values.copy(),
            truncation=self.truncation,
            record_threshold=self.record_threshold,
            jump_local_times=local_times,
            jump_sizes=sizes,
            jump_starts=starts,
        )


def sample_exact_ensemble(grid: np.ndarray, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """
    n exact τ paths on a grid by independent exact increments.

    Returns:
        Array (n_paths, len(grid)) with column 0 equal to τ(grid[0]) = 0
    """
    grid = np.asarray(grid, dtype=float)
    deltas = np.diff(grid)
    increments = sample_tau_increment(deltas, rng, size=(n_paths, deltas.size))
    values = np.zeros((n_paths, grid.size))
    np.cumsum(increments, axis=1, out=values[:, 1:])
    return values


def sample_truncated_ensemble(
    spec: TruncationSpec,
    grid: np.ndarray,
    n_paths: int,
    rng: np.random.Generator,
    record_threshold: float = math.inf,
) -> TruncatedEnsemble:
    """
    n truncated τ paths: compensation drift plus compound Poisson jumps in (ε, cap].

    Args:
        spec: Truncation (cap a, small cut ε)
        grid: Local-time grid starting at 0
        n_paths: Number of paths
        rng: numpy Generator
        record_threshold: Jumps above this are kept individually

    Returns:
        TruncatedEnsemble
    """
    grid = np.asarray(grid, dtype=float)
    deltas = np.diff(grid)
    m = deltas.size

    counts = rng.poisson(spec.jump_rate * deltas, size=(n_paths, m))
    total = int(counts.sum())
    sizes = spec.sample_jump_sizes(rng, total)
    cell_ids = np.repeat(np.arange(n_paths * m), counts.ravel())
    cell_sums = np.bincount(cell_ids, weights=sizes, minlength=n_paths * m).reshape(n_paths, m)

    increments = cell_sums + spec.drift * deltas
    values = np.zeros((n_paths, grid.size))
    np.cumsum(increments, axis=1, out=values[:, 1:])

    keep = sizes > record_threshold
    kept_ids = cell_ids[keep]
    jump_path = kept_ids // m
    jump_cell = kept_ids % m
    jump_local_times = grid[jump_cell] + rng.random(kept_ids.size) * deltas[jump_cell]

    return TruncatedEnsemble(
        grid=grid,
        values=values,
        truncation=spec,
        jump_path=jump_path,
        jump_cell=jump_cell,
        jump_local_times=jump_local_times,
        jump_sizes=sizes[keep],
        record_threshold=record_threshold,
    )


def sample_truncated_path(
    spec: TruncationSpec,
    grid: np.ndarray,
    rng: np.random.Generator,
    record_threshold: float = math.inf,
) -> SubordinatorPath:
    """Single truncated τ path on a grid (see sample_truncated_ensemble)"""
    ensemble = sample_truncated_ensemble(spec, grid, 1, rng, record_threshold=record_threshold)
    return ensemble.path(0)


# ---------------------------------------------------------------------------
# Laplace exponent and tail bound
# ---------------------------------------------------------------------------

def _laplace_integral(lam: float, a: float) -> float:
    """∫₀^a (e^{λs} - 1) s^{-3/2} ds"""
    if lam * a > MAX_EXPONENT_ARGUMENT:
        raise QuadratureError(
            f"Laplace exponent overflow: λ·a = {lam * a:.3g} > {MAX_EXPONENT_ARGUMENT}",
            hint="use a smaller rate or truncation level",
        )
    if lam == 0.0:
        return 0.0
    s0 = min(SERIES_CUTOFF, a)
    head = 2.0 * lam * s0 ** 0.5 + lam ** 2 * s0 ** 1.5 / 3.0 + lam ** 3 * s0 ** 2.5 / 15.0
    if a <= s0:
        return head
    body, _ = quad_checked(
        lambda s: math.expm1(lam * s) * s ** -1.5, s0, a, what="truncated Laplace exponent"
    )
    return head + body


def truncated_laplace_exponent(lam: float, a: float) -> float:
    """
    Ψ_a(λ) = K ∫₀^a (e^{λs} − 1) s^{-3/2} ds, so E e^{λ τ^a_t} = e^{t Ψ_a(λ)}.

    Args:
        lam: Rate λ (any real)
        a: Truncation level a > 0

    Returns:
        Exponent value

    Raises:
        QuadratureError: when λ·a would overflow
    """
    if a <= 0:
        raise ConfigurationError("truncation level must be positive")
    return K * _laplace_integral(lam, a)


def markov_tail_bound(a: float, delta: float, c: float, n: int, t: float) -> float:
    """
    Markov-inequality bound on P(τ^{a_δ}_t > c a) with a_δ = a / ln^δ(a).

    Returns exp(t K sqrt(n) ln^{δ/2}(a) / sqrt(c a) · ∫₀^{n/c} (e^s−1) s^{-3/2} ds)
    · exp(−n ln^δ(a)).
    """
    if a <= 1 or delta <= 0 or c <= 0 or t < 0 or n < 1 or int(n) != n:
        raise ConfigurationError("markov_tail_bound needs a>1, δ>0, c>0, t≥0 and integer n≥1")
    log_a = math.log(a)
    growth = 0.0
    if t > 0:
        growth = (
            t * K * math.sqrt(n) * log_a ** (delta / 2.0) / math.sqrt(c * a)
            * _laplace_integral(1.0, n / c)
        )
    return math.exp(growth - n * log_a ** delta)


# ---------------------------------------------------------------------------
# Binary path dump
# ---------------------------------------------------------------------------

def write_path_dump(path: SubordinatorPath, target: Union[str, Path], seed: int) -> Path:
    """
    Write a path as: magic, header (n points, seed, cap, small cut) and
    (local time, τ) pairs, all little-endian 64-bit.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    pairs = np.column_stack([path.grid, path.values]).astype("<f8")
    with open(target, "wb") as fh:
        fh.write(PATH_DUMP_MAGIC)
        fh.write(struct.pack("<qqdd", pairs.shape[0], int(seed),
                             path.truncation.cap, path.truncation.small_cut))
        fh.write(pairs.tobytes())
    logger.info(f"✓ Wrote path dump ({pairs.shape[0]} points) to {target}")
    return target


def read_path_dump(source: Union[str, Path]) -> Tuple[SubordinatorPath, int]:
    """Read a dump written by write_path_dump; returns (path, seed)"""
    with open(source, "rb") as fh:
        if fh.read(len(PATH_DUMP_MAGIC)) != PATH_DUMP_MAGIC:
            raise ConfigurationError(f"{source} is not a path dump")
        n_points, seed, cap, small_cut = struct.unpack("<qqdd", fh.read(32))
        pairs = np.frombuffer(fh.read(16 * n_points), dtype="<f8").reshape(n_points, 2)
    path = SubordinatorPath(
        grid=pairs[:, 0].copy(),
        values=pairs[:, 1].copy(),
        truncation=TruncationSpec(cap=cap, small_cut=small_cut),
    )
    return path, int(seed)
