"""Semigroups generated by bounded operators and their trajectory diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .core import as_matrix, as_vector, log_norm, op_norm, sup_norm
from .report import CheckReport

__all__ = [
    "SERIES_TOL",
    "TypeBound",
    "SemigroupHandle",
    "exp_series",
    "uniformization_shift",
    "certified_type_bound",
    "semigroup_law_check",
    "CesaroAverage",
    "cesaro_average",
    "averaging_bound_check",
    "fit_type_bound",
    "default_time_grid",
]

SERIES_TOL = 1e-13
MAX_EXPONENT = 700.0
GRID_PER_UNIT = 64


@dataclass(frozen=True)
class TypeBound:
    """``||T(t)|| <= M exp(omega t)``; ``M >= 1``."""

    M: float
    omega: float

    def __post_init__(self):
        if not self.M >= 1.0:
            raise ValueError(f"M must be >= 1, got {self.M}")


def uniformization_shift(G) -> float:
    """Smallest ``s >= 0`` making the diagonal of ``G + s I`` nonnegative."""
    g = as_matrix(G)
    return float(max(0.0, -np.min(np.diag(g))))


def exp_series(G, t: float, x, tol: float = SERIES_TOL, shift: float = 0.0) -> np.ndarray:
    """Sum ``S(t)x = sum_k t^k G^k x / k!``.

    With ``shift = s`` the same series is evaluated as
    ``exp(-s t) sum_k t^k (G + s I)^k x / k!``; for Q-matrices and
    uniformization shifts every term is nonnegative, which removes the
    cancellation of the plain series at large ``t ||G||``.

    Terms are accumulated until the remainder majorant
    ``exp(t(c - s)) P[Poisson(t c) > K] ||x||`` with ``c = ||G + s I||``
    drops below ``tol (1 + ||x||)``. ``x`` may be a vector or a matrix of
    column vectors.
    """
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and >= 0, got {t}")
    g = as_matrix(G)
    v = np.array(x, dtype=float)
    if v.shape[0] != g.shape[0]:
        raise ValueError(f"dimension mismatch: {g.shape[0]} vs {v.shape[0]}")
    if t == 0.0:
        return v
    gs = g + shift * np.eye(g.shape[0]) if shift else g
    c = op_norm(gs)
    growth = t * (c - shift)
    if growth > MAX_EXPONENT:
        raise OverflowError(f"t * ||G|| = {growth:.1f} exceeds {MAX_EXPONENT:.0f}")
    mu = t * c
    if mu == 0.0:
        # also covers t*c underflowing: every k >= 1 term is below double resolution
        return math.exp(-shift * t) * v

    xnorm = float(np.max(np.abs(v))) if v.size else 0.0
    log_mu = math.log(mu)
    gn = gs / c
    u = v.copy()
    total = math.exp(-shift * t) * v
    k = 0
    while True:
        k += 1
        u = gn @ u
        total = total + math.exp(k * log_mu - math.lgamma(k + 1) - shift * t) * u
        if k >= mu:
            remainder = math.exp(growth) * float(gammainc(k + 1, mu)) * xnorm
            if remainder <= tol * (1.0 + xnorm):
                return total


@dataclass(frozen=True, eq=False)
class SemigroupHandle:
    """A semigroup ``T(t) = exp(tG)`` with a chosen evaluation route.

    ``eval_strategy`` is ``"exponential_series"`` (the generator's series,
    shifted by ``shift``; ``"auto"`` picks the uniformization shift) or
    ``"yosida_limit"`` (the semigroup of the Yosida approximant of index
    ``yosida_index``).
    """

    generator: np.ndarray
    eval_strategy: str = "exponential_series"
    series_tolerance: float = SERIES_TOL
    shift: float | str = "auto"
    yosida_index: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "generator", as_matrix(self.generator))
        if self.eval_strategy not in ("exponential_series", "yosida_limit"):
            raise ValueError(f"unknown eval_strategy {self.eval_strategy!r}")

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def _shift(self) -> float:
        if self.shift == "auto":
            return uniformization_shift(self.generator)
        return float(self.shift)

    def apply(self, t: float, x) -> np.ndarray:
        if self.eval_strategy == "yosida_limit":
            from .yosida import yosida_approximant

            n = self.yosida_index
            a_n = yosida_approximant(self.generator, n)
            return exp_series(a_n, t, x, self.series_tolerance, shift=float(n))
        return exp_series(self.generator, t, x, self.series_tolerance, self._shift())

    def operator(self, t: float) -> np.ndarray:
        return self.apply(t, np.eye(self.dim))


def certified_type_bound(G) -> TypeBound:
    return TypeBound(1.0, log_norm(G))


def _as_handle(h) -> SemigroupHandle:
    return h if isinstance(h, SemigroupHandle) else SemigroupHandle(h)


def _samples(samples, n: int) -> np.ndarray:
    if samples is None:
        return np.vstack([np.eye(n), np.ones(n)])
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    if s.shape[1] != n:
        raise ValueError(f"samples must have {n} columns")
    return s


def semigroup_law_check(h, t: float, s: float, samples=None, tol: float = 1e-10) -> CheckReport:
    """Max deviation ``||T(t)T(s)x - T(t+s)x||`` over the sample rows."""
    h = _as_handle(h)
    if t < 0 or s < 0:
        raise ValueError("times must be nonnegative")
    xs = _samples(samples, h.dim).T
    lhs_vals = h.apply(t, h.apply(s, xs)) - h.apply(t + s, xs)
    dev = float(np.max(np.abs(lhs_vals))) if lhs_vals.size else 0.0
    return CheckReport(dev, tol, dev <= tol, grid=[t, s])


@dataclass
class CesaroAverage:
    value: np.ndarray
    riemann_sum: np.ndarray
    error_estimate: float
    levels: int


def cesaro_average(h, r: float, x, levels: int = 12, depth: int = 3) -> CesaroAverage:
    """Approximate ``(1/r) int_0^r T(s)x ds`` from dyadic left Riemann sums.

    ``riemann_sum`` is the mean of ``T(i r / 2^levels) x`` over
    ``i < 2^levels``. ``value`` applies ``depth`` rounds of Richardson
    extrapolation across the nested levels, and ``error_estimate`` is the
    sup-norm change between the last two extrapolated levels.
    """
    h = _as_handle(h)
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    x = as_vector(x)
    m = 2**levels
    step = h.operator(r / m)
    pts = np.empty((m, x.size))
    y = x.copy()
    for i in range(m):
        pts[i] = y
        y = step @ y
    sums = [pts[:: 2 ** (levels - lv)].mean(axis=0) for lv in range(levels + 1)]
    depth = max(0, min(depth, levels))
    table = [list(sums)]
    for j in range(1, depth + 1):
        prev = table[-1]
        f = 2.0**j
        table.append([None] * j + [(f * prev[i] - prev[i - 1]) / (f - 1.0) for i in range(j, levels + 1)])
    best = table[depth][levels]
    ref = table[depth][levels - 1] if levels - 1 >= depth else table[depth - 1][levels]
    return CesaroAverage(best, sums[levels], sup_norm(best - ref), levels)


def default_time_grid(horizon: float, per_unit: int = GRID_PER_UNIT) -> np.ndarray:
    n = max(1, int(math.ceil(per_unit * horizon)))
    return np.linspace(0.0, horizon, n + 1)


def averaging_bound_check(h, r: float, hstep: float, x, levels: int = 12,
                          grid_points: int = GRID_PER_UNIT) -> CheckReport:
    """Check ``||T(h)x_r - x_r|| <= (2h/r) sup_{s <= h + r} ||T(s)x||``.

    ``x_r`` is the Cesaro average over ``[0, r]``; the supremum is taken on a
    uniform grid of ``grid_points`` points plus the endpoints ``h`` and ``r``.
    """
    h_ = _as_handle(h)
    if not 0 < hstep < r:
        raise ValueError("need 0 < hstep < r")
    xr = cesaro_average(h_, r, x, levels).value
    lhs = sup_norm(h_.apply(hstep, xr) - xr)
    grid = np.union1d(np.linspace(0.0, hstep + r, grid_points), [hstep, r])
    sup = max(sup_norm(h_.apply(s, x)) for s in grid)
    rhs = 2.0 * hstep / r * sup
    return CheckReport(lhs, rhs, lhs <= rhs, grid=len(grid),
                       details={"r": r, "h": hstep, "sup_orbit_norm": sup})


def fit_type_bound(h, omega: float, T_horizon: float = 1.0, grid=None, samples=None) -> TypeBound:
    """Empirical ``M = max e^{-omega t} ||T(t)x|| / ||x||`` over a time grid.

    Without ``samples`` the ratio is the induced operator norm, i.e. the
    supremum over all ``x``. Zero samples are skipped. The result is a grid
    certificate, not a global bound.
    """
    h = _as_handle(h)
    ts = default_time_grid(T_horizon) if grid is None else np.asarray(grid, dtype=float)
    if samples is not None:
        xs = _samples(samples, h.dim)
        xs = xs[np.max(np.abs(xs), axis=1) > 0]
    best = 1.0
    for t in ts:
        if samples is None:
            ratio = op_norm(h.operator(t))
        else:
            ys = h.apply(t, xs.T).T
            ratio = float(np.max(np.max(np.abs(ys), axis=1) / np.max(np.abs(xs), axis=1)))
        best = max(best, math.exp(-omega * t) * ratio)
    return TypeBound(best, float(omega))
