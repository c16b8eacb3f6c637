"""Exact tails, Chernoff bounds and stochastic domination for the dominating-variable constructions.

Tails ``P[X > c]`` are the primitive: every distribution evaluates them in
closed form or through regularized incomplete gamma functions, so domination
verdicts are deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special, stats

__all__ = [
    "Distribution",
    "Exponential",
    "Gamma",
    "Poisson",
    "CeilScaledPoisson",
    "GammaDominator",
    "PoissonDominator",
    "PointMass",
    "parse_distribution",
    "tail",
    "upper_quantile",
    "expectation",
    "phi_gamma",
    "phi_poisson",
    "ChernoffResult",
    "chernoff_bound",
    "exponential_log_mgf",
    "poisson_log_mgf",
    "DominationVerdict",
    "dominates",
    "domination_expectation_check",
    "gamma_dominator_check",
    "poisson_dominator_check",
    "ceil_cells",
]

TAIL_CUTOFF = 1e-10
GRID_SIZE = 512


def phi_gamma(c, alpha):
    """``c alpha - 1 - log(c alpha)``; increasing in ``alpha`` once ``c alpha >= 1``."""
    ca = np.asarray(c, dtype=float) * np.asarray(alpha, dtype=float)
    if np.any(ca <= 0):
        raise ValueError("phi_gamma needs c * alpha > 0")
    out = ca - 1.0 - np.log(ca)
    return float(out) if out.ndim == 0 else out


def phi_poisson(a, b):
    """``a log(a / b) - a + b`` for ``a, b > 0``; decreasing in ``b`` on ``b <= a``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("phi_poisson needs a > 0 and b > 0")
    out = a * np.log(a / b) - a + b
    return float(out) if out.ndim == 0 else out


class Distribution:
    """Base class. Subclasses implement ``sf`` (``P[X > c]``) on arrays."""

    lattice = False

    def sf(self, c):
        raise NotImplementedError

    def __call__(self, c):
        return self.sf(c)

    @property
    def support_min(self) -> float:
        return 0.0

    def breakpoints(self) -> list[float]:
        return [self.support_min]

    def pmf(self, k):
        """Mass at integer atoms, from tail differences."""
        k = np.asarray(k, dtype=float)
        return self.sf(k - 1.0) - self.sf(k)

    def pdf(self, c):
        raise NotImplementedError(f"{type(self).__name__} has no density")


def _scalar_or_array(out: np.ndarray):
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def sf(self, c):
        c = np.asarray(c, dtype=float)
        return _scalar_or_array(np.where(c < 0, 1.0, np.exp(-self.rate * np.maximum(c, 0.0))))

    def pdf(self, c):
        c = np.asarray(c, dtype=float)
        return _scalar_or_array(np.where(c < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(c, 0.0))))


@dataclass(frozen=True)
class Gamma(Distribution):
    """Shape ``shape`` (integer), rate ``rate``; the mean of ``shape`` Exp(rate/shape) draws when ``rate = shape * lam``."""

    shape: int
    rate: float

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise ValueError("shape must be an integer >= 1")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / self.rate**2

    def sf(self, c):
        c = np.asarray(c, dtype=float)
        return _scalar_or_array(np.where(c <= 0, 1.0, special.gammaincc(self.shape, self.rate * np.maximum(c, 0.0))))

    def pdf(self, c):
        return _scalar_or_array(np.asarray(stats.gamma.pdf(c, self.shape, scale=1.0 / self.rate)))


@dataclass(frozen=True)
class Poisson(Distribution):
    mean: float
    lattice = True

    def __post_init__(self):
        if not self.mean >= 0:
            raise ValueError("mean must be >= 0")

    def sf(self, c):
        c = np.asarray(c, dtype=float)
        k = np.floor(np.maximum(c, 0.0))
        out = special.gammainc(k + 1.0, self.mean) if self.mean > 0 else np.zeros_like(k)
        return _scalar_or_array(np.where(c < 0, 1.0, out))


@dataclass(frozen=True)
class CeilScaledPoisson(Distribution):
    """``ceil(Z / n)`` with ``Z ~ Poisson(n t)``."""

    n: int
    t: float
    lattice = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be an integer >= 1")
        if not self.t >= 0:
            raise ValueError("t must be >= 0")

    @property
    def mean(self) -> float:
        return float(np.sum(np.arange(len(ceil_cells(self))) * ceil_cells(self)))

    def sf(self, c):
        c = np.asarray(c, dtype=float)
        k = np.floor(np.maximum(c, 0.0))
        mu = self.n * self.t
        out = special.gammainc(self.n * k + 1.0, mu) if mu > 0 else np.zeros_like(k)
        return _scalar_or_array(np.where(c < 0, 1.0, out))


@dataclass(frozen=True)
class GammaDominator(Distribution):
    """``P[Y > c] = exp(-phi_gamma(c, lam0))`` on ``[1/lam0, inf)``, and 1 below."""

    lam0: float

    def __post_init__(self):
        if not self.lam0 > 0:
            raise ValueError("lam0 must be positive")

    @property
    def support_min(self) -> float:
        return 1.0 / self.lam0

    def sf(self, c):
        c = np.asarray(c, dtype=float)
        cc = np.maximum(c, 1.0 / self.lam0)
        return _scalar_or_array(np.where(c < 1.0 / self.lam0, 1.0, np.exp(-phi_gamma(cc, self.lam0))))

    def pdf(self, c):
        c = np.asarray(c, dtype=float)
        cc = np.maximum(c, 1.0 / self.lam0)
        dens = (self.lam0 - 1.0 / cc) * np.exp(-phi_gamma(cc, self.lam0))
        return _scalar_or_array(np.where(c < 1.0 / self.lam0, 0.0, dens))


@dataclass(frozen=True)
class PoissonDominator(Distribution):
    """Integer-valued on ``{k >= ceil(T)}`` with ``P[Y > k] = exp(-phi_poisson(k, T))``."""

    T: float
    lattice = True

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def support_min(self) -> float:
        return float(math.ceil(self.T))

    def sf(self, c):
        c = np.asarray(c, dtype=float)
        k = np.floor(c)
        base = math.ceil(self.T)
        kk = np.maximum(k, base)
        return _scalar_or_array(np.where(k < base, 1.0, np.exp(-phi_poisson(kk, self.T))))


@dataclass(frozen=True)
class PointMass(Distribution):
    value: float

    @property
    def lattice(self) -> bool:
        return float(self.value).is_integer()

    @property
    def mean(self) -> float:
        return float(self.value)

    @property
    def support_min(self) -> float:
        return float(self.value)

    def sf(self, c):
        c = np.asarray(c, dtype=float)
        return _scalar_or_array(np.where(c < self.value, 1.0, 0.0))


_PARSERS = {
    "exponential": lambda a: Exponential(float(a[0])),
    "gamma": lambda a: Gamma(int(a[0]), float(a[1])),
    "poisson": lambda a: Poisson(float(a[0])),
    "ceil-poisson": lambda a: CeilScaledPoisson(int(a[0]), float(a[1])),
    "gamma-dominator": lambda a: GammaDominator(float(a[0])),
    "poisson-dominator": lambda a: PoissonDominator(float(a[0])),
    "point": lambda a: PointMass(float(a[0])),
}


def parse_distribution(text: str) -> Distribution:
    """Parse ``"name:p1,p2"``, e.g. ``"gamma:3,6"`` or ``"poisson-dominator:2"``."""
    name, _, args = text.partition(":")
    name = name.strip().lower()
    if name not in _PARSERS:
        raise ValueError(f"unknown distribution {name!r}; choose from {sorted(_PARSERS)}")
    parts = [p for p in args.split(",") if p.strip()]
    try:
        return _PARSERS[name](parts)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad parameters for {name}: {args!r} ({exc})") from None


def tail(d: Distribution, c):
    """``P[X > c]``."""
    if not isinstance(d, Distribution):
        raise TypeError("tail needs a Distribution")
    return d.sf(c)


def upper_quantile(d: Distribution, p: float) -> float:
    """Smallest ``c`` (to bisection precision) with ``P[X > c] <= p``."""
    lo = d.support_min - 1.0
    if d.sf(lo) <= p:
        return lo
    hi = max(1.0, abs(d.support_min) + 1.0)
    while d.sf(hi) > p:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ArithmeticError("tail does not decay")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if d.sf(mid) > p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
    if d.lattice:
        return float(math.floor(hi))
    return hi


def expectation(d: Distribution, f: Callable[[float], float], tol: float = 1e-14) -> float:
    """``E[f(X)]`` for bounded ``f`` by exact lattice summation or adaptive quadrature."""
    if isinstance(d, PointMass):
        return float(f(d.value))
    upper = upper_quantile(d, tol)
    if d.lattice:
        ks = np.arange(d.support_min if d.support_min >= 0 else 0, upper + 1.0)
        if isinstance(d, CeilScaledPoisson):
            cells = ceil_cells(d, tol)
            ks = np.arange(len(cells))
            masses = cells
        else:
            masses = d.pmf(ks)
        return float(sum(m * f(k) for k, m in zip(ks, masses)))
    a = d.support_min
    pts = [p for p in (a, a + 1.0, d.mean if hasattr(d, "mean") else a) if a < p < upper]
    val, _ = integrate.quad(lambda s: f(s) * d.pdf(s), a, upper, points=pts or None,
                            limit=400, epsabs=1e-13, epsrel=1e-12)
    return float(val)


@dataclass
class ChernoffResult:
    bound: float  # array when n is an array
    theta: float
    rate: float


def exponential_log_mgf(rate: float):
    """Log-mgf of Exp(rate) (array-capable) and its domain edge ``rate``."""
    return (lambda th: -np.log1p(-np.asarray(th) / rate)), rate


def poisson_log_mgf(mean: float):
    return (lambda th: mean * np.expm1(th)), math.inf


def chernoff_bound(log_mgf: Callable[[float], float], c: float, n: int,
                   theta_max: float, grid_size: int = 256) -> ChernoffResult:
    """Bound ``P[(1/n) sum X_i > c] <= exp(-n sup_theta (c theta - log E e^{theta X}))``.

    The rate is maximized over ``0 < theta < theta_max`` on a grid and then
    refined with a bounded Brent search (the rate is flat at its maximum, so
    a ``1e-9`` tolerance in ``theta`` is ample). Any feasible ``theta`` gives a
    valid bound, so optimizer error can only loosen the result.

    The optimal ``theta`` does not depend on ``n``; an array ``n`` gives an
    array of bounds from a single optimization.
    """
    if not theta_max > 0:
        raise ValueError("no feasible theta: theta_max must be positive")

    def rate(th: float) -> float:
        try:
            v = c * th - float(log_mgf(th))
        except (ValueError, OverflowError, ZeroDivisionError):
            return -math.inf
        return v if math.isfinite(v) else -math.inf

    hi = theta_max
    if not math.isfinite(hi):
        hi = 1.0
        while hi < 2.0**60 and rate(2.0 * hi) > rate(hi):
            hi *= 2.0
        hi *= 2.0
    thetas = hi * np.arange(1, grid_size + 1) / (grid_size + 1)
    vals = _grid_rates(log_mgf, c, thetas)
    if vals is None:
        vals = np.array([rate(th) for th in thetas])
    if not np.any(np.isfinite(vals)):
        raise ValueError("no feasible theta: log-mgf infinite on the whole grid")
    i = int(np.argmax(vals))
    best_th, best = float(thetas[i]), float(vals[i])
    lo_b = thetas[i - 1] if i > 0 else 0.0
    hi_b = thetas[i + 1] if i + 1 < len(thetas) else hi
    res = optimize.minimize_scalar(lambda th: -rate(th), bounds=(lo_b, hi_b), method="bounded",
                                   options={"xatol": 1e-9 * max(1.0, hi)})
    if res.success and 0 < res.x < hi and -res.fun > best:
        best_th, best = float(res.x), float(-res.fun)
    best = max(best, 0.0)
    if np.ndim(n):
        return ChernoffResult(np.exp(-np.asarray(n, dtype=float) * best), best_th, best)
    return ChernoffResult(math.exp(-n * best), best_th, best)


def _grid_rates(log_mgf, c: float, thetas: np.ndarray):
    """Vectorized ``c theta - log_mgf(theta)``, or None if ``log_mgf`` is scalar-only."""
    try:
        with np.errstate(all="ignore"):
            lm = np.asarray(log_mgf(thetas), dtype=float)
    except (TypeError, ValueError, OverflowError, ZeroDivisionError):
        return None
    if lm.shape != thetas.shape:
        return None
    vals = c * thetas - lm
    return np.where(np.isfinite(vals), vals, -np.inf)


@dataclass
class DominationVerdict:
    passed: bool
    worst_c: float
    worst_gap: float
    n_points: int
    label: str
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.passed)

    def to_dict(self) -> dict:
        return {"pass": self.passed, "worst_c": self.worst_c, "worst_gap": self.worst_gap,
                "n_points": self.n_points, "label": self.label, **self.details}


def _domination_grid(d1: Distribution, d2: Distribution) -> np.ndarray:
    dists = (d1, d2)
    upper = max(upper_quantile(d, TAIL_CUTOFF) for d in dists)
    lower = min(d.support_min for d in dists)
    pts = [np.array([lower - 1.0, lower, upper])]
    lo_pos = max(upper * 1e-6, 1e-12) if lower <= 0 else lower
    if upper > lo_pos:
        pts.append(np.geomspace(lo_pos, upper, GRID_SIZE))
    pts.append(np.array([upper_quantile(d, 10.0**-k) for d in dists for k in range(1, 11)]))
    for d in dists:
        pts.append(np.asarray(d.breakpoints(), dtype=float))
        if d.lattice:
            pts.append(np.arange(math.floor(max(lower, d.support_min - 1.0)), math.floor(upper) + 2.0))
    grid = np.unique(np.concatenate(pts))
    atoms = grid[np.isclose(grid, np.round(grid))]
    left = atoms - 1e-9 * (1.0 + np.abs(atoms))
    return np.unique(np.concatenate([grid, left]))


def dominates(d1: Distribution, d2: Distribution, c_grid=None, atol: float = 1e-12,
              refine: bool = True) -> DominationVerdict:
    """Grid test of ``P[d1 > c] >= P[d2 > c] - atol``.

    The default grid joins 512 log-spaced points up to the ``1e-10`` upper
    quantile, the ``1e-k`` quantiles of both laws, every lattice point in
    range (and its left limit), and support breakpoints. When neither law is
    a lattice law, the gap is also minimized locally between the grid points
    neighbouring the worst ones.
    """
    grid = _domination_grid(d1, d2) if c_grid is None else np.unique(np.asarray(c_grid, dtype=float))
    gaps = np.asarray(d1.sf(grid)) - np.asarray(d2.sf(grid))
    j = int(np.argmin(gaps))
    worst_c, worst = float(grid[j]), float(gaps[j])
    label = "lattice-exact" if (d1.lattice and d2.lattice and c_grid is None) else "grid-verified"
    refined = 0
    if refine and not d1.lattice and not d2.lattice and len(grid) > 2:
        gap_fn = lambda c: float(d1.sf(c)) - float(d2.sf(c))  # noqa: E731
        for i in np.argsort(gaps)[:5]:
            a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
            if b <= a:
                continue
            res = optimize.minimize_scalar(gap_fn, bounds=(a, b), method="bounded")
            refined += 1
            if res.fun < worst:
                worst, worst_c = float(res.fun), float(res.x)
    return DominationVerdict(worst >= -atol, worst_c, worst, len(grid), label,
                             {"refined_intervals": refined})


def domination_expectation_check(d1: Distribution, d2: Distribution, funcs: dict,
                                 atol: float = 1e-9) -> dict:
    """``E[phi(d1)] >= E[phi(d2)] - atol`` for each bounded increasing test function."""
    rows = {}
    for name, f in funcs.items():
        e1, e2 = expectation(d1, f), expectation(d2, f)
        rows[name] = {"E1": e1, "E2": e2, "pass": e1 >= e2 - atol}
    return {"pass": all(r["pass"] for r in rows.values()), "rows": rows}


def gamma_dominator_check(lam0: float, n_list, lam_list) -> dict:
    """``GammaDominator(lam0)`` against ``Gamma(n, n lam)`` for every pair."""
    if any(lam < lam0 for lam in lam_list):
        raise ValueError("every lambda must be >= lam0")
    y = GammaDominator(lam0)
    rows = []
    for n in n_list:
        for lam in lam_list:
            v = dominates(y, Gamma(int(n), n * lam))
            rows.append({"n": int(n), "lambda": float(lam), **v.to_dict()})
    return {"pass": all(r["pass"] for r in rows), "rows": rows}


def ceil_cells(d: CeilScaledPoisson, tol: float = 1e-14) -> np.ndarray:
    """pmf of ``ceil(Z/n)``: ``P[B=0] = P[Z=0]``, ``P[B=l+1] = sum_{k=1..n} P[Z = n l + k]``."""
    mu = d.n * d.t
    if mu == 0:
        return np.array([1.0])
    zmax = int(stats.poisson.isf(tol, mu)) + 1
    lmax = zmax // d.n + 1
    z = np.arange(1, d.n * lmax + 1)
    pz = stats.poisson.pmf(z, mu)
    cells = np.concatenate([[stats.poisson.pmf(0, mu)], pz.reshape(lmax, d.n).sum(axis=1)])
    return cells


def poisson_dominator_check(T: float, n_list, t_list) -> dict:
    """``PoissonDominator(T)`` against ``ceil(Poisson(n t)/n)`` for ``0 <= t <= T``."""
    if any(t > T for t in t_list):
        raise ValueError("every t must be <= T")
    y = PoissonDominator(T)
    rows = []
    for n in n_list:
        for t in t_list:
            b = CeilScaledPoisson(int(n), float(t))
            upper = max(upper_quantile(y, 1e-12), upper_quantile(b, 1e-12))
            ks = np.arange(-1.0, upper + 2.0)
            v = dominates(y, b, c_grid=ks)
            rows.append({"n": int(n), "t": float(t), **v.to_dict(), "label": "lattice-exact"})
    return {"pass": all(r["pass"] for r in rows), "rows": rows}
