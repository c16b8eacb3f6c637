"""Resolvents: Laplace-transform quadrature, direct solves and resolvent-power bounds.

Only real spectral parameters are handled; complex ``lambda`` enters the
theory through its real part alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SingularOperator, as_matrix, as_vector, lu_solver, sup_norm
from .report import CheckReport
from .semigroup import SemigroupHandle, TypeBound, certified_type_bound

__all__ = [
    "OutsideCertifiedRegion",
    "SpectrumHit",
    "ResolventHandle",
    "resolvent_quadrature",
    "resolvent_solve",
    "resolvent_power",
    "hille_yosida_check",
    "HilleYosidaReport",
    "resolvent_convergence_check",
    "renorm_estimate",
]

PANELS_PER_UNIT = 4
GAUSS_NODES = 20


class OutsideCertifiedRegion(ValueError):
    """lambda does not exceed the growth rate of the certified type bound."""


class SpectrumHit(SingularOperator):
    """``lambda - A`` is singular: lambda lies in the spectrum."""

    def __init__(self, lam: float, step: int | None = None, n: int | None = None):
        self.lam = lam
        self.step = step
        self.n = n
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"lambda = {lam:g} is in the spectrum{where}")


def _resolvent_solver(a: np.ndarray, lam: float):
    try:
        return lu_solver(lam * np.eye(a.shape[0]) - a)
    except SingularOperator:
        raise SpectrumHit(lam) from None


@dataclass
class ResolventHandle:
    """Resolvent of ``generator`` evaluated by ``quadrature`` or ``direct_solve``."""

    generator: np.ndarray
    method: str = "direct_solve"
    type_bound: TypeBound | None = None
    tol: float = 1e-11
    quadrature: dict = field(default_factory=dict)

    def __post_init__(self):
        self.generator = as_matrix(self.generator)
        if self.method not in ("quadrature", "direct_solve"):
            raise ValueError(f"unknown method {self.method!r}")

    def __call__(self, lam: float, x) -> np.ndarray:
        if self.method == "direct_solve":
            return resolvent_solve(self.generator, lam, x)
        y, info = resolvent_quadrature(SemigroupHandle(self.generator), lam, x,
                                       self.type_bound, self.tol, return_info=True)
        self.quadrature = info
        return y


def resolvent_quadrature(h, lam: float, x, type_bound: TypeBound | None = None,
                         tol: float = 1e-11, panels_per_unit: int = PANELS_PER_UNIT,
                         nodes: int = GAUSS_NODES, return_info: bool = False):
    """``R(lam) x = int_0^inf e^{-lam t} T(t) x dt`` by truncated Gauss-Legendre.

    The truncation point ``t_max`` makes the tail majorant
    ``M ||x|| e^{-(lam - omega) t_max} / (lam - omega)`` at most ``tol / 2``.
    Without ``type_bound`` the certified ``(1, log_norm(G))`` bound is used.
    """
    h = h if isinstance(h, SemigroupHandle) else SemigroupHandle(h)
    x = as_vector(x)
    tb = type_bound or certified_type_bound(h.generator)
    gap = lam - tb.omega
    if not gap > 0:
        raise OutsideCertifiedRegion(f"lambda = {lam:g} must exceed omega = {tb.omega:g}")
    xnorm = sup_norm(x)
    if xnorm == 0.0:
        out = np.zeros_like(x)
        return (out, {"t_max": 0.0, "panels": 0, "tail_bound_used": 0.0}) if return_info else out
    t_max = max(0.0, math.log(2.0 * tb.M * xnorm / (gap * tol)) / gap)
    panels = max(1, int(math.ceil(panels_per_unit * t_max)))
    width = t_max / panels
    z, w = np.polynomial.legendre.leggauss(nodes)
    offsets = 0.5 * width * (z + 1.0)
    weights = 0.5 * width * w
    node_ops = [h.operator(s) for s in offsets]
    step = h.operator(width)

    total = np.zeros_like(x)
    y = x.copy()
    for p in range(panels):
        a = p * width
        for s, wt, op in zip(offsets, weights, node_ops):
            total += wt * math.exp(-lam * (a + s)) * (op @ y)
        y = step @ y
    tail = tb.M * xnorm * math.exp(-gap * t_max) / gap
    if return_info:
        return total, {"t_max": t_max, "panels": panels, "tail_bound_used": tail}
    return total


def resolvent_solve(A, lam: float, x) -> np.ndarray:
    """Solve ``(lam I - A) y = x``."""
    a = as_matrix(A)
    return _resolvent_solver(a, lam)(as_vector(x))


def resolvent_power(A, lam: float, n: int, x, lam_prime: float | None = None) -> np.ndarray:
    """``(n lam' R(n lam))^n x`` by ``n`` successive solves (``lam'`` defaults to ``lam``).

    ``x`` may also be a matrix of column vectors.
    """
    a = as_matrix(A)
    if n < 0:
        raise ValueError("n must be >= 0")
    lp = lam if lam_prime is None else lam_prime
    y = np.array(x, dtype=float)
    if n == 0:
        return y
    try:
        solver = _resolvent_solver(a, n * lam)
    except SpectrumHit as exc:
        raise SpectrumHit(n * lam, step=1, n=n) from exc
    for _ in range(n):
        y = n * lp * solver(y)
    return y


@dataclass
class HilleYosidaReport:
    worst_ratio: float
    argmax: dict
    passed: bool
    bound: float
    table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"worst_ratio": self.worst_ratio, "argmax": self.argmax,
                "pass": self.passed, "bound": self.bound}


def hille_yosida_check(A, M: float, omega: float, n_max: int, lam_grid, samples=None,
                       rtol: float = 1e-9) -> HilleYosidaReport:
    """Worst ``||(n (lam - omega) R(n lam))^n x|| / ||x||`` over ``n <= n_max`` and the grid.

    With ``samples=None`` the ratio is the induced operator norm. Passes iff
    the worst ratio is at most ``M (1 + rtol)``. Raises :class:`SpectrumHit`
    when some ``n lam`` is an eigenvalue.
    """
    a = as_matrix(A)
    if n_max > 64:
        raise ValueError("n_max must be <= 64")
    lams = [float(v) for v in lam_grid]
    if any(lam <= omega for lam in lams):
        raise ValueError("every lambda in the grid must exceed omega")
    xs = np.eye(a.shape[0]) if samples is None else np.atleast_2d(np.asarray(samples, float)).T
    xnorms = np.max(np.abs(xs), axis=0)
    keep = xnorms > 0
    xs, xnorms = xs[:, keep], xnorms[keep]

    worst, arg, table = -np.inf, {}, []
    for lam in lams:
        for n in range(1, n_max + 1):
            ys = resolvent_power(a, lam, n, xs, lam_prime=lam - omega)
            if samples is None:
                ratios = np.array([np.max(np.sum(np.abs(ys), axis=1))])
            else:
                ratios = np.max(np.abs(ys), axis=0) / xnorms
            j = int(np.argmax(ratios))
            r = float(ratios[j])
            table.append({"n": n, "lambda": lam, "ratio": r})
            if r > worst:
                worst = r
                arg = {"n": n, "lambda": lam, "sample": None if samples is None else j}
    bound = M * (1.0 + rtol)
    return HilleYosidaReport(float(worst), arg, bool(worst <= bound), M, table)


def resolvent_convergence_check(A, lam_seq, samples=None, tol: float = 1e-2,
                                slack: float = 1e-12) -> CheckReport:
    """Tabulate ``||lam R(lam) x - x||`` and ``||lam R(lam) A x - A x||`` along ``lam_seq``.

    Passes iff both columns are nonincreasing (up to ``slack``) and their
    final values are at most ``tol`` times ``||x||`` resp. ``||Ax||``.
    """
    a = as_matrix(A)
    lams = [float(v) for v in lam_seq]
    if any(b <= c for c, b in zip(lams, lams[1:])):
        raise ValueError("lambda sequence must be increasing")
    xs = np.eye(a.shape[0]) if samples is None else np.atleast_2d(np.asarray(samples, float)).T
    axs = a @ xs
    rows = []
    for lam in lams:
        solver = _resolvent_solver(a, lam)
        e1 = float(np.max(np.abs(lam * solver(xs) - xs)))
        e2 = float(np.max(np.abs(lam * solver(axs) - axs)))
        rows.append({"lambda": lam, "err_x": e1, "err_Ax": e2})
    mono = all(r1["err_x"] <= r0["err_x"] + slack and r1["err_Ax"] <= r0["err_Ax"] + slack
               for r0, r1 in zip(rows, rows[1:]))
    ref_x = float(np.max(np.abs(xs)))
    ref_ax = float(np.max(np.abs(axs)))
    final = rows[-1]
    ok_final = final["err_x"] <= tol * ref_x and final["err_Ax"] <= tol * ref_ax
    return CheckReport(max(final["err_x"], final["err_Ax"]), tol, bool(mono and ok_final),
                       grid=lams, details={"table": rows, "monotone": mono})


def renorm_estimate(A, mu_grid, n_max: int, x) -> float:
    """Grid lower estimate of ``|||x||| = sup_{mu, n >= 0} ||mu^n R(mu)^n x||``.

    Intended for generators with ``omega = 0``; the ``n = 0`` term makes the
    result at least ``||x||``.
    """
    a = as_matrix(A)
    x = as_vector(x)
    best = sup_norm(x)
    for mu in mu_grid:
        mu = float(mu)
        if not mu > 0:
            raise ValueError("mu must be positive")
        solver = _resolvent_solver(a, mu)
        y = x.copy()
        for _ in range(n_max):
            y = mu * solver(y)
            best = max(best, sup_norm(y))
    return best
