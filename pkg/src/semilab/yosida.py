"""Yosida approximants and the semigroups they generate.

Everything is computed for the rescaled generator ``B = A - omega I`` and
mapped back with the factor ``exp(omega t)``, so the contraction machinery
applies whenever ``(M, omega) = (1, omega)`` is certified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix, as_vector, lu_solver, op_norm, sup_norm, SingularOperator
from .report import CheckReport
from .resolvent import SpectrumHit
from .semigroup import SERIES_TOL, TypeBound, certified_type_bound, default_time_grid, exp_series

__all__ = [
    "YosidaScheme",
    "yosida_approximant",
    "yosida_semigroup",
    "yosida_limit",
    "YosidaCertificate",
    "joint_equicontinuity_scan",
]

FORM_ATOL = 1e-10


def _resolvent_matrix(a: np.ndarray, n: float) -> np.ndarray:
    try:
        solver = lu_solver(n * np.eye(a.shape[0]) - a)
    except SingularOperator:
        raise SpectrumHit(n) from None
    return solver(np.eye(a.shape[0]))


def yosida_approximant(A, n: float) -> np.ndarray:
    """``A_n = n^2 R(n) - n I``, cross-checked against ``n A R(n)``."""
    a = as_matrix(A)
    r = _resolvent_matrix(a, n)
    first = n * n * r - n * np.eye(a.shape[0])
    second = n * (a @ r)
    scale = max(1.0, op_norm(first))
    gap = float(np.max(np.abs(first - second)))
    if gap > FORM_ATOL * scale:
        raise ArithmeticError(f"approximant forms disagree by {gap:.3e} at n = {n}")
    return first


@dataclass
class YosidaScheme:
    """Yosida approximants of ``generator`` at the given indices.

    ``type_bound`` defaults to ``(1, max(0, log_norm(A)))``, which is
    certified; the approximants are those of ``A - omega I``.
    """

    generator: np.ndarray
    indices: list
    type_bound: TypeBound | None = None
    approximants: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.generator = as_matrix(self.generator)
        if self.type_bound is None:
            tb = certified_type_bound(self.generator)
            self.type_bound = TypeBound(1.0, max(0.0, tb.omega))
        self.indices = sorted(int(n) for n in self.indices)
        for n in self.indices:
            self.approximant(n)

    @property
    def omega(self) -> float:
        return self.type_bound.omega

    @property
    def shifted(self) -> np.ndarray:
        return self.generator - self.omega * np.eye(self.generator.shape[0])

    @property
    def contraction(self) -> bool:
        return self.type_bound.M == 1.0

    def approximant(self, n: int) -> np.ndarray:
        if n not in self.approximants:
            self.approximants[n] = yosida_approximant(self.shifted, n)
        return self.approximants[n]


def _scheme(scheme_or_a, n_list=()) -> YosidaScheme:
    if isinstance(scheme_or_a, YosidaScheme):
        return scheme_or_a
    return YosidaScheme(scheme_or_a, list(n_list))


def yosida_semigroup(scheme, n: int, t: float, x, tol: float = SERIES_TOL) -> np.ndarray:
    """``T_n(t) x = e^{omega t} exp(t B_n) x`` with ``B_n`` the approximant of the shifted generator.

    The series is evaluated in its Poisson-weighted form
    ``e^{-n t} sum_k (n t)^k (n R(n))^k x / k!`` (shift ``n``).
    """
    s = _scheme(scheme, [n])
    b_n = s.approximant(n)
    return math.exp(s.omega * t) * exp_series(b_n, t, x, tol, shift=float(n))


@dataclass
class YosidaCertificate:
    n: int
    m: int
    cauchy_bound: float
    limit_gap_bound: float
    rigorous: bool


def yosida_limit(scheme, t: float, x, n_pair) -> tuple[np.ndarray, YosidaCertificate]:
    """``T_n(t)x`` for the larger index, with the Cauchy certificate.

    ``cauchy_bound = e^{omega t} t ||B_n x - B_m x||`` bounds
    ``||T_n(t)x - T_m(t)x||`` and ``limit_gap_bound = e^{omega t} t ||B_n x - B x||``
    bounds the distance to the true semigroup. Both are rigorous only when
    ``M = 1`` is certified.
    """
    s = _scheme(scheme, n_pair)
    x = as_vector(x)
    m, n = sorted(int(v) for v in n_pair)
    b = s.shifted
    bn = s.approximant(n)
    bm = s.approximant(m)
    fac = math.exp(s.omega * t) * t
    cert = YosidaCertificate(
        n=n,
        m=m,
        cauchy_bound=fac * sup_norm(bn @ x - bm @ x),
        limit_gap_bound=fac * sup_norm(bn @ x - b @ x),
        rigorous=s.contraction,
    )
    return yosida_semigroup(s, n, t, x), cert


def joint_equicontinuity_scan(scheme, T_horizon: float, grid=None, rtol: float = 1e-9) -> CheckReport:
    """Scan ``sup_{n, t <= T} e^{-omega t} ||T_n(t)||`` after certifying the resolvent bound.

    The resolvent bound is ``sup_n max_{k <= n} ||(n R(n))^k|| <= M`` over the
    scheme's indices, for the rescaled generator.
    """
    s = _scheme(scheme)
    M = s.type_bound.M
    bound = M * (1.0 + rtol)
    dim = s.generator.shape[0]

    res_worst = 1.0
    for n in s.indices:
        nr = n * _resolvent_matrix(s.shifted, n)
        p = np.eye(dim)
        for _ in range(n):
            p = nr @ p
            res_worst = max(res_worst, op_norm(p))
    certified = res_worst <= bound

    ts = default_time_grid(T_horizon) if grid is None else np.asarray(grid, dtype=float)
    worst, arg = 0.0, None
    for n in s.indices:
        for t in ts:
            v = op_norm(exp_series(s.approximant(n), t, np.eye(dim), shift=float(n)))
            if v > worst:
                worst, arg = v, {"n": n, "t": float(t)}
    return CheckReport(worst, bound, bool(certified and worst <= bound), grid=len(ts),
                       details={"resolvent_bound": res_worst, "resolvent_certified": certified,
                                "argmax": arg, "shift": s.omega})
