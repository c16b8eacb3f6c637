"""Weighted-sup seminorms, truncated countable convex combinations and strict convergence.

A seminorm is ``p(f) = max_m a_m max_{i in K_m} |f_i|``. It belongs to the
norm-dominated family iff ``max_m a_m <= 1``; any such ``p`` satisfies
``p <= ||.||``, which is what makes truncating a countable mixture
certifiable: dropping mass ``tail_mass`` changes the value by at most
``tail_mass * ||f||``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import as_vector, sup_norm
from .prob import Distribution

__all__ = [
    "SeminormSpec",
    "ConvexCombo",
    "eval_seminorm",
    "combine",
    "in_N",
    "dominated_by_norm_check",
    "mixture_seminorm",
    "strict_converges",
]

WEIGHT_SUM_TOL = 1e-12
MIXTURE_TAIL = 1e-10


@dataclass(frozen=True, eq=False)
class SeminormSpec:
    weights: tuple
    sets: tuple
    dim: int

    def __post_init__(self):
        w = tuple(float(a) for a in self.weights)
        sets = tuple(tuple(int(i) for i in k) for k in self.sets)
        if not w or len(w) != len(sets):
            raise ValueError("need one weight per index set")
        if any(a <= 0 for a in w):
            raise ValueError("weights must be strictly positive")
        if any(b > a for a, b in zip(w, w[1:])):
            raise ValueError("weights must be listed in nonincreasing order")
        for k in sets:
            if not k:
                raise ValueError("index sets must be nonempty")
            if min(k) < 0 or max(k) >= self.dim:
                raise IndexError(f"index set {k} out of range for dim {self.dim}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sets", sets)

    def __call__(self, f) -> float:
        return eval_seminorm(self, f)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "sets": [list(k) for k in self.sets]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, dim: int) -> "SeminormSpec":
        return cls(data["weights"], data["sets"], dim)


def eval_seminorm(spec: SeminormSpec, f) -> float:
    f = as_vector(f)
    if f.size != spec.dim:
        raise ValueError(f"element of dim {f.size} for seminorm on dim {spec.dim}")
    a = np.abs(f)
    return max(w * float(np.max(a[list(k)])) for w, k in zip(spec.weights, spec.sets))


def in_N(spec: SeminormSpec) -> bool:
    return max(spec.weights) <= 1.0


def dominated_by_norm_check(spec: SeminormSpec, samples=None, n_samples: int = 1000, seed: int = 0) -> dict:
    """Structural membership plus a randomized ``p(f) <= ||f||`` test."""
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = rng.standard_normal((n_samples, spec.dim)) * rng.exponential(1.0, (n_samples, 1))
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    ratios = [eval_seminorm(spec, f) / sup_norm(f) for f in samples if sup_norm(f) > 0]
    worst = max(ratios) if ratios else 0.0
    member = in_N(spec)
    return {"in_N": member, "worst_ratio": worst, "violations": int(sum(r > 1.0 for r in ratios)),
            "n_samples": len(ratios), "pass": member and worst <= 1.0}


@dataclass(eq=False)
class ConvexCombo:
    """``p = sum_k alpha_k p_k`` truncated; ``tail_mass`` is the dropped weight."""

    terms: list = field(default_factory=list)
    tail_mass: float = 0.0

    def __post_init__(self):
        self.terms = [(float(a), s) for a, s in self.terms]
        if self.tail_mass < 0:
            raise ValueError("tail_mass must be >= 0")
        for a, s in self.terms:
            if not 0 < a <= 1:
                raise ValueError(f"weight {a} outside (0, 1]")
            if not in_N(s):
                raise ValueError("every term must be norm-dominated (max weight <= 1)")
        total = sum(a for a, _ in self.terms) + self.tail_mass
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights plus tail mass sum to {total!r}, not 1")

    def __call__(self, f) -> float:
        return combine(self, f)

    def to_dict(self) -> dict:
        return {"terms": [{"alpha": a, **s.to_dict()} for a, s in self.terms], "tail_mass": self.tail_mass}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, dim: int) -> "ConvexCombo":
        terms = [(t["alpha"], SeminormSpec(t["weights"], t["sets"], dim)) for t in data["terms"]]
        return cls(terms, float(data.get("tail_mass", 0.0)))


def combine(combo: ConvexCombo, f) -> float:
    """Truncated value; the full countable value lies within ``tail_mass * ||f||`` above it."""
    return float(sum(a * eval_seminorm(s, f) for a, s in combo.terms))


def mixture_seminorm(dist: Distribution, seq: Sequence[SeminormSpec] | Callable[[int], SeminormSpec],
                     tail_tol: float = MIXTURE_TAIL) -> ConvexCombo:
    """``E[q_{ceil Z}]`` as a convex combination with weights ``P[ceil Z = k]``.

    ``seq`` is a list ``q_0, q_1, ...`` or a callable ``k -> q_k``. The
    cutoff is the first ``k`` with ``P[ceil Z > k] <= tail_tol``; zero
    weights are dropped.
    """
    if not isinstance(dist, Distribution):
        raise TypeError(f"{type(dist).__name__} has no ceil-cell evaluation")
    get = seq if callable(seq) else (lambda k: seq[k])
    terms = []
    prev_tail = 1.0
    k = 0
    while True:
        # P[ceil Z > k] = P[Z > k] on the integers
        tail_k = float(dist.sf(float(k)))
        mass = prev_tail - tail_k
        if mass > 0:
            try:
                q = get(k)
            except IndexError:
                raise ValueError(f"sequence too short: need q_{k} to reach tail {tail_tol:g}") from None
            terms.append((mass, q))
        prev_tail = tail_k
        if tail_k <= tail_tol:
            break
        k += 1
    total = sum(a for a, _ in terms)
    return ConvexCombo(terms, max(0.0, 1.0 - total))


def strict_converges(seq, family, limit=None, norm_bound: float = np.inf, tol: float = 1e-8) -> dict:
    """Two-condition verdict for strict convergence of a finite sequence.

    ``bounded``: ``sup_n ||f_n|| <= norm_bound``. ``compact``: on every index
    set of ``family`` the final uniform error ``max_{i in K} |f_N - f|`` is
    at most ``tol`` and the per-set errors are nonincreasing over the last
    half of the sequence. ``limit`` defaults to zero.
    """
    fs = [as_vector(f) for f in seq]
    if not fs:
        raise ValueError("empty sequence")
    lim = np.zeros_like(fs[0]) if limit is None else as_vector(limit)
    norms = [sup_norm(f) for f in fs]
    bounded = max(norms) <= norm_bound
    per_set = []
    for k in family:
        idx = list(k)
        errs = [float(np.max(np.abs(f[idx] - lim[idx]))) for f in fs]
        tail = errs[len(errs) // 2:]
        settled = all(b <= a + tol for a, b in zip(tail, tail[1:]))
        per_set.append({"set": idx, "final_error": errs[-1], "pass": errs[-1] <= tol and settled})
    compact = all(r["pass"] for r in per_set)
    return {"bounded": bounded, "compact_uniform": compact, "converges": bounded and compact,
            "sup_norm": max(norms), "sets": per_set}
