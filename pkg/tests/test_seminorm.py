import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from semilab.prob import Exponential, Gamma, PointMass, Poisson
from semilab.seminorm import (ConvexCombo, SeminormSpec, combine, dominated_by_norm_check,
                              eval_seminorm, in_N, mixture_seminorm, strict_converges)

from conftest import small_floats

F = np.array([1.0, -3.0, 2.0])
P_ALL = SeminormSpec([1.0], [[0, 1, 2]], 3)
P_HALF = SeminormSpec([0.5], [[0]], 3)
P_TWO = SeminormSpec([1.0, 0.1], [[0], [1, 2]], 3)


def test_eval_examples():
    assert eval_seminorm(P_ALL, F) == 3.0
    assert eval_seminorm(P_HALF, F) == 0.5
    assert eval_seminorm(P_TWO, F) == pytest.approx(1.0)
    assert P_TWO(F) == pytest.approx(1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SeminormSpec([1.0], [[]], 3)
    with pytest.raises(ValueError):
        SeminormSpec([0.5, 1.0], [[0], [1]], 3)
    with pytest.raises(ValueError):
        SeminormSpec([0.0], [[0]], 3)
    with pytest.raises(IndexError):
        SeminormSpec([1.0], [[3]], 3)
    with pytest.raises(ValueError):
        eval_seminorm(P_ALL, [1.0, 2.0])
    # ties are allowed
    SeminormSpec([0.5, 0.5], [[0], [1]], 3)


def test_combine_examples():
    assert combine(ConvexCombo([(1.0, P_TWO)]), F) == eval_seminorm(P_TWO, F)
    assert combine(ConvexCombo([(0.5, P_TWO), (0.5, P_TWO)]), F) == pytest.approx(eval_seminorm(P_TWO, F))
    assert combine(ConvexCombo([(0.5, P_HALF), (0.5, P_TWO)]), F) == pytest.approx(0.75)


def test_combo_validation():
    with pytest.raises(ValueError):
        ConvexCombo([(0.5, P_HALF), (0.4, P_TWO)])
    with pytest.raises(ValueError):
        ConvexCombo([(1.0, SeminormSpec([2.0], [[0]], 3))])
    ConvexCombo([(0.5, P_HALF), (0.4, P_TWO)], tail_mass=0.1)


def test_json_roundtrip():
    assert P_TWO.to_dict() == {"weights": [1.0, 0.1], "sets": [[0], [1, 2]]}
    again = SeminormSpec.from_dict(P_TWO.to_dict(), 3)
    assert again(F) == P_TWO(F)
    combo = ConvexCombo([(0.5, P_HALF), (0.4, P_TWO)], tail_mass=0.1)
    back = ConvexCombo.from_dict(combo.to_dict(), 3)
    assert back.tail_mass == 0.1 and back(F) == pytest.approx(combo(F))
    assert "tail_mass" in combo.to_json()


def test_membership_examples():
    assert in_N(SeminormSpec([1.0, 0.5], [[0], [1]], 2))
    assert not in_N(SeminormSpec([2.0], [[0]], 2))
    rep = dominated_by_norm_check(P_TWO, n_samples=1000)
    assert rep["pass"] and rep["violations"] == 0 and rep["n_samples"] == 1000
    bad = dominated_by_norm_check(SeminormSpec([2.0], [[0]], 2))
    assert not bad["pass"] and bad["worst_ratio"] > 1


def test_mixture_examples():
    q = P_TWO
    combo = mixture_seminorm(Poisson(2.0), lambda k: q)
    assert sum(a for a, _ in combo.terms) + combo.tail_mass == pytest.approx(1.0, abs=1e-12)
    assert combine(combo, F) == pytest.approx(q(F), abs=1e-9)
    seq = [P_ALL, P_HALF, P_TWO]
    point = mixture_seminorm(PointMass(1.0), seq)
    assert len(point.terms) == 1 and point.terms[0][1] is P_HALF
    with pytest.raises(TypeError):
        mixture_seminorm("poisson", seq)
    with pytest.raises(ValueError):
        mixture_seminorm(Poisson(5.0), seq)


def test_mixture_gamma_weight_against_monte_carlo():
    d = Gamma(2, 2.0)
    combo = mixture_seminorm(d, lambda k: P_ALL)
    alpha1 = combo.terms[0][0]
    assert alpha1 == pytest.approx(special.gammainc(2, 2.0), rel=1e-14)
    z = np.random.default_rng(2024).gamma(2.0, 0.5, 1_000_000)
    hits = (np.ceil(z) == 1).astype(float)
    assert abs(hits.mean() - alpha1) <= 3 * hits.std() / math.sqrt(hits.size)


def _increasing_family(k):
    return SeminormSpec([1.0 - 2.0 ** (-k - 1)], [[0, 1, 2]], 3)


def test_monotone_mixtures(rng):
    m2 = mixture_seminorm(Poisson(2.0), _increasing_family)
    m1 = mixture_seminorm(Poisson(1.0), _increasing_family)
    for f in rng.standard_normal((1000, 3)):
        slack = (m1.tail_mass + m2.tail_mass) * np.max(np.abs(f))
        assert combine(m2, f) >= combine(m1, f) - slack


@settings(max_examples=100, deadline=None)
@given(st.lists(small_floats(), min_size=3, max_size=3), st.lists(small_floats(), min_size=3, max_size=3),
       small_floats(-10, 10))
def test_seminorm_axioms(f, g, c):
    f, g = np.array(f), np.array(g)
    for p in (P_ALL, P_HALF, P_TWO):
        assert p(f + g) <= p(f) + p(g) + 1e-12
        assert p(c * f) == pytest.approx(abs(c) * p(f), rel=1e-12, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_combination_closure(seed):
    r = np.random.default_rng(seed)
    dim = 5
    specs = []
    for _ in range(4):
        m = r.integers(1, 4)
        w = np.sort(r.uniform(0.01, 1.0, m))[::-1]
        sets = [sorted(r.choice(dim, r.integers(1, dim + 1), replace=False)) for _ in range(m)]
        specs.append(SeminormSpec(w, sets, dim))
    alpha = r.dirichlet(np.ones(4))
    combo = ConvexCombo(list(zip(alpha[:-1], specs[:-1])) + [(1.0 - alpha[:-1].sum(), specs[-1])])
    for f in r.standard_normal((50, dim)):
        assert combine(combo, f) <= np.max(np.abs(f)) * (1 + 1e-12)


def test_strict_convergence():
    family = [[0], [0, 1], [0, 1, 2]]
    good = [np.array([1.0, -1.0, 2.0]) / n for n in range(1, 200)]
    rep = strict_converges(good, family, tol=0.02)
    assert rep["converges"] and rep["bounded"]
    unbounded = [np.array([0.0, 0.0, float(n)]) for n in range(1, 20)]
    assert not strict_converges(unbounded, [[0]], norm_bound=10.0)["converges"]
    stuck = [np.array([1.0, (-1.0) ** n, 0.0]) for n in range(20)]
    rep = strict_converges(stuck, family)
    assert not rep["compact_uniform"] and rep["sets"][0]["pass"] is False
    limit = np.array([1.0, 1.0, 1.0])
    assert strict_converges([limit + 1e-10 / n for n in range(1, 30)], family, limit=limit)["converges"]
    with pytest.raises(ValueError):
        strict_converges([], family)
