import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semilab.core import op_norm, sup_norm
from semilab.generate import random_dissipative, random_q_matrix
from semilab.resolvent import SpectrumHit
from semilab.semigroup import SemigroupHandle, TypeBound
from semilab.yosida import (YosidaScheme, joint_equicontinuity_scan, yosida_approximant, yosida_limit,
                            yosida_semigroup)

from conftest import expm_pade, q_matrices


def test_approximant_examples(rng):
    assert np.array_equal(yosida_approximant(np.zeros((3, 3)), 5), np.zeros((3, 3)))
    assert yosida_approximant(np.array([[-1.0]]), 10)[0, 0] == pytest.approx(-10 / 11, rel=1e-14)
    q = random_q_matrix(5, rng)
    n = 50
    gap = op_norm(yosida_approximant(q, n) - q)
    assert gap <= op_norm(q @ q) / (n - op_norm(q))


def test_approximant_in_spectrum():
    with pytest.raises(SpectrumHit):
        yosida_approximant(np.diag([3.0, 1.0]), 3)


def test_yosida_semigroup_examples(rng):
    q = random_q_matrix(4, rng)
    x = rng.standard_normal(4)
    assert np.allclose(yosida_semigroup(YosidaScheme(q, [8]), 8, 0.0, x), x)
    assert np.allclose(yosida_semigroup(YosidaScheme(np.zeros((4, 4)), [8]), 8, 3.0, x), x, atol=1e-14)
    v = yosida_semigroup(np.array([[-1.0]]), 10, 1.0, [2.0])
    assert v[0] == pytest.approx(2 * math.exp(-10 / 11), rel=1e-12)
    assert math.exp(-10 / 11) == pytest.approx(0.4028903, abs=1e-7)


def test_rescaling_bookkeeping():
    # log_norm = 1.5 forces the shift omega = 1.5 and the factor e^{1.5 t}
    a = np.array([[1.0, 0.5], [0.0, 0.5]])
    scheme = YosidaScheme(a, [64])
    assert scheme.omega == pytest.approx(1.5)
    x = np.array([1.0, -1.0])
    ref = expm_pade(a, 1.0) @ x
    assert sup_norm(yosida_semigroup(scheme, 64, 1.0, x) - ref) <= 2.0 / 64


def test_yosida_limit_examples(two_state):
    _, cert = yosida_limit(YosidaScheme(np.zeros((2, 2)), [4, 8]), 1.0, [1.0, 2.0], (4, 8))
    assert cert.cauchy_bound == 0.0 and cert.limit_gap_bound == 0.0
    x = np.array([1.0, 0.0])
    exact = expm_pade(two_state, 1.0) @ x
    ns = [4, 8, 16, 32, 64, 128]
    scheme = YosidaScheme(two_state, ns)
    errs = []
    for n in ns:
        val, cert = yosida_limit(scheme, 1.0, x, (n, n))
        errs.append(sup_norm(val - exact))
        assert errs[-1] <= cert.limit_gap_bound
        assert cert.rigorous
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_yosida_limit_scalar():
    a_n = -100 / 101
    val, cert = yosida_limit(np.array([[-1.0]]), 1.0, [1.0], (100, 100))
    assert val[0] == pytest.approx(math.exp(a_n), rel=1e-13)
    assert abs(math.exp(a_n) - math.exp(-1.0)) <= cert.limit_gap_bound
    assert cert.limit_gap_bound == pytest.approx(abs(a_n + 1.0), rel=1e-10)


def test_cauchy_certificate_bounds_pairs(rng):
    a = random_dissipative(5, rng)
    x = rng.standard_normal(5)
    scheme = YosidaScheme(a, [8, 32])
    v8 = yosida_semigroup(scheme, 8, 1.5, x)
    v32, cert = yosida_limit(scheme, 1.5, x, (8, 32))
    assert cert.n == 32 and cert.m == 8
    assert sup_norm(v32 - v8) <= cert.cauchy_bound


def test_joint_equicontinuity_examples(rng):
    q = random_q_matrix(4, rng)
    rep = joint_equicontinuity_scan(YosidaScheme(q, [1, 2, 4, 8]), 2.0)
    assert rep.passed and rep.lhs == pytest.approx(1.0, abs=1e-12)
    zero = joint_equicontinuity_scan(YosidaScheme(np.zeros((2, 2)), [1, 4]), 1.0)
    assert zero.lhs == 1.0
    diag = joint_equicontinuity_scan(YosidaScheme(np.diag([1.0]), [1, 4, 16]), 1.0)
    assert diag.details["shift"] == 1.0 and diag.lhs <= 1.0 + 1e-12 and diag.passed


def test_joint_equicontinuity_flags_uncertified():
    a = np.array([[-1.0, 4.0], [0.0, -1.0]])
    scheme = YosidaScheme(a, [1, 2, 4], type_bound=TypeBound(1.0, 0.0))
    rep = joint_equicontinuity_scan(scheme, 2.0)
    assert not rep.details["resolvent_certified"] and not rep.passed


@settings(max_examples=30, deadline=None)
@given(q_matrices(), st.integers(3, 200))
def test_approximant_two_forms(q, n):
    a = np.asarray(q)
    r = np.linalg.inv(n * np.eye(a.shape[0]) - a)
    assert np.max(np.abs(n * a @ r - yosida_approximant(a, n))) <= 1e-10 * max(1.0, n)


@settings(max_examples=30, deadline=None)
@given(q_matrices(), st.integers(2, 100), st.integers(2, 100))
def test_approximants_commute(q, n, m):
    an, am = yosida_approximant(q, n), yosida_approximant(q, m)
    assert np.max(np.abs(an @ am - am @ an)) <= 1e-9


def test_approximant_convergence_order(rng):
    for _ in range(5):
        a = random_dissipative(5, rng)
        x = rng.standard_normal(5)
        ns = np.array([8, 16, 32, 64, 128, 256])
        errs = [sup_norm(yosida_approximant(a, n) @ x - a @ x) for n in ns]
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert abs(slope + 1.0) <= 0.2


def test_limit_correctness_random(rng):
    for _ in range(5):
        a = random_dissipative(4, rng)
        x = rng.standard_normal(4)
        scheme = YosidaScheme(a, [8, 32, 128])
        for t in (0.5, 2.0):
            exact = expm_pade(a, t) @ x
            for n in scheme.indices:
                val, cert = yosida_limit(scheme, t, x, (n, n))
                assert sup_norm(val - exact) <= cert.limit_gap_bound * (1 + 1e-9) + 1e-13


def test_generator_recovery_first_order(rng):
    a = random_dissipative(4, rng)
    h = SemigroupHandle(a)
    x = rng.standard_normal(4)
    hs = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    errs = [sup_norm((h.apply(s, x) - x) / s - a @ x) for s in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 1.0) <= 0.1


def test_stiff_generator_is_preasymptotic():
    # scalar A = -12: T_n(t) = exp(-12 t n / (n + 12)); local order starts well above 1 and decays to 1
    lam, t = 12.0, 1.0
    ns = [8, 16, 32, 64, 128, 1024, 2048]
    scheme = YosidaScheme(np.array([[-lam]]), ns)
    errs = []
    for n in ns:
        val, cert = yosida_limit(scheme, t, [1.0], (n, n))
        closed = math.exp(-t * lam * n / (n + lam))
        assert val[0] == pytest.approx(closed, abs=1e-12)
        errs.append(abs(val[0] - math.exp(-t * lam)))
        assert errs[-1] <= cert.limit_gap_bound
    local = np.log2(np.array(errs[:4]) / np.array(errs[1:5]))
    assert local[0] > 1.5 and np.all(np.diff(local) < 0)
    assert math.log2(errs[-2] / errs[-1]) == pytest.approx(1.0, abs=0.05)
