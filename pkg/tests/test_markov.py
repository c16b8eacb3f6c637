import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semilab.core import op_norm
from semilab.generate import birth_death, path_metric, random_q_matrix
from semilab.markov import (QMatrix, c0_and_probability_preservation, compact_containment,
                            generator_extension_check, martingale_check, simulate, simulate_batch,
                            transition_matrix, transition_mc, validate_q)

from conftest import expm_pade, q_matrices


def test_validate_examples():
    assert validate_q([[-1, 1], [1, -1]]).valid
    bad = validate_q([[-1, 0.5], [1, -1]])
    assert not bad.valid and "row 0" in bad.problems[0]
    assert validate_q(np.zeros((2, 2))).valid
    assert not validate_q([[1.0, -1.0], [0.0, 0.0]]).valid


def test_qmatrix_json_roundtrip():
    q = QMatrix(birth_death(4, 1.0, 2.0), path_metric(4), boundary=[0])
    back = QMatrix.from_json(q.to_json())
    assert np.array_equal(back.q, q.q) and np.array_equal(back.metric, q.metric)
    assert back.boundary == (0,)
    assert set(q.to_dict()) == {"q", "metric", "boundary"}


def test_simulate_examples(two_state):
    traj = simulate(np.zeros((3, 3)), 2, 5.0, seed=1)
    assert traj.n_jumps == 0 and traj.state_at(4.9) == 2 and list(traj.times) == [0.0]
    a = simulate(two_state, 0, 10.0, seed=42)
    b = simulate(two_state, 0, 10.0, seed=42)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
    assert not np.array_equal(a.times, simulate(two_state, 0, 10.0, seed=43).times)
    with pytest.raises(ValueError):
        simulate([[-1, 0.5], [1, -1]], 0, 1.0, seed=0)


def test_trajectory_invariants(rng):
    q = random_q_matrix(5, rng, 3.0)
    traj = simulate(q, 0, 4.0, seed=9)
    assert traj.times[0] == 0.0 and np.all(np.diff(traj.times) > 0)
    assert np.all(traj.states[1:] != traj.states[:-1])
    g = rng.standard_normal(5)
    # exact integral against a fine Riemann sum
    ts = np.linspace(0, 4.0, 400_001)[:-1] + 0.5e-5
    approx = np.mean([g[traj.state_at(t)] for t in ts[::100]]) * 4.0
    assert traj.integral(g, 0, 4.0) == pytest.approx(approx, abs=0.05)
    assert traj.integral(g, 1.0, 1.0) == 0.0


def test_mean_jumps_two_state(two_state):
    paths = simulate_batch(two_state, 0, [1.0], 100_000, seed=5)
    j = paths.jumps.astype(float)
    assert abs(j.mean() - 1.0) <= 4 * j.std() / math.sqrt(j.size)


def test_single_and_batch_paths_agree_in_law(two_state):
    jumps = np.array([simulate(two_state, 0, 1.0, seed=s).n_jumps for s in range(4000)], dtype=float)
    assert abs(jumps.mean() - 1.0) <= 4 * jumps.std() / math.sqrt(jumps.size)


def test_batch_is_deterministic(rng):
    q = random_q_matrix(4, rng)
    a = simulate_batch(q, 1, [0.5, 1.0], 20_000, seed=3, gs=[np.arange(4.0)])
    b = simulate_batch(q, 1, [0.5, 1.0], 20_000, seed=3, gs=[np.arange(4.0)])
    assert np.array_equal(a.states, b.states) and np.array_equal(a.integrals, b.integrals)


def test_transition_mc_examples(two_state):
    est, se = transition_mc(two_state, 0.7, [2.5, 2.5], 0, N=1000, seed=0)
    assert est == 2.5 and se == 0.0
    for t in (0.2, 1.0):
        est, se = transition_mc(two_state, t, [0.0, 1.0], 0, N=100_000, seed=11)
        assert abs(est - (1 - math.exp(-2 * t)) / 2) <= 3 * se


def test_transition_mc_against_matrix_exponential():
    r = np.random.default_rng(77)
    for i in range(5):
        q = random_q_matrix(5, r, 2.0)
        f = r.standard_normal(5)
        exact = expm_pade(q, 0.8) @ f
        est, se = transition_mc(q, 0.8, f, 0, N=100_000, seed=100 + i)
        assert abs(est - exact[0]) <= 3 * se


def test_chapman_kolmogorov_by_trajectories():
    q = random_q_matrix(4, np.random.default_rng(8), 1.5)
    f = np.array([1.0, -1.0, 2.0, 0.0])
    n = 100_000
    one, se1 = transition_mc(q, 1.2, f, 0, N=n, seed=21)
    mid = simulate_batch(q, 0, [0.5], n, seed=22).states[0]
    second = simulate_batch(q, mid, [0.7], n, seed=23).states[0]
    vals = f[second]
    two, se2 = vals.mean(), vals.std(ddof=1) / math.sqrt(n)
    assert abs(one - two) <= 3 * math.hypot(se1, se2)


def test_martingale_examples():
    r = np.random.default_rng(31)
    q = random_q_matrix(4, r)
    f = r.standard_normal(4)
    rep = martingale_check(q, f, q @ f, [(0.0, 0.5), (0.5, 1.0)], N=100_000, seed=1)
    assert rep.passed
    bad = martingale_check(q, f, 2 * (q @ f), [(0.0, 0.5), (0.5, 1.0)], N=100_000, seed=1)
    assert not bad.passed and bad.max_z > 5
    const = martingale_check(q, np.full(4, 3.0), np.zeros(4), [(0.0, 1.0)], N=1000, seed=2)
    assert all(row["mean"] == 0.0 for row in const.rows) and const.passed


def test_martingale_inconclusive_rows():
    q = np.array([[-0.01, 0.01, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]])
    rep = martingale_check(q, [1.0, 0.0, 0.0], q @ [1.0, 0.0, 0.0], [(0.1, 0.2)], N=300, seed=0,
                           initial=0)
    statuses = {row["state"]: row["status"] for row in rep.rows}
    assert statuses[1] == "inconclusive" and statuses[2] == "inconclusive"
    assert rep.passed


def test_martingale_random_pairs():
    r = np.random.default_rng(404)
    for i in range(20):
        n = int(r.integers(2, 7))
        q = random_q_matrix(n, r, 1.5)
        f = r.standard_normal(n)
        rep = martingale_check(q, f, q @ f, [(0.0, 0.5), (0.5, 1.5)], N=100_000, seed=1000 + i)
        assert rep.passed, (i, rep.max_z)
        qf = q @ f
        perturbed = martingale_check(q, f, qf + 0.5 * np.abs(qf).max(), [(0.0, 1.0)], N=100_000, seed=1000 + i)
        assert perturbed.max_z > 5


def test_containment_examples():
    q = birth_death(6, 1.0, 1.0)
    est = compact_containment(q, [0, 1], range(6), 2.0, N=2000, seed=1)
    assert est.probability == 1.0 and est.se == 0.0
    rate, T = 0.7, 1.3
    q2 = np.array([[-rate, rate], [0.0, 0.0]])
    est = compact_containment(q2, [0], [0], T, N=100_000, seed=2)
    assert abs(est.probability - math.exp(-rate * T)) <= 3 * est.se


def _stay_probability(q, k_hat, x, T):
    idx = sorted(k_hat)
    sub = q[np.ix_(idx, idx)]
    return float((expm_pade(sub, T) @ np.ones(len(idx)))[idx.index(x)])


def test_containment_birth_death_against_killed_semigroup():
    q = birth_death(21, 1.0, 1.0)
    K, K_hat = range(6), range(16)
    est = compact_containment(q, K, K_hat, 1.0, N=20_000, seed=3)
    for x, (p, se) in est.per_state.items():
        exact = _stay_probability(q, K_hat, x, 1.0)
        if se == 0.0:
            # no exits seen: plausible only if exact^N is not tiny
            assert p == 1.0 and exact ** 20_000 >= 1e-3
        else:
            assert abs(p - exact) <= 4 * se
    q_fast = birth_death(21, 6.0, 6.0)
    est = compact_containment(q_fast, K, K_hat, 1.0, N=20_000, seed=4)
    exact = _stay_probability(q_fast, K_hat, est.worst_state, 1.0)
    assert est.probability < 1 and abs(est.probability - exact) <= 4 * est.se


def test_containment_requires_subset():
    with pytest.raises(ValueError):
        compact_containment(birth_death(4, 1, 1), [3], [0, 1], 1.0)


def test_extension_examples(two_state):
    zero = generator_extension_check(np.zeros((3, 3)), [1.0, 2.0, 3.0], [0, 1, 2], [1.0, 0.1])
    assert all(r["error"] == 0.0 for r in zero.details["table"]) and zero.passed
    rep = generator_extension_check(two_state, [1.0, 0.0], [0, 1], [1.0, 0.1, 0.01, 0.001])
    for row in rep.details["table"]:
        t = row["t"]
        # (S(t)f - f)/t - Qf = ((1 - e^{-2t})/(2t) - 1) * (-1, 1)
        assert row["error"] == pytest.approx(abs((1 - math.exp(-2 * t)) / (2 * t) - 1), rel=1e-9)
    assert rep.passed
    q6 = random_q_matrix(6, np.random.default_rng(6), 2.0)
    rep6 = generator_extension_check(q6, np.arange(6.0), range(6), [1.0, 0.1, 0.01, 0.001])
    assert rep6.passed and rep6.details["monotone"]
    with pytest.raises(ValueError):
        generator_extension_check(q6, np.arange(6.0), range(6), [0.1, 1.0])


def test_extension_monotonicity_is_not_universal():
    # at t = 1 the error at state 1 nearly cancels, so t = 0.1 is worse
    q = [[-0.8, 0.5, 0.3], [0.5, -2.3, 1.8], [1.2, 1.8, -3.0]]
    rep = generator_extension_check(q, [1.7, 0.0, -0.2], [1], [1.0, 0.1, 0.01, 0.001])
    errs = [r["error"] for r in rep.details["table"]]
    assert errs[1] > errs[0] * 1.05
    assert not rep.details["monotone"] and not rep.passed
    assert rep.lhs <= rep.rhs


def test_extension_roundoff_is_not_an_increase():
    # absorbing state: every quotient is zero up to rounding amplified by 1/t
    q = [[-2.4, 0.5, 1.9], [0.0, 0.0, 0.0], [0.8, 0.6, -1.4]]
    rep = generator_extension_check(q, [1.4, 1.1, 1.2], [1], [1.0, 0.1, 0.01, 0.001])
    assert rep.details["monotone"] and rep.passed
    strict = generator_extension_check(q, [1.4, 1.1, 1.2], [1], [1.0, 0.1, 0.01, 0.001], slack=0.0)
    assert max(r["error"] for r in strict.details["table"]) < 1e-11


def test_c0_examples(rng):
    q = random_q_matrix(5, rng)
    out = c0_and_probability_preservation(q, [], 1.3)
    assert out["probability_preserving"] and out["row_sum_error"] <= 1e-10
    absorbing = birth_death(4, 1.0, 1.0)
    absorbing[0] = 0.0
    out = c0_and_probability_preservation(absorbing, [0], 2.0)
    assert out["boundary_leak"] == 0.0 and out["c0_invariant"] and out["boundary_absorbing"]
    leaky = np.array([[-1.0, 1.0, 0.0], [0.5, -1.0, 0.5], [0.0, 1.0, -1.0]])
    out = c0_and_probability_preservation(leaky, [0], 1.0)
    assert not out["c0_invariant"] and not out["pass"]
    with pytest.raises(ValueError):
        c0_and_probability_preservation(leaky, [0], 1.0, f=[1.0, 0.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(q_matrices(), st.floats(0.01, 3.0))
def test_transition_operators_positive_and_unital(q, t):
    p = transition_matrix(q, t)
    assert np.max(np.abs(p @ np.ones(q.shape[0]) - 1.0)) <= 1e-10
    assert p.min() >= -1e-10


@settings(max_examples=30, deadline=None)
@given(q_matrices(), st.integers(0, 2**32 - 1), st.floats(0.1, 2.0))
def test_rows_depend_continuously_on_rates(q, seed, t):
    e = 1e-3 * np.random.default_rng(seed).standard_normal(q.shape)
    diff = op_norm(expm_pade(q + e, t) - transition_matrix(q, t))
    assert diff <= t * op_norm(e) * math.exp(t * (op_norm(q) + op_norm(e))) + 1e-12
