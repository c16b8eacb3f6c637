import numpy as np
import pytest
import scipy.linalg
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from semilab import generate


def expm_pade(G, t):
    """Reference matrix exponential (Pade scaling and squaring)."""
    return scipy.linalg.expm(t * np.asarray(G, dtype=float))


def expm_taylor_squaring(G, t, terms=24):
    """Independent scaling-and-squaring Taylor evaluator, kept out of the package on purpose."""
    a = t * np.asarray(G, dtype=float)
    nrm = np.max(np.sum(np.abs(a), axis=1)) if a.size else 0.0
    s = max(0, int(np.ceil(np.log2(nrm / 0.25)))) if nrm > 0 else 0
    a = a / 2.0**s
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_state():
    return np.array([[-1.0, 1.0], [1.0, -1.0]])


def small_floats(lo=-3.0, hi=3.0):
    return st.floats(lo, hi, allow_nan=False, allow_infinity=False, width=64)


def vectors(n):
    return hnp.arrays(np.float64, n, elements=small_floats())


@st.composite
def q_matrices(draw, min_dim=2, max_dim=6):
    n = draw(st.integers(min_dim, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    rate = draw(st.floats(0.1, 3.0))
    return generate.random_q_matrix(n, np.random.default_rng(seed), rate)


@st.composite
def dissipative_matrices(draw, min_dim=1, max_dim=6):
    n = draw(st.integers(min_dim, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    return generate.random_dissipative(n, np.random.default_rng(seed))
