"""Random and structured generators used as inputs for checks and demos."""
from __future__ import annotations

import numpy as np


def random_q_matrix(n: int, rng: np.random.Generator, max_rate: float = 1.0,
                    density: float = 1.0) -> np.ndarray:
    """Q-matrix with off-diagonal rates uniform on ``[0, max_rate]``, each kept with probability ``density``."""
    off = rng.uniform(0.0, max_rate, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(off, 0.0)
    return off - np.diag(off.sum(axis=1))


def random_dissipative(n: int, rng: np.random.Generator, scale: float = 1.0,
                       margin: float = 0.5) -> np.ndarray:
    """Matrix with logarithmic sup-norm ``<= 0``: ``exp(tA)`` is a sup-norm contraction."""
    off = scale * rng.standard_normal((n, n))
    np.fill_diagonal(off, 0.0)
    diag = -(np.abs(off).sum(axis=1) + margin * rng.random(n))
    return off + np.diag(diag)


def random_generator(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Unstructured generator with Gaussian entries."""
    return scale * rng.standard_normal((n, n)) / np.sqrt(n)


def birth_death(n: int, birth: float, death: float) -> np.ndarray:
    """Birth-death chain on ``{0, ..., n-1}`` with constant rates."""
    q = np.zeros((n, n))
    for i in range(n):
        if i + 1 < n:
            q[i, i + 1] = birth
        if i > 0:
            q[i, i - 1] = death
    return q - np.diag(q.sum(axis=1))


def path_metric(n: int) -> np.ndarray:
    """``d(i, j) = |i - j|`` on ``{0, ..., n-1}``."""
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :]).astype(float)
