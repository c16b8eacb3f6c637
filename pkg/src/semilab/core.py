"""Finite-dimensional substrate: elements, operators, sup-norms and solves.

Every operation accepts plain array-likes as well as :class:`Element` and
:class:`Operator` instances and returns numpy arrays. The auxiliary norm is
the sup-norm on coordinates; operators carry the induced max-row-sum norm.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "Element",
    "Operator",
    "SingularOperator",
    "DimensionMismatch",
    "as_vector",
    "as_matrix",
    "identity",
    "zero",
    "apply",
    "solve",
    "lu_solver",
    "sup_norm",
    "op_norm",
    "log_norm",
    "spectral_abscissa",
]

PIVOT_RTOL = 1e-12


class SingularOperator(ValueError):
    """Raised when an operator is singular to the pivot tolerance."""


class DimensionMismatch(ValueError):
    pass


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty 1-d array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("element has non-finite entries")
    return v


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a nonempty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class Element:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", as_vector(self.values))

    @property
    def dim(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def to_json(self) -> str:
        return json.dumps({"values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Element":
        return cls(json.loads(text)["values"])


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", as_matrix(self.entries))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "entries": self.entries.ravel().tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Operator":
        n = int(data["dim"])
        entries = np.asarray(data["entries"], dtype=float)
        if entries.size != n * n:
            raise ValueError(f"expected {n * n} entries for dim {n}, got {entries.size}")
        return cls(entries.reshape(n, n))

    @classmethod
    def from_json(cls, text: str) -> "Operator":
        return cls.from_dict(json.loads(text))


def identity(n: int) -> np.ndarray:
    return np.eye(n)


def zero(n: int) -> np.ndarray:
    return np.zeros((n, n))


def _check_dims(a: np.ndarray, x: np.ndarray) -> None:
    if a.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"operator of dim {a.shape[1]} applied to element of dim {x.shape[0]}")


def apply(op, x) -> np.ndarray:
    a = as_matrix(op)
    v = as_vector(x)
    _check_dims(a, v)
    return a @ v


def lu_solver(op):
    """Factor ``op`` once and return a function solving ``op @ y = b``.

    The right-hand side may be a vector or a matrix of column vectors.
    Raises :class:`SingularOperator` if the smallest pivot is below
    ``PIVOT_RTOL`` relative to the largest entry of the operator.
    """
    a = as_matrix(op)
    scale = np.max(np.abs(a))
    if scale == 0.0:
        raise SingularOperator("zero operator")
    with warnings.catch_warnings():
        # exact zero pivots are reported by the tolerance test below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= PIVOT_RTOL * scale:
        raise SingularOperator(
            f"pivot {pivots.min():.3e} below tolerance {PIVOT_RTOL:.0e} x {scale:.3e}"
        )

    def _solve(b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatch(f"rhs of length {b.shape[0]} for operator of dim {a.shape[0]}")
        return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)

    return _solve


def solve(op, b) -> np.ndarray:
    v = as_vector(b)
    return lu_solver(op)(v)


def sup_norm(x) -> float:
    return float(np.max(np.abs(as_vector(x))))


def op_norm(op) -> float:
    """Induced sup-norm: the maximum absolute row sum."""
    return float(np.max(np.sum(np.abs(as_matrix(op)), axis=1)))


def log_norm(op) -> float:
    """Logarithmic sup-norm ``max_i (a_ii + sum_{j != i} |a_ij|)``.

    ``||exp(tA)|| <= exp(t * log_norm(A))`` for ``t >= 0``, so this gives a
    certified ``(1, log_norm(A))`` type bound.
    """
    a = as_matrix(op)
    off = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
    return float(np.max(np.diag(a) + off))


def spectral_abscissa(op) -> float:
    """Largest real part of an eigenvalue (LAPACK Hessenberg/Schur QR)."""
    a = as_matrix(op)
    try:
        eig = scipy.linalg.eigvals(a, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue iteration did not converge: {exc}") from exc
    return float(np.max(eig.real))
