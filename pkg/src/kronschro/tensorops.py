"""
Tensors in the time-fastest ``vec`` ordering, m-mode products and
matrix-free sums of Kronecker products.

A coefficient tensor has shape ``(n_t, n_1, ..., n_d)``. Its ``vec`` runs
over the first axis fastest (Fortran order), so that the factor acting on
axis 0 sits in the rightmost Kronecker position::

    (J_d ⊗ ... ⊗ J_1 ⊗ J_t) vec(X) = vec(X ×_0 J_t ×_1 J_1 ... ×_d J_d)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

__all__ = [
    "vec",
    "unvec",
    "mode_product",
    "KronTerm",
    "KroneckerOperator",
    "kron_apply",
    "kron_to_dense",
    "DENSE_CAP",
]

DENSE_CAP = 20000


def vec(X):
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, dims):
    v = np.asarray(v)
    if v.size != int(np.prod(dims)):
        raise ValueError(f"vector of length {v.size} does not match dims {tuple(dims)}")
    return v.reshape(tuple(dims), order="F")


def mode_product(X, J, axis):
    """m-mode product ``X ×_axis J``: contract ``X`` along ``axis`` with ``J``'s columns.

    ``J`` may be a dense array or a scipy sparse matrix of shape ``(l, n_axis)``.
    """
    X = np.asarray(X)
    if axis < 0 or axis >= X.ndim:
        raise ValueError(f"axis {axis} out of range for a {X.ndim}-way tensor")
    n = X.shape[axis]
    if J.shape[1] != n:
        raise ValueError(f"factor has {J.shape[1]} columns, tensor axis {axis} has size {n}")
    Xm = np.moveaxis(X, axis, 0)
    rest = Xm.shape[1:]
    Y = J @ Xm.reshape(n, -1)
    Y = np.asarray(Y).reshape((J.shape[0],) + rest)
    return np.moveaxis(Y, 0, axis)


def _as_factor(J):
    if J is None:
        return None
    if sp.issparse(J):
        return sp.csr_matrix(J)
    return np.asarray(J)


@dataclass(frozen=True)
class KronTerm:
    """``coef * (J_d ⊗ ... ⊗ J_1 ⊗ J_t)``; ``None`` factors are identities."""

    coef: complex
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(_as_factor(J) for J in self.factors))


class KroneckerOperator:
    """Sum of scaled Kronecker products acting on tensors of shape ``dims``.

    Parameters
    ----------
    dims : sequence of int
        Tensor shape ``(n_t, n_1, ..., n_d)``.
    terms : sequence of KronTerm or (coef, factors) pairs
        Factors are listed in axis order (time first) and must be square
        ``n_k x n_k`` matrices, or ``None`` for the identity.
    """

    def __init__(self, dims: Sequence[int], terms):
        self.dims = tuple(int(n) for n in dims)
        parsed = []
        for t in terms:
            if not isinstance(t, KronTerm):
                t = KronTerm(complex(t[0]), tuple(t[1]))
            if len(t.factors) != len(self.dims):
                raise ValueError("every term needs one factor per axis")
            for k, J in enumerate(t.factors):
                if J is not None and J.shape != (self.dims[k], self.dims[k]):
                    raise ValueError(
                        f"axis {k} factor has shape {J.shape}, expected {(self.dims[k],) * 2}")
            parsed.append(t)
        self.terms = tuple(parsed)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def shape(self):
        return (self.size, self.size)

    def __len__(self):
        return len(self.terms)

    def matvec(self, v):
        return kron_apply(self, v)

    def __matmul__(self, v):
        return kron_apply(self, v)

    def to_dense(self, cap=DENSE_CAP):
        return kron_to_dense(self, cap)

    def aslinearoperator(self):
        return LinearOperator(self.shape, matvec=self.matvec, dtype=complex)

    def __repr__(self):
        return f"KroneckerOperator(dims={self.dims}, terms={len(self.terms)})"


def kron_apply(K, v):
    """Matrix-free product of a :class:`KroneckerOperator` with a vector.

    Terms are accumulated in declaration order, so the result is
    deterministic.
    """
    v = np.asarray(v)
    if v.ndim != 1 or v.size != K.size:
        raise ValueError(f"vector length {v.size} does not match operator size {K.size}")
    X = unvec(v.astype(complex, copy=False), K.dims)
    acc = np.zeros(K.dims, dtype=complex)
    for term in K.terms:
        Y = X
        for axis, J in enumerate(term.factors):
            if J is not None:
                Y = mode_product(Y, J, axis)
        acc += term.coef * Y
    return vec(acc)


def kron_to_dense(K, cap=DENSE_CAP):
    """Explicit dense matrix of ``K`` (test oracle; refuses sizes above ``cap``)."""
    if K.size > cap:
        raise ValueError(f"operator of size {K.size} exceeds the dense cap {cap}")
    out = np.zeros(K.shape, dtype=complex)
    for term in K.terms:
        mat = np.ones((1, 1))
        # rightmost Kronecker position is axis 0
        for axis, J in enumerate(term.factors):
            F = np.eye(K.dims[axis]) if J is None else (J.toarray() if sp.issparse(J) else J)
            mat = np.kron(F, mat)
        out += term.coef * mat
    return out
