"""
Dense and banded linear algebra kernels.

* generalized symmetric-definite eigendecomposition ``L U = M U Λ`` by
  Cholesky reduction,
* dense Hermitian pencils for diagnostics,
* banded LU with partial pivoting, batched over many matrices that share
  a band structure (the diagonal blocks of the fast-diagonalization solve).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "GeneralizedEigenDecomposition",
    "BandedFactorization",
    "generalized_sym_eig",
    "cond2_eigvec",
    "dense_hermitian_geneig",
    "band_storage",
    "factor_banded",
    "solve_banded",
    "PENCIL_CAP",
]

PENCIL_CAP = 4000


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


@dataclass(frozen=True)
class GeneralizedEigenDecomposition:
    """``U.T @ M @ U = I`` and ``U.T @ L @ U = diag(eigenvalues)``."""

    U: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n(self):
        return self.eigenvalues.size


def generalized_sym_eig(L, M):
    """M-orthonormal eigenpairs of the real symmetric pencil ``(L, M)``.

    Reduces to a standard problem with the Cholesky factor ``M = C C^T``,
    solves it with a dense symmetric eigensolver and back-substitutes.
    Eigenvalues ascend; each eigenvector's largest-magnitude entry is
    made positive.
    """
    L = _dense(L).real
    M = _dense(M).real
    if L.shape != M.shape or L.shape[0] != L.shape[1]:
        raise ValueError("L and M must be square and of equal size")
    try:
        C = sla.cholesky(M, lower=True)
    except sla.LinAlgError as exc:
        raise ValueError("M is not positive definite") from exc
    X = sla.solve_triangular(C, L, lower=True)
    S = sla.solve_triangular(C, X.T, lower=True)
    S = 0.5 * (S + S.T)
    lam, Y = np.linalg.eigh(S)
    U = sla.solve_triangular(C, Y, lower=True, trans="T")
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return GeneralizedEigenDecomposition(U * signs, lam)


def cond2_eigvec(obj):
    """Spectral condition number of an M-orthonormal eigenvector matrix.

    Accepts a :class:`GeneralizedEigenDecomposition` (singular values of U)
    or the SPD mass matrix itself (``sqrt(λ_max / λ_min)``).
    """
    if isinstance(obj, GeneralizedEigenDecomposition):
        s = np.linalg.svd(obj.U, compute_uv=False)
        return float(s[0] / s[-1])
    M = _dense(obj)
    if not np.allclose(M, M.conj().T, rtol=0, atol=1e-12 * np.abs(M).max()):
        raise ValueError("matrix is not symmetric")
    ev = np.linalg.eigvalsh(M)
    if ev[0] <= 0:
        raise ValueError("matrix is not positive definite")
    return float(np.sqrt(ev[-1] / ev[0]))


def dense_hermitian_geneig(A, B, cap=PENCIL_CAP):
    """Ascending real eigenvalues of the Hermitian pencil ``(A, B)``, ``B`` PD."""
    A = _dense(A)
    B = _dense(B)
    if A.shape[0] > cap:
        raise ValueError(f"pencil of size {A.shape[0]} exceeds the dense cap {cap}")
    try:
        return sla.eigh(A, B, eigvals_only=True)
    except sla.LinAlgError as exc:
        raise ValueError("right-hand matrix of the pencil is not positive definite") from exc


# --------------------------------------------------------------------------
# banded LU

def band_storage(A, kl, ku, extra=None):
    """LAPACK-style band storage with ``extra`` (default ``kl``) fill rows on top.

    ``A[i, j]`` is stored at ``ab[extra + ku + i - j, j]``.
    """
    extra = kl if extra is None else extra
    A = sp.coo_matrix(A)
    n = A.shape[0]
    off = A.col - A.row
    if np.any(off > ku) or np.any(-off > kl):
        raise ValueError("matrix has entries outside the declared band")
    ab = np.zeros((extra + ku + kl + 1, n), dtype=np.result_type(A.dtype, complex))
    np.add.at(ab, (extra + ku + A.row - A.col, A.col), A.data)
    return ab


@dataclass(frozen=True)
class BandedFactorization:
    """Batched ``P A = L U`` factors in band storage.

    ``ab`` has shape ``(batch, 2 kl + ku + 1, n)``: U occupies the top
    ``kl + ku + 1`` rows (upper bandwidth grows to ``kl + ku`` through
    pivoting), the multipliers of L the bottom ``kl`` rows.
    """

    ab: np.ndarray
    ipiv: np.ndarray
    kl: int
    ku: int

    @property
    def n(self):
        return self.ab.shape[-1]

    @property
    def batch(self):
        return self.ab.shape[0]


def factor_banded(H, kl=None, ku=None):
    """Banded LU with partial pivoting.

    ``H`` is a single square matrix (dense or sparse; ``kl``/``ku``
    default to its actual bandwidths) or an array of shape
    ``(batch, 2 kl + ku + 1, n)`` already in band storage, in which case
    ``kl`` and ``ku`` are required.
    """
    if isinstance(H, np.ndarray) and H.ndim == 3:
        if kl is None or ku is None:
            raise ValueError("kl and ku are required for band-storage input")
        ab = np.array(H, dtype=complex)
    else:
        coo = sp.coo_matrix(H)
        if coo.shape[0] != coo.shape[1]:
            raise ValueError("matrix must be square")
        nz = coo.data != 0
        off = coo.col[nz] - coo.row[nz]
        kl = int(max(0, -off.min())) if kl is None and off.size else (kl or 0)
        ku = int(max(0, off.max())) if ku is None and off.size else (ku or 0)
        ab = band_storage(coo, kl, ku)[None]
    kv = kl + ku
    nb, _, n = ab.shape
    ipiv = np.zeros((nb, n), dtype=np.intp)
    bidx = np.arange(nb)
    for j in range(n):
        km = min(kl, n - 1 - j)
        col = ab[:, kv : kv + km + 1, j]
        jp = np.argmax(np.abs(col), axis=1)
        ipiv[:, j] = j + jp
        piv = col[bidx, jp]
        if np.any(np.abs(piv) == 0.0):
            bad = np.flatnonzero(np.abs(piv) == 0.0)
            raise np.linalg.LinAlgError(f"zero pivot in column {j} of block(s) {bad[:5].tolist()}")
        ju = min(j + kv, n - 1)
        cols = np.arange(j, ju + 1)
        if np.any(jp):
            ra = kv + j - cols
            rb = kv + (j + jp)[:, None] - cols[None, :]
            va = ab[:, ra, cols].copy()
            vb = ab[bidx[:, None], rb, cols[None, :]]
            ab[:, ra, cols] = vb
            ab[bidx[:, None], rb, cols[None, :]] = va
        if km > 0:
            ab[:, kv + 1 : kv + km + 1, j] /= ab[:, kv, j][:, None]
            if ju > j:
                rows = np.arange(j + 1, j + km + 1)
                ucols = cols[1:]
                R = kv + rows[:, None] - ucols[None, :]
                lvec = ab[:, kv + 1 : kv + km + 1, j]
                urow = ab[:, kv + j - ucols, ucols]
                ab[:, R, ucols[None, :]] -= lvec[:, :, None] * urow[:, None, :]
    return BandedFactorization(ab, ipiv, kl, ku)


def solve_banded(F, y):
    """Solve with a :class:`BandedFactorization`.

    ``y`` has shape ``(n,)`` for a single factorization or ``(batch, n)``.
    """
    y = np.asarray(y)
    single = y.ndim == 1
    b = np.array(y[None] if single else y, dtype=complex)
    if b.shape != (F.batch, F.n):
        raise ValueError(f"right-hand side of shape {y.shape} does not match factorization")
    kl, kv, n = F.kl, F.kl + F.ku, F.n
    ab, ipiv = F.ab, F.ipiv
    bidx = np.arange(F.batch)
    for j in range(n - 1):
        km = min(kl, n - 1 - j)
        l = ipiv[:, j]
        if np.any(l != j):
            tmp = b[bidx, l].copy()
            b[bidx, l] = b[:, j]
            b[:, j] = tmp
        if km > 0:
            b[:, j + 1 : j + km + 1] -= ab[:, kv + 1 : kv + km + 1, j] * b[:, j][:, None]
    for j in range(n - 1, -1, -1):
        b[:, j] /= ab[:, kv, j]
        i0 = max(0, j - kv)
        if i0 < j:
            b[:, i0:j] -= ab[:, kv + i0 - j : kv, j] * b[:, j][:, None]
    return b[0] if single else b
