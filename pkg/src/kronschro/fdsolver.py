"""
Fast-diagonalization preconditioner for the space-time least-squares system.

The preconditioner replaces the bi-Laplacian ``B_s`` by ``L_s M_s^{-1} L_s``::

    P = M_s ⊗ L_t + nu² L_s M_s^{-1} L_s ⊗ M_t + nu L_s ⊗ (W_t + W_t*)

With the M-orthonormal eigenvectors ``U_l`` of the spatial pencils
``(L_l, M_l)`` it becomes block diagonal,
``P = (U_s^T ⊗ I)^{-1} H (U_s ⊗ I)^{-1}``, with one banded ``n_t x n_t`` block

    H_i = L_t + nu² λ_i² M_t + nu λ_i (W_t + W_t*)

per composite spatial eigenvalue ``λ_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import univariate_matrices
from .eigensolve import (
    BandedFactorization,
    GeneralizedEigenDecomposition,
    band_storage,
    factor_banded,
    generalized_sym_eig,
    solve_banded,
)
from .tensorops import KroneckerOperator, mode_product, unvec, vec

__all__ = ["FDPreconditioner", "fd_setup", "fd_apply", "preconditioner_operator"]


@dataclass(frozen=True)
class FDPreconditioner:
    eigs: tuple              # GeneralizedEigenDecomposition per spatial direction
    lam: np.ndarray          # composite eigenvalues, spatial vec order (length N_s)
    blocks: BandedFactorization
    nu: float
    dims: tuple

    @property
    def N_s(self):
        return self.lam.size

    @property
    def size(self):
        return int(np.prod(self.dims))

    def __call__(self, r):
        return fd_apply(self, r)


def _composite_eigenvalues(eigs):
    lam = np.zeros(())
    for e in eigs:
        lam = np.add.outer(lam, e.eigenvalues)
    # first spatial axis fastest, as in vec
    return lam.reshape(-1, order="F") if lam.ndim else lam.reshape(1)


def fd_setup(prob, mats=None):
    """Eigendecompose the spatial pencils and factor every time block ``H_i``."""
    mats = mats or univariate_matrices(prob, restricted=True)
    eigs = tuple(generalized_sym_eig(s["L"], s["M"]) for s in mats.space)
    lam = _composite_eigenvalues(eigs)
    Lt, Mt, Wt = mats.time["L"], mats.time["M"], mats.time["W"]
    Wsym = (Wt + Wt.conj().T).tocsr()
    p = prob.p_t
    ab_L = band_storage(Lt, p, p)
    ab_M = band_storage(Mt, p, p)
    ab_W = band_storage(Wsym, p, p)
    nu = prob.nu
    ab = (ab_L[None]
          + (nu ** 2 * lam ** 2)[:, None, None] * ab_M[None]
          + (nu * lam)[:, None, None] * ab_W[None])
    blocks = factor_banded(ab, kl=p, ku=p)
    return FDPreconditioner(eigs, lam, blocks, nu, prob.dims)


def fd_apply(P, r):
    """Solve ``P s = r`` by fast diagonalization."""
    r = np.asarray(r)
    if r.ndim != 1 or r.size != P.size:
        raise ValueError(f"vector length {r.size} does not match preconditioner size {P.size}")
    X = unvec(r.astype(complex, copy=False), P.dims)
    for l, e in enumerate(P.eigs, start=1):
        X = mode_product(X, e.U.T, l)
    n_t = P.dims[0]
    Y = X.reshape(n_t, -1, order="F").T
    Z = solve_banded(P.blocks, Y)
    X = Z.T.reshape(P.dims, order="F")
    for l, e in enumerate(P.eigs, start=1):
        X = mode_product(X, e.U, l)
    return vec(X)


def preconditioner_operator(prob, mats=None):
    """``P`` itself as a :class:`KroneckerOperator` (dense ``L M^{-1} L`` factors).

    Intended for verification; the solver never forms it.
    """
    mats = mats or univariate_matrices(prob, restricted=True)
    nu = prob.nu
    d = prob.d
    Lt, Mt, Wt = mats.time["L"], mats.time["M"], mats.time["W"]
    Wsym = (Wt + Wt.conj().T).tocsr()
    Ms = [s["M"] for s in mats.space]
    Ls = [s["L"] for s in mats.space]
    LML = [s["L"].toarray() @ np.linalg.solve(s["M"].toarray(), s["L"].toarray())
           for s in mats.space]

    def with_(over):
        return [over.get(l, Ms[l]) for l in range(d)]

    terms = [(1.0, [Lt] + with_({}))]
    for l in range(d):
        terms.append((nu ** 2, [Mt] + with_({l: LML[l]})))
    for l in range(d):
        for m in range(d):
            if l != m:
                terms.append((nu ** 2, [Mt] + with_({l: Ls[l], m: Ls[m]})))
    for l in range(d):
        terms.append((nu, [Wsym] + with_({l: Ls[l]})))
    return KroneckerOperator(prob.dims, terms)
