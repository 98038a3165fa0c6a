"""
Reproduction layer: discrete solves, error norms, convergence studies,
inf-sup and spectral-equivalence diagnostics, the eigenvector condition
table and preconditioner benchmarks.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    SpaceTimeProblem,
    assemble_galerkin_operator,
    assemble_mass_operator,
    assemble_rhs,
    assemble_system_operator,
    evaluate_on_grid,
    extend,
    lift_nonhomogeneous,
    restrict,
    univariate_matrices,
    univariate_matrix,
)
from .bspline import element_quadrature, make_open_knot_vector
from .eigensolve import PENCIL_CAP, cond2_eigvec, dense_hermitian_geneig
from .fdsolver import fd_apply, fd_setup
from .krylov import SolveReport, pcg
from .tensorops import KroneckerOperator

__all__ = [
    "DiscreteSolution",
    "ConvergenceRecord",
    "solve",
    "error_norms",
    "convergence_study",
    "infsup_constant",
    "infsup_pencils",
    "spectral_equivalence_space",
    "spectral_equivalence_time",
    "condition_table",
    "performance_run",
]

log = logging.getLogger(__name__)


def _sparse_kron(K: KroneckerOperator):
    """Assemble a Kronecker operator as a sparse matrix (small diagnostics only)."""
    out = None
    for term in K.terms:
        mat = sp.identity(1, format="csr")
        for axis, J in enumerate(term.factors):
            F = sp.identity(K.dims[axis], format="csr") if J is None else sp.csr_matrix(J)
            mat = sp.kron(F, mat, format="csr")
        out = term.coef * mat if out is None else out + term.coef * mat
    return out.tocsc()


# --------------------------------------------------------------------------
# solves and errors

@dataclass
class DiscreteSolution:
    problem: SpaceTimeProblem
    coeffs: np.ndarray        # full-space coefficients, boundary lift included
    report: SolveReport
    setup_time: float


def solve(exact, p, n_el, tol=1e-8, maxit=200, preconditioner="fd", strict=False, nel_t=None):
    """Assemble and solve the least-squares system for a manufactured solution."""
    if preconditioner not in ("fd", "none"):
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    prob = exact.problem(p, n_el, nel_t=nel_t)
    t0 = time.perf_counter()
    mats = univariate_matrices(prob)
    A = assemble_system_operator(prob, mats)
    if exact.moments is not None:
        rhs = exact.moments(prob).rhs
        boundary = None
    else:
        rhs = assemble_rhs(prob, exact.f)
        boundary = None
        if not exact.homogeneous:
            lift = lift_nonhomogeneous(prob, exact.boundary_data, rhs=rhs)
            rhs, boundary = lift.rhs, lift.boundary
    P = fd_setup(prob, mats) if preconditioner == "fd" else None
    setup = time.perf_counter() - t0
    applyP = (lambda r: fd_apply(P, r)) if P is not None else None
    t0 = time.perf_counter()
    report = pcg(A, rhs, applyP, tol=tol, maxit=maxit, strict=strict)
    report.timings["solve"] = time.perf_counter() - t0
    report.timings["setup"] = setup
    coeffs = extend(prob, report.x, boundary)
    return DiscreteSolution(prob, coeffs, report, setup)


def error_norms(prob, coeffs, exact, npts=None):
    """``(||u - u_h||_{L²(Q)}, ||u - u_h||_V)`` with ``||v||_V² = ||v||² + ||S v||²``.

    Uses element-wise tensor Gauss quadrature (``p + 1`` points per
    direction unless ``npts`` is given). Solutions carrying exact moments
    (homogeneous data only) are measured through the expansion
    ``||u||² - 2 Re(u, u_h) + ||u_h||²`` instead, which stays exact for
    data far too oscillatory for quadrature.
    """
    if exact.moments is not None:
        return _error_norms_moments(prob, coeffs, exact.moments(prob))
    rules = [element_quadrature(kv, npts or kv.degree + 1) for kv in prob.kvs]
    pts = [r.points for r in rules]
    W = np.ones(())
    for r in rules:
        W = np.multiply.outer(W, r.flat_weights)
    vals = evaluate_on_grid(prob, coeffs, pts, which=("value", "S"))
    mesh = np.meshgrid(*pts, indexing="ij", sparse=True)
    e0 = exact.u(*mesh) - vals["value"]
    e1 = exact.f(*mesh) - vals["S"]
    l2 = float(np.sqrt(np.sum(W * np.abs(e0) ** 2)))
    res = float(np.sum(W * np.abs(e1) ** 2))
    return l2, float(np.sqrt(l2 ** 2 + res))


def _error_norms_moments(prob, coeffs, mom):
    c = restrict(prob, coeffs)
    if not np.array_equal(extend(prob, c), coeffs):
        raise ValueError("moment-based errors need homogeneous boundary data")
    Mq = assemble_mass_operator(prob)
    A = assemble_system_operator(prob)
    l2_sq = mom.norm_u_sq - 2 * np.vdot(c, mom.u_moments).real + np.vdot(c, Mq @ c).real
    res_sq = mom.norm_f_sq - 2 * np.vdot(c, mom.rhs).real + np.vdot(c, A @ c).real
    l2_sq, res_sq = max(l2_sq, 0.0), max(res_sq, 0.0)
    return float(np.sqrt(l2_sq)), float(np.sqrt(l2_sq + res_sq))


@dataclass
class ConvergenceRecord:
    n_el: int
    h: float
    N_dof: int
    error_L2: float
    error_V: float
    order: Optional[float]
    iterations: int

    @property
    def residual_part(self):
        """``||S(u - u_h)||``: the part of the V-norm error beyond L²."""
        return float(np.sqrt(max(self.error_V ** 2 - self.error_L2 ** 2, 0.0)))

    def as_row(self):
        return dict(h=self.h, Ndof=self.N_dof, errL2=self.error_L2, errV=self.error_V,
                    order=self.order)


def convergence_study(exact, p, nel_list, tol=1e-12, maxit=200, npts=None):
    """Solve on successively refined meshes and record errors and observed orders.

    The default CG tolerance is tight so that the algebraic error stays
    below the discretization error on fine meshes; with a relative
    residual of 1e-8 the observed orders for ``p >= 3`` stall.
    """
    nel_list = list(nel_list)
    if any(b <= a for a, b in zip(nel_list, nel_list[1:])):
        raise ValueError("element counts must increase")
    out = []
    for n_el in nel_list:
        sol = solve(exact, p, n_el, tol=tol, maxit=maxit)
        if not sol.report.converged:
            raise RuntimeError(f"PCG did not converge for p={p}, n_el={n_el}")
        l2, ev = error_norms(sol.problem, sol.coeffs, exact, npts=npts)
        order = None
        if out:
            prev = out[-1]
            if prev.error_V > 0 and ev > 0:
                order = float(np.log(prev.error_V / ev) / np.log(n_el / prev.n_el))
        out.append(ConvergenceRecord(n_el, 1.0 / n_el, sol.problem.N_dof, l2, ev, order,
                                     sol.report.iterations))
        log.info("p=%d n_el=%d errL2=%.3e errV=%.3e order=%s", p, n_el, l2, ev, order)
    return out


# --------------------------------------------------------------------------
# stability diagnostics

def infsup_pencils(method, p, n_el, T=1.0, nu=1.0):
    """Sparse Hermitian pencil ``(K, G_V)`` whose smallest eigenvalue is ``α_h²``.

    least_squares: ``K = A_ls``; galerkin: ``K = A_g* M_Q^{-1} A_g`` returned
    as the factors ``(A_g, M_Q)``. ``G_V = M_Q + A_ls`` is the V-norm Gram matrix.
    """
    prob = SpaceTimeProblem.uniform(1, p, n_el, T=T, nu=nu)
    mats = univariate_matrices(prob)
    Als = _sparse_kron(assemble_system_operator(prob, mats))
    Mq = _sparse_kron(assemble_mass_operator(prob, mats))
    G = (Mq + Als).tocsc()
    if method == "least_squares":
        return Als, G, None
    if method == "galerkin":
        Ag = _sparse_kron(assemble_galerkin_operator(prob, mats))
        return Ag, G, Mq
    raise ValueError(f"unknown method {method!r}")


def infsup_constant(method, p, n_el, T=1.0, nu=1.0, dense=False):
    """Discrete inf-sup constant ``α_h`` of the 1D space-time discretization.

    ``dense=True`` solves the full pencil densely (small sizes, used as an
    oracle); otherwise the smallest eigenvalue is found by shift-invert
    Lanczos.
    """
    K, G, Mq = infsup_pencils(method, p, n_el, T, nu)
    if dense:
        if K.shape[0] > PENCIL_CAP:
            raise ValueError(f"pencil of size {K.shape[0]} exceeds the dense cap {PENCIL_CAP}")
        if Mq is None:
            Kd = K.toarray()
        else:
            Ag = K.toarray()
            Kd = Ag.conj().T @ np.linalg.solve(Mq.toarray(), Ag)
            Kd = 0.5 * (Kd + Kd.conj().T)
        lam = dense_hermitian_geneig(Kd, G.toarray())[0]
        return float(np.sqrt(max(lam, 0.0)))
    n = K.shape[0]
    if Mq is None:
        lu = spla.splu(K.tocsc())
        op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    else:
        lu_g = spla.splu(K.tocsc())

        def kinv(v):
            # (A_g* M^{-1} A_g)^{-1} v = A_g^{-1} M A_g^{-*} v
            w = lu_g.solve(np.asarray(v, dtype=complex), trans="H")
            return lu_g.solve(Mq @ w)

        op = spla.LinearOperator((n, n), matvec=kinv, dtype=complex)
    if Mq is None:
        Kop = K
    else:
        lu_m = spla.splu(Mq.tocsc())
        Kop = spla.LinearOperator((n, n), dtype=complex,
                                  matvec=lambda v: K.conj().T @ lu_m.solve(K @ v))
    vals = spla.eigsh(Kop, k=1, M=G, sigma=0.0, which="LM", OPinv=op,
                      return_eigenvectors=False, v0=np.ones(n, dtype=complex))
    return float(np.sqrt(max(vals.real.min(), 0.0)))


def _space_pencil(p, n_el, d):
    kv = make_open_knot_vector(p, n_el)
    M = univariate_matrix("M", kv, "drop_both").toarray()
    L = univariate_matrix("L", kv, "drop_both").toarray()
    G = univariate_matrix("G", kv, "drop_both").toarray()
    V = univariate_matrix("V", kv, "drop_both").toarray()
    if d == 1:
        B = V
        Ls, Ms = L, M
    elif d == 2:
        B = np.kron(M, V) + np.kron(V, M) + np.kron(G, G.T) + np.kron(G.T, G)
        Ls = np.kron(M, L) + np.kron(L, M)
        Ms = np.kron(M, M)
    else:
        raise ValueError("spectral equivalence in space is available for d = 1, 2")
    return B, Ls, Ms


def spectral_equivalence_space(p, n_el, d=1):
    """Eigenvalues of ``(L_s^T M_s^{-1} L_s)^{-1} B_s`` on the parametric domain."""
    B, Ls, Ms = _space_pencil(p, n_el, d)
    R = Ls.T @ np.linalg.solve(Ms, Ls)
    R = 0.5 * (R + R.T)
    return dense_hermitian_geneig(B, R).real


def spectral_equivalence_time(p, n_el):
    """Eigenvalues of ``(W_t* M_t^{-1} W_t)^{-1} L_t`` on the initial-condition space of (0,1)."""
    kv = make_open_knot_vector(p, n_el)
    M = univariate_matrix("M", kv, "drop_first").toarray()
    L = univariate_matrix("L", kv, "drop_first").toarray()
    W = univariate_matrix("W", kv, "drop_first").toarray()
    R = W.conj().T @ np.linalg.solve(M, W)
    R = 0.5 * (R + R.conj().T)
    return dense_hermitian_geneig(L, R).real


def condition_table(p_list, nel_list):
    """Rows ``{p, nel, kappa2}`` with ``kappa2 = κ₂(U) = sqrt(κ₂(M̂))``."""
    rows = []
    for p in p_list:
        for n_el in nel_list:
            M = univariate_matrix("M", make_open_knot_vector(p, n_el), "drop_both")
            rows.append(dict(p=int(p), nel=int(n_el), kappa2=cond2_eigvec(M)))
    return rows


# --------------------------------------------------------------------------
# benchmarks

def performance_run(exact, p, n_el, preconditioner="fd", tol=1e-8, maxit=200, strict=False,
                    warmup=True):
    """Solve once and report iterations and wall-clock times.

    A small warm-up solve runs first so that one-off costs stay out of the
    timings. The returned row follows the ``perf`` CSV schema; a run that
    hits ``maxit`` is reported with ``converged=False`` (the tables' ``*``).
    """
    if warmup:
        solve(exact, p, 2, tol=tol, maxit=maxit, preconditioner=preconditioner)
    sol = solve(exact, p, n_el, tol=tol, maxit=maxit, preconditioner=preconditioner,
                strict=strict)
    rep = sol.report
    solve_s = rep.timings["solve"]
    row = dict(problem=exact.name, p=int(p), nel=int(n_el), prec=preconditioner,
               iters=int(rep.iterations), setup_s=sol.setup_time, solve_s=solve_s,
               converged=bool(rep.converged))
    return rep, row
