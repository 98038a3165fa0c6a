"""Preconditioned conjugate gradients for complex Hermitian positive-definite systems."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolveReport", "pcg"]

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    residuals: list
    converged: bool
    breakdown: bool = False
    timings: dict = field(default_factory=dict)

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else 0.0


def _as_callable(op):
    if op is None:
        return lambda v: v
    if callable(op):
        return op
    return lambda v: op @ v


def pcg(applyA, b, applyP=None, tol=1e-8, maxit=200, strict=False, x0=None):
    """Solve ``A x = b`` with preconditioned CG.

    Parameters
    ----------
    applyA, applyP : callable or object supporting ``@``
        Operator and preconditioner (``P^{-1}`` action); ``applyP=None``
        runs plain CG.
    b : ndarray
        Right-hand side.
    tol : float
        Target relative residual ``||b - A x|| / ||b||``.
    maxit : int
        Iteration limit.
    strict : bool
        Evaluate the true residual every iteration (one extra product
        with ``A``). Otherwise the recurrence residual drives the loop and
        the true residual is confirmed before reporting convergence.
    x0 : ndarray, optional
        Initial guess (default zero).

    Returns
    -------
    SolveReport
        ``residuals[k]`` is the relative residual after ``k`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = _as_callable(applyA)
    P = _as_callable(applyP)
    b = np.asarray(b, dtype=complex)
    t_mat = t_pre = 0.0

    def matvec(v):
        nonlocal t_mat
        t0 = time.perf_counter()
        out = A(v)
        t_mat += time.perf_counter() - t0
        return out

    def precond(v):
        nonlocal t_pre
        t0 = time.perf_counter()
        out = P(v)
        t_pre += time.perf_counter() - t0
        return out

    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=complex)
    if bnorm == 0.0:
        return SolveReport(np.zeros_like(b), 0, [0.0], True,
                           timings={"matvec": 0.0, "precond": 0.0})
    r = b - matvec(x) if x0 is not None else b.copy()
    res = [np.linalg.norm(r) / bnorm]
    if res[0] <= tol:
        return SolveReport(x, 0, res, True, timings={"matvec": t_mat, "precond": t_pre})

    z = precond(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    breakdown = False
    converged = False
    k = 0
    while k < maxit:
        Ap = matvec(p)
        curv = np.vdot(p, Ap).real
        if curv <= 0.0 or rz <= 0.0:
            log.warning("PCG breakdown at iteration %d (p*Ap = %.3e, r*z = %.3e)", k, curv, rz)
            breakdown = True
            break
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        k += 1
        if strict:
            r = b - matvec(x)
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol and not strict:
            # confirm with the true residual
            r = b - matvec(x)
            rel = np.linalg.norm(r) / bnorm
        res.append(rel)
        if rel <= tol:
            converged = True
            break
        z = precond(r)
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveReport(x, k, res, converged, breakdown,
                       timings={"matvec": t_mat, "precond": t_pre})
