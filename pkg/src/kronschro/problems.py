"""
Manufactured solutions for ``i u_t - nu Δu = f``.

All callables take ``(t, x_1, ..., x_d)`` as broadcastable arrays and
return complex arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional

import numpy as np

from .assembly import SpaceTimeProblem
from .bspline import eval_basis_array

__all__ = [
    "ManufacturedSolution",
    "ExactMoments",
    "gaussian_1d",
    "high_mode_1d",
    "traveling_wave",
    "traveling_wave_2d",
    "zero_solution",
    "oscillatory_moments",
    "schrodinger_fd",
    "check_consistency",
    "PROBLEMS",
]


@dataclass(frozen=True)
class ExactMoments:
    """Exact projections of a solution onto the free basis functions.

    ``rhs[i] = (f, S B_i)``, ``u_moments[i] = (u, B_i)``, plus the squared
    L² norms of ``u`` and ``f`` over the space-time cylinder.
    """

    rhs: np.ndarray
    u_moments: np.ndarray
    norm_u_sq: float
    norm_f_sq: float


@dataclass(frozen=True)
class ManufacturedSolution:
    name: str
    d: int
    T: float
    nu: float
    u: Callable
    f: Callable
    params: dict = field(default_factory=dict)
    homogeneous: bool = False
    moments: Optional[Callable] = None   # (SpaceTimeProblem) -> ExactMoments

    def boundary_data(self, *args):
        """Dirichlet and initial data: the trace of ``u``."""
        return self.u(*args)

    def initial(self, *x):
        return self.u(np.zeros(()), *x)

    def problem(self, p, n_el, nel_t=None):
        """Uniform space-time discretization with equal time and space mesh sizes."""
        return SpaceTimeProblem.uniform(self.d, p, n_el, T=self.T, nu=self.nu, nel_t=nel_t)


# --------------------------------------------------------------------------

def gaussian_1d(alpha=1.5, beta=1.5, gamma=2.5, T=2.0, nu=1.0):
    """Complex Gaussian ``αβ / sqrt(β² - iγt) · exp(-x² / (β² - iγt))`` on (0,T)x(0,1)."""

    def u(t, x):
        s = beta ** 2 - 1j * gamma * t
        return alpha * beta / np.sqrt(s) * np.exp(-x ** 2 / s)

    def f(t, x):
        s = beta ** 2 - 1j * gamma * t
        base = alpha * beta / np.sqrt(s) * np.exp(-x ** 2 / s)
        dt_over_u = -1j * gamma * (-0.5 / s + x ** 2 / s ** 2)
        dxx_over_u = 4 * x ** 2 / s ** 2 - 2 / s
        return base * (1j * dt_over_u - nu * dxx_over_u)

    return ManufacturedSolution("gaussian1d", 1, T, nu, u, f,
                                dict(alpha=alpha, beta=beta, gamma=gamma))


def traveling_wave(d=2, omega=0.2, T=1.0, nu=1.0):
    """Traveling wave ``a exp(-i(|x|² + t²)/ω²)`` with ``a = (2/ω²)^{1/4}``."""
    a = (2.0 / omega ** 2) ** 0.25

    def u(t, *x):
        r2 = sum(xi ** 2 for xi in x)
        return a * np.exp(-1j * (r2 + t ** 2) / omega ** 2)

    def f(t, *x):
        r2 = sum(xi ** 2 for xi in x)
        factor = 2 * t / omega ** 2 + nu * (2j * d / omega ** 2 + 4 * r2 / omega ** 4)
        return factor * u(t, *x)

    return ManufacturedSolution(f"wave{d}d", d, T, nu, u, f, dict(omega=omega, amplitude=a))


def traveling_wave_2d(omega=0.2, T=1.0, nu=1.0):
    return traveling_wave(2, omega, T, nu)


def zero_solution(d=1, T=1.0, nu=1.0):
    def zero(t, *x):
        return np.zeros(np.broadcast(t, *x).shape, dtype=complex)

    def moments(prob):
        n = prob.N_dof
        return ExactMoments(np.zeros(n, complex), np.zeros(n, complex), 0.0, 0.0)

    return ManufacturedSolution("zero", d, T, nu, zero, zero, homogeneous=True, moments=moments)


# --------------------------------------------------------------------------
# high-mode problem

def _modal_sum(coef_t, x, modes):
    """``Σ_k coef_t[..., k] · sqrt(2) sin(kπx)`` for broadcastable inputs."""
    k = modes
    t_shape = coef_t.shape[:-1]
    x = np.asarray(x, dtype=float)
    if (len(t_shape) == 2 and x.ndim == 2 and t_shape[1] == 1 and x.shape[0] == 1):
        # tensor grid: (nt, 1) x (1, nx) -> matrix product over modes
        S = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, x[0]))
        return coef_t[:, 0, :] @ S
    shape = np.broadcast_shapes(t_shape, x.shape)
    out = np.zeros(shape, dtype=complex)
    for j, kk in enumerate(k):
        out += coef_t[..., j] * (np.sqrt(2.0) * np.sin(kk * np.pi * x))
    return out


def high_mode_1d(M=625, T=2.0):
    """Truncated modal expansion with ``f_k(t) = exp(i k²π² t) / k``.

    Exact solution ``u = Σ_{k<=M} (-it/k) exp(i k²π² t) sqrt(2) sin(kπx)``,
    homogeneous boundary and initial data, ``nu = 1``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    k = np.arange(1, M + 1, dtype=float)
    sigma = (k * np.pi) ** 2

    def u(t, x):
        t = np.asarray(t, dtype=float)[..., None]
        return _modal_sum(-1j * t / k * np.exp(1j * sigma * t), x, k)

    def f(t, x):
        t = np.asarray(t, dtype=float)[..., None]
        return _modal_sum(np.exp(1j * sigma * t) / k, x, k)

    def moments(prob):
        if prob.d != 1 or prob.trial != "initial":
            raise ValueError("modal moments are defined for d = 1 with initial conditions")
        it, ix = prob.index_sets
        kt, kx = prob.time_kv, prob.space_kvs[0]
        T0 = oscillatory_moments(kt, sigma, 0)[it]
        T1 = oscillatory_moments(kt, sigma, 1)[it]
        Tt = oscillatory_moments(kt, sigma, 0, tpow=1)[it]
        S0 = _sine_moments(kx, k, 0)[ix]
        S2 = _sine_moments(kx, k, 2)[ix]
        inv_k = 1.0 / k
        R = -1j * (T1 * inv_k) @ S0.T - prob.nu * (T0 * inv_k) @ S2.T
        U = (-1j * Tt * inv_k) @ S0.T
        s2 = float(np.sum(inv_k ** 2))
        return ExactMoments(R.reshape(-1, order="F"), U.reshape(-1, order="F"),
                            prob.T ** 3 / 3 * s2, prob.T * s2)

    return ManufacturedSolution("highmode1d", 1, T, 1.0, u, f, dict(M=M),
                                homogeneous=True, moments=moments)


def _exp_poly_integrals(theta, qmax):
    """``I_q(θ) = ∫_0^1 y^q e^{iθy} dy`` for q = 0..qmax; theta any shape."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape + (qmax + 1,), dtype=complex)
    big = np.abs(theta) >= max(1.0, 2.0 * qmax)
    if np.any(big):
        th = theta[big]
        e = np.exp(1j * th)
        I = (e - 1) / (1j * th)
        out[big, 0] = I
        for q in range(1, qmax + 1):
            I = (e - q * I) / (1j * th)
            out[big, q] = I
    small = ~big
    if np.any(small):
        y, w = np.polynomial.legendre.leggauss(48)
        y = 0.5 * (y + 1)
        w = 0.5 * w
        th = theta[small]
        E = np.exp(1j * th[:, None] * y[None, :]) * w[None, :]
        for q in range(qmax + 1):
            out[small, q] = E @ (y ** q)
    return out


def oscillatory_moments(kv, sigma, r=0, tpow=0):
    """Exact ``∫ t^tpow e^{iσt} b_j^{(r)}(t) dt`` for every basis function and σ.

    Each basis piece is a polynomial on its element, so the integrals
    reduce to closed-form ``∫_0^1 y^q e^{iθy} dy`` values.
    Returns an array of shape ``(kv.dim, len(sigma))``.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    p = kv.degree
    z = kv.breakpoints
    lo, h = z[:-1], np.diff(z)
    n_el = lo.size
    # local monomial coefficients in y = (t - lo)/h, from samples inside each element
    ys = 0.5 - 0.5 * np.cos(np.pi * (np.arange(p + 1) + 0.5) / (p + 1))
    pts = (lo[:, None] + h[:, None] * ys[None, :]).ravel()
    spans, ders = eval_basis_array(kv, pts, r)
    vals = ders[:, r, :].reshape(n_el, p + 1, p + 1)       # (el, sample, local basis)
    V = np.vander(ys, p + 1, increasing=True)
    coef = np.linalg.solve(V[None], vals)                     # (el, q, local basis)
    if tpow:
        # multiply by t^tpow = (lo + h y)^tpow
        tp = np.zeros((n_el, tpow + 1))
        for a in range(tpow + 1):
            tp[:, a] = comb(tpow, a) * lo ** (tpow - a) * h ** a
        full = np.zeros((n_el, p + 1 + tpow, p + 1))
        for a in range(tpow + 1):
            full[:, a : a + p + 1, :] += tp[:, a, None, None] * coef
        coef = full
    qmax = coef.shape[1] - 1
    theta = np.outer(h, sigma)                                # (el, K)
    I = _exp_poly_integrals(theta, qmax)                      # (el, K, q)
    phase = h[:, None] * np.exp(1j * np.outer(lo, sigma))     # (el, K)
    local = np.einsum("ekq,eqj->ejk", I, coef) * phase[:, None, :]
    first = spans[:: p + 1] - p
    out = np.zeros((kv.dim, sigma.size), dtype=complex)
    for j in range(p + 1):
        np.add.at(out, first + j, local[:, j, :])
    return out


def _sine_moments(kv, k, r):
    """``∫ sqrt(2) sin(kπx) b_j^{(r)}(x) dx`` (real)."""
    w = k * np.pi
    plus = oscillatory_moments(kv, w, r)
    minus = oscillatory_moments(kv, -w, r)
    return (np.sqrt(2.0) * (plus - minus) / 2j).real


# --------------------------------------------------------------------------
# consistency checks

_FD2 = (np.array([-1, 16, -30, 16, -1]) / 12.0, np.arange(-2, 3))
_FD1 = (np.array([1, -8, 0, 8, -1]) / 12.0, np.arange(-2, 3))


def schrodinger_fd(sol, t, x, h=1e-4):
    """``i u_t - nu Δu`` at points ``(t, x)`` by fourth-order central differences.

    ``x`` has shape ``(n, d)``.
    """
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    cols = [x[:, l] for l in range(x.shape[1])]
    c1, o1 = _FD1
    dt = sum(c * sol.u(t + o * h, *cols) for c, o in zip(c1, o1)) / h
    c2, o2 = _FD2
    lap = 0
    for l in range(len(cols)):
        for c, o in zip(c2, o2):
            shifted = list(cols)
            shifted[l] = cols[l] + o * h
            lap = lap + c * sol.u(t, *shifted)
    lap = lap / h ** 2
    return 1j * dt - sol.nu * lap


def check_consistency(sol, n=200, seed=0, h=1e-4):
    """Max-norm relative mismatch between ``f`` and finite differences of ``u``."""
    rng = np.random.default_rng(seed)
    margin = 4 * h
    t = rng.uniform(margin, sol.T - margin, n)
    x = rng.uniform(margin, 1 - margin, (n, sol.d))
    f = sol.f(t, *[x[:, l] for l in range(sol.d)])
    fd = schrodinger_fd(sol, t, x, h)
    return float(np.max(np.abs(f - fd)) / np.max(np.abs(f)))


PROBLEMS = {
    "gaussian1d": gaussian_1d,
    "highmode1d": high_mode_1d,
    "wave2d": traveling_wave_2d,
}
