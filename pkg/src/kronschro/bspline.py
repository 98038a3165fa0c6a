"""
Univariate B-spline spaces on open knot vectors.

Basis evaluation follows the Cox-de Boor recursion in the form of
Algorithm A2.3 of Piegl & Tiller (The NURBS Book), vectorized over the
evaluation points.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "KnotVector",
    "QuadratureRule",
    "make_open_knot_vector",
    "find_spans",
    "eval_basis",
    "eval_basis_array",
    "greville_abscissae",
    "element_quadrature",
    "collocation_matrix",
    "basis_matrix",
]


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open knot vector ``xi_1 <= ... <= xi_{m+p+1}`` of degree ``p``."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        p = int(self.degree)
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        if knots.ndim != 1 or knots.size < 2 * p + 2:
            raise ValueError("knot vector too short for the given degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        a, b = knots[0], knots[-1]
        if not (np.all(knots[: p + 1] == a) and np.all(knots[-p - 1 :] == b)):
            raise ValueError("knot vector is not open")
        if not a < b:
            raise ValueError("degenerate knot vector (a == b)")
        if self.max_interior_multiplicity > p:
            raise ValueError("interior knot multiplicity exceeds the degree")

    @property
    def a(self) -> float:
        return float(self.knots[0])

    @property
    def b(self) -> float:
        return float(self.knots[-1])

    @property
    def dim(self) -> int:
        """Number of basis functions ``m``."""
        return self.knots.size - self.degree - 1

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    @property
    def num_elements(self) -> int:
        return self.breakpoints.size - 1

    @property
    def mesh_size(self) -> float:
        return float(np.max(np.diff(self.breakpoints)))

    @cached_property
    def max_interior_multiplicity(self) -> int:
        inner = self.knots[(self.knots > self.knots[0]) & (self.knots < self.knots[-1])]
        if inner.size == 0:
            return 0
        _, counts = np.unique(inner, return_counts=True)
        return int(counts.max())

    @property
    def continuity(self) -> int:
        """Global smoothness order (``p - 1`` for simple interior knots)."""
        return self.degree - max(self.max_interior_multiplicity, 1)

    def __repr__(self):
        return (f"KnotVector(degree={self.degree}, dim={self.dim}, "
                f"elements={self.num_elements}, [{self.a:g}, {self.b:g}])")


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights, one row per element."""

    nodes: np.ndarray
    weights: np.ndarray
    elements: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.nodes.ravel()

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()


def make_open_knot_vector(p, n_el, a=0.0, b=1.0):
    """Uniform open knot vector with simple interior knots (C^{p-1})."""
    if int(p) != p or p < 1:
        raise ValueError(f"degree must be an integer >= 1, got {p}")
    if int(n_el) != n_el or n_el < 1:
        raise ValueError(f"element count must be an integer >= 1, got {n_el}")
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    p, n_el = int(p), int(n_el)
    inner = a + (b - a) * np.arange(1, n_el) / n_el
    knots = np.concatenate([np.full(p + 1, a), inner, np.full(p + 1, b)])
    return KnotVector(p, knots)


def find_spans(kv, x):
    """Knot span index ``i`` with ``xi_i <= x < xi_{i+1}`` (0-based).

    The right endpoint is assigned to the last non-empty span.
    """
    x = np.asarray(x, dtype=float)
    span = np.searchsorted(kv.knots, x, side="right") - 1
    return np.clip(span, kv.degree, kv.dim - 1)


def eval_basis_array(kv, x, nderiv=0):
    """Nonzero basis functions and derivatives at many points.

    Parameters
    ----------
    kv : KnotVector
    x : array_like, shape (n,)
        Evaluation points in ``[a, b]``.
    nderiv : int
        Highest derivative order (``<= p``).

    Returns
    -------
    spans : ndarray of int, shape (n,)
        Basis functions ``spans - p, ..., spans`` are nonzero at ``x``.
    ders : ndarray, shape (n, nderiv + 1, p + 1)
        ``ders[q, k, j]`` is the k-th derivative of basis ``spans[q] - p + j``.
    """
    p = kv.degree
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if nderiv < 0 or nderiv > p:
        raise ValueError(f"nderiv must lie in [0, {p}]")
    tol = 1e-12 * (kv.b - kv.a)
    if np.any(x < kv.a - tol) or np.any(x > kv.b + tol):
        raise ValueError(f"evaluation point outside [{kv.a}, {kv.b}]")
    x = np.clip(x, kv.a, kv.b)
    U = kv.knots
    spans = find_spans(kv, x)
    npts = x.size

    ndu = np.zeros((p + 1, p + 1, npts))
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - U[spans + 1 - j]
        right[j] = U[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((npts, nderiv + 1, p + 1))
    for j in range(p + 1):
        ders[:, 0, j] = ndu[j, p]

    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nderiv + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1

    fac = p
    for k in range(1, nderiv + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return spans, ders


def eval_basis(kv, x, nderiv=0):
    """Span index and ``(nderiv + 1, p + 1)`` table of basis values at a point."""
    if np.ndim(x) != 0:
        raise ValueError("eval_basis expects a scalar point; use eval_basis_array")
    spans, ders = eval_basis_array(kv, [x], nderiv)
    return int(spans[0]), ders[0]


def greville_abscissae(kv):
    """Knot averages ``(xi_{i+1} + ... + xi_{i+p}) / p``."""
    p = kv.degree
    U = kv.knots
    cs = np.concatenate([[0.0], np.cumsum(U)])
    g = (cs[p + 1 : p + 1 + kv.dim] - cs[1 : 1 + kv.dim]) / p
    # exact endpoints; the averages of repeated knots can be off by an ulp
    g[0], g[-1] = kv.a, kv.b
    return g


def element_quadrature(kv, npts):
    """Gauss-Legendre rule with ``npts`` nodes on every non-empty element."""
    if npts < 1:
        raise ValueError("npts must be >= 1")
    xg, wg = np.polynomial.legendre.leggauss(int(npts))
    z = kv.breakpoints
    lo, hi = z[:-1], z[1:]
    half = 0.5 * (hi - lo)
    nodes = 0.5 * (hi + lo)[:, None] + half[:, None] * xg[None, :]
    weights = half[:, None] * wg[None, :]
    return QuadratureRule(nodes, weights, np.stack([lo, hi], axis=1))


def basis_matrix(kv, x, nderiv=0):
    """Sparse matrix ``B[i, q] = b_i^{(nderiv)}(x_q)`` of shape (m, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    spans, ders = eval_basis_array(kv, x, nderiv)
    p = kv.degree
    rows = (spans[:, None] - p + np.arange(p + 1)[None, :]).ravel()
    cols = np.repeat(np.arange(x.size), p + 1)
    vals = ders[:, nderiv, :].ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(kv.dim, x.size))


def collocation_matrix(kv, x):
    """Dense collocation matrix ``C[q, i] = b_i(x_q)``."""
    return basis_matrix(kv, x).T.toarray()
