"""
Galerkin matrices of univariate B-spline spaces and the space-time
least-squares operator for ``S = i d/dt - nu * Laplacian`` on
``(0, T) x (0, 1)^d``.

Conventions
-----------
* Axis 0 is time, axes 1..d are space; see :mod:`kronschro.tensorops`.
* ``[A]_{ij} = (S B_j, S B_i)``: rows are indexed by test functions.
* Univariate matrices:

  ``M[i,j] = ∫ b_i b_j``, ``L[i,j] = ∫ b_i' b_j'``, ``G[i,j] = ∫ b_i'' b_j``,
  ``V[i,j] = ∫ b_i'' b_j''``, ``W[i,j] = i ∫ b_j' b_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .bspline import (
    basis_matrix,
    collocation_matrix,
    element_quadrature,
    eval_basis_array,
    greville_abscissae,
    make_open_knot_vector,
)
from .tensorops import KroneckerOperator, mode_product, unvec, vec

__all__ = [
    "SpaceTimeProblem",
    "UnivariateMatrices",
    "Lifting",
    "restriction_indices",
    "univariate_matrix",
    "univariate_matrices",
    "assemble_system_operator",
    "assemble_full_operator",
    "assemble_mass_operator",
    "assemble_galerkin_operator",
    "assemble_rhs",
    "lift_nonhomogeneous",
    "assemble_ultraweak",
    "restrict",
    "extend",
    "evaluate_on_grid",
]

RESTRICTIONS = ("none", "drop_first", "drop_last", "drop_both")

# derivative orders (row, column) and the scalar prefactor of each kind
_KINDS = {
    "M": (0, 0, 1.0),
    "L": (1, 1, 1.0),
    "G": (2, 0, 1.0),
    "V": (2, 2, 1.0),
    "W": (0, 1, 1j),
}


def restriction_indices(m, restriction):
    if restriction not in RESTRICTIONS:
        raise ValueError(f"unknown restriction {restriction!r}")
    lo = 1 if restriction in ("drop_first", "drop_both") else 0
    hi = m - 1 if restriction in ("drop_last", "drop_both") else m
    if hi <= lo:
        raise ValueError(f"restriction {restriction!r} leaves no basis functions")
    return np.arange(lo, hi)


def univariate_matrix(kind, kv, restriction="none", npts=None):
    """Banded Galerkin matrix of one univariate spline space.

    Entries are integrated element by element with ``npts`` Gauss points
    (default ``p + 1``, exact for every kind). Returns a CSR matrix, real
    for M, L, G, V and purely imaginary complex for W.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown matrix kind {kind!r}")
    r_row, r_col, scale = _KINDS[kind]
    if max(r_row, r_col) >= 2 and kv.continuity < 1:
        raise ValueError(f"matrix {kind} needs a C^1 spline space")
    p = kv.degree
    quad = element_quadrature(kv, npts or p + 1)
    x = quad.points
    w = quad.flat_weights
    spans, ders = eval_basis_array(kv, x, max(r_row, r_col))
    rows_loc = ders[:, r_row, :]
    cols_loc = ders[:, r_col, :]
    vals = (w[:, None, None] * rows_loc[:, :, None] * cols_loc[:, None, :])
    idx = spans[:, None] - p + np.arange(p + 1)[None, :]
    I = np.broadcast_to(idx[:, :, None], vals.shape).ravel()
    J = np.broadcast_to(idx[:, None, :], vals.shape).ravel()
    mat = sp.coo_matrix((vals.ravel(), (I, J)), shape=(kv.dim, kv.dim)).tocsr()
    mat.sum_duplicates()
    if scale != 1.0:
        mat = (scale * mat).tocsr()
    keep = restriction_indices(kv.dim, restriction)
    return mat[keep][:, keep].tocsr()


@dataclass(frozen=True)
class SpaceTimeProblem:
    """Discrete space-time problem on ``(0, T) x (0, 1)^d``.

    Parameters
    ----------
    d : int
        Spatial dimension (1, 2 or 3).
    p_t, p_s : int
        Degrees in time and space (maximal continuity).
    nel_t : int
        Number of time elements on ``[0, T]``.
    nel_s : tuple of int
        Number of elements per spatial direction on ``[0, 1]``.
    trial : {"initial", "final"}
        Homogeneous condition imposed at ``t = 0`` (least squares) or at
        ``t = T`` (ultraweak test space).
    """

    d: int
    p_t: int
    p_s: int
    nel_t: int
    nel_s: tuple
    T: float = 1.0
    nu: float = 1.0
    trial: str = "initial"

    def __post_init__(self):
        nel_s = self.nel_s
        if np.ndim(nel_s) == 0:
            nel_s = (int(nel_s),) * self.d
        object.__setattr__(self, "nel_s", tuple(int(n) for n in nel_s))
        if self.d not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {self.d}")
        if len(self.nel_s) != self.d:
            raise ValueError("need one spatial element count per direction")
        if self.p_t < 1:
            raise ValueError(f"time degree must be >= 1, got {self.p_t}")
        if self.p_s < 2:
            raise ValueError(f"space degree must be >= 2 (C^1 splines), got {self.p_s}")
        if self.T <= 0 or self.nu <= 0:
            raise ValueError("T and nu must be positive")
        if self.trial not in ("initial", "final"):
            raise ValueError(f"trial must be 'initial' or 'final', got {self.trial!r}")
        if self.nel_t < 1 or min(self.nel_s) < 1:
            raise ValueError("element counts must be >= 1")

    @classmethod
    def uniform(cls, d, p, n_el, T=1.0, nu=1.0, nel_t=None, trial="initial"):
        """Same degree in space and time; ``nel_t`` defaults to ``round(T * n_el)``
        so that time and space mesh sizes agree."""
        if nel_t is None:
            nel_t = max(1, int(round(T * n_el)))
        return cls(d, p, p, nel_t, (n_el,) * d, T, nu, trial)

    @cached_property
    def time_kv(self):
        return make_open_knot_vector(self.p_t, self.nel_t, 0.0, self.T)

    @cached_property
    def space_kvs(self):
        return tuple(make_open_knot_vector(self.p_s, n, 0.0, 1.0) for n in self.nel_s)

    @property
    def kvs(self):
        return (self.time_kv,) + self.space_kvs

    @property
    def time_restriction(self):
        return "drop_first" if self.trial == "initial" else "drop_last"

    @property
    def restrictions(self):
        return (self.time_restriction,) + ("drop_both",) * self.d

    @cached_property
    def index_sets(self):
        """Retained basis indices per axis (into the unrestricted spaces)."""
        return tuple(restriction_indices(kv.dim, r) for kv, r in zip(self.kvs, self.restrictions))

    @property
    def n_t(self) -> int:
        return self.time_kv.dim - 1

    @property
    def n_s(self) -> tuple:
        return tuple(kv.dim - 2 for kv in self.space_kvs)

    @property
    def N_s(self) -> int:
        return int(np.prod(self.n_s))

    @property
    def N_dof(self) -> int:
        return self.n_t * self.N_s

    @property
    def dims(self) -> tuple:
        return (self.n_t,) + self.n_s

    @property
    def full_dims(self) -> tuple:
        return tuple(kv.dim for kv in self.kvs)

    def with_trial(self, trial):
        return SpaceTimeProblem(self.d, self.p_t, self.p_s, self.nel_t, self.nel_s,
                                self.T, self.nu, trial)


@dataclass(frozen=True)
class UnivariateMatrices:
    """Restricted (or full) univariate factors of a space-time problem.

    ``time`` maps "M", "L", "W" to matrices on the time space; ``space`` is
    one dict per direction with "M", "L", "G", "V".
    """

    time: dict
    space: tuple = field(default_factory=tuple)


def univariate_matrices(prob, restricted=True):
    tr = prob.time_restriction if restricted else "none"
    sr = "drop_both" if restricted else "none"
    time = {k: univariate_matrix(k, prob.time_kv, tr) for k in ("M", "L", "W")}
    space = tuple({k: univariate_matrix(k, kv, sr) for k in ("M", "L", "G", "V")}
                  for kv in prob.space_kvs)
    return UnivariateMatrices(time, space)


def _space_factors(mats, overrides):
    """Spatial factor list: ``overrides[l]`` in direction l, the mass matrix elsewhere."""
    return [overrides.get(l, mats.space[l]["M"]) for l in range(len(mats.space))]


def _bilaplacian_terms(mats, scale, tfac):
    """Terms of ``scale * B_s ⊗ tfac`` with ``B_s[i,j] = ∫ ΔB_i ΔB_j``."""
    d = len(mats.space)
    terms = []
    for l in range(d):
        terms.append((scale, [tfac] + _space_factors(mats, {l: mats.space[l]["V"]})))
    for l in range(d):
        for m in range(d):
            if l != m:
                G_l = mats.space[l]["G"]
                G_m = mats.space[m]["G"]
                terms.append((scale, [tfac] + _space_factors(mats, {l: G_l, m: G_m.T.tocsr()})))
    return terms


def _operator(prob, mats, dims, general):
    nu = prob.nu
    d = prob.d
    Lt, Mt, Wt = mats.time["L"], mats.time["M"], mats.time["W"]
    terms = [(1.0, [Lt] + _space_factors(mats, {}))]
    terms += _bilaplacian_terms(mats, nu ** 2, Mt)
    if general:
        # no spatial integration by parts: valid on unrestricted spaces
        WtT = Wt.T.tocsr()
        for l in range(d):
            G = mats.space[l]["G"]
            terms.append((-nu, [Wt] + _space_factors(mats, {l: G})))
            terms.append((nu, [WtT] + _space_factors(mats, {l: G.T.tocsr()})))
    else:
        Wsym = (Wt + Wt.conj().T).tocsr()
        for l in range(d):
            terms.append((nu, [Wsym] + _space_factors(mats, {l: mats.space[l]["L"]})))
    return KroneckerOperator(dims, terms)


def assemble_system_operator(prob, mats=None):
    """Least-squares operator ``A = M_s⊗L_t + nu² B_s⊗M_t + nu L_s⊗(W_t + W_t*)``.

    Built on the restricted spaces (homogeneous Dirichlet in space, and the
    time condition selected by ``prob.trial``).
    """
    mats = mats or univariate_matrices(prob, restricted=True)
    return _operator(prob, mats, prob.dims, general=False)


def assemble_full_operator(prob, mats=None):
    """Gram matrix of ``S B_j`` over the unrestricted tensor space.

    The cross terms are kept in the form ``-nu K_s⊗W_t + nu K_s^T⊗W_t^T`` with
    ``K_s[i,j] = ∫ B_j ΔB_i``, which does not rely on vanishing boundary traces.
    """
    mats = mats or univariate_matrices(prob, restricted=False)
    return _operator(prob, mats, prob.full_dims, general=True)


def assemble_mass_operator(prob, mats=None):
    """Space-time mass matrix ``M_s ⊗ M_t`` on the restricted space."""
    mats = mats or univariate_matrices(prob, restricted=True)
    return KroneckerOperator(prob.dims, [(1.0, [mats.time["M"]] + _space_factors(mats, {}))])


def assemble_galerkin_operator(prob, mats=None):
    """Galerkin matrix ``[A_g]_{ij} = (S B_j, B_i)`` with trial = test space."""
    mats = mats or univariate_matrices(prob, restricted=True)
    terms = [(1.0, [mats.time["W"]] + _space_factors(mats, {}))]
    for l in range(prob.d):
        GT = mats.space[l]["G"].T.tocsr()
        terms.append((-prob.nu, [mats.time["M"]] + _space_factors(mats, {l: GT})))
    return KroneckerOperator(prob.dims, terms)


# --------------------------------------------------------------------------
# load vectors

def _quadrature_grids(prob, npts=None):
    rules = []
    for kv in prob.kvs:
        rules.append(element_quadrature(kv, npts or kv.degree + 1))
    return rules


def _evaluate(fun, points):
    mesh = np.meshgrid(*points, indexing="ij", sparse=True)
    vals = np.asarray(fun(*mesh), dtype=complex)
    return np.broadcast_to(vals, tuple(len(p) for p in points))


def _weights_tensor(rules):
    W = np.ones(())
    for r in rules:
        W = np.multiply.outer(W, r.flat_weights)
    return W


def _contract(F, mats):
    for axis, B in enumerate(mats):
        F = mode_product(F, B, axis)
    return F


def assemble_rhs(prob, f, npts=None, restricted=True):
    """Load vector ``[f]_i = ∫_Q f · conj(S B_i)`` by sum factorization.

    ``f(t, x_1, ..., x_d)`` must broadcast over ``np.meshgrid(..., sparse=True)``
    arrays. With ``restricted=False`` the vector covers all basis functions.
    """
    rules = _quadrature_grids(prob, npts)
    pts = [r.points for r in rules]
    F = _evaluate(f, pts) * _weights_tensor(rules)
    keep = prob.index_sets if restricted else tuple(np.arange(kv.dim) for kv in prob.kvs)
    B0 = [basis_matrix(kv, x, 0)[k] for kv, x, k in zip(prob.kvs, pts, keep)]
    Bt1 = basis_matrix(prob.time_kv, pts[0], 1)[keep[0]]
    # contract time first so the spatial sweeps share it
    F0 = mode_product(F, B0[0], 0)
    F1 = mode_product(F, Bt1, 0)
    out = F1
    for l in range(1, prob.d + 1):
        out = mode_product(out, B0[l], l)
    out = -1j * out
    for l in range(1, prob.d + 1):
        G = F0
        for k in range(1, prob.d + 1):
            B = basis_matrix(prob.kvs[k], pts[k], 2)[keep[k]] if k == l else B0[k]
            G = mode_product(G, B, k)
        out = out - prob.nu * G
    return vec(out)


# --------------------------------------------------------------------------
# constrained degrees of freedom

def restrict(prob, v_full):
    """Entries of a full-space vector at the retained (free) indices."""
    X = unvec(v_full, prob.full_dims)
    return vec(X[np.ix_(*prob.index_sets)])


def extend(prob, v, boundary=None):
    """Embed a free-DOF vector into the full space, adding ``boundary`` if given."""
    X = np.zeros(prob.full_dims, dtype=complex)
    if boundary is not None:
        X += unvec(boundary, prob.full_dims)
    X[np.ix_(*prob.index_sets)] += unvec(v, prob.dims)
    return vec(X)


def _constrained_faces(prob):
    t_idx = 0 if prob.trial == "initial" else prob.time_kv.dim - 1
    faces = [(0, t_idx)]
    for l, kv in enumerate(prob.space_kvs, start=1):
        faces += [(l, 0), (l, kv.dim - 1)]
    return faces


@dataclass(frozen=True)
class Lifting:
    """Boundary/initial coefficients (full space, zero on free DOFs) and the corrected load."""

    boundary: np.ndarray
    rhs: np.ndarray


def _interpolation_inverse(kv):
    C = collocation_matrix(kv, greville_abscissae(kv))
    try:
        Cinv = np.linalg.inv(C)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular Greville interpolation matrix") from exc
    if not np.all(np.isfinite(Cinv)):
        raise ValueError("singular Greville interpolation matrix")
    return Cinv


def lift_nonhomogeneous(prob, g, f=None, rhs=None, full_operator=None):
    """Lift nonhomogeneous Dirichlet/initial data and correct the load vector.

    Coefficients on each constrained face interpolate ``g`` at the Greville
    points of that face. The corrected load is
    ``rhs - A_full[free, constrained] u_bnd`` with ``rhs`` either given or
    assembled from ``f``.
    """
    gre = [greville_abscissae(kv) for kv in prob.kvs]
    cinv = [_interpolation_inverse(kv) for kv in prob.kvs]
    U = np.zeros(prob.full_dims, dtype=complex)
    for axis, idx in _constrained_faces(prob):
        kv = prob.kvs[axis]
        pts = list(gre)
        pts[axis] = np.array([kv.knots[0] if idx == 0 else kv.knots[-1]])
        vals = np.array(_evaluate(g, pts))
        for k in range(len(pts)):
            if k != axis:
                vals = mode_product(vals, cinv[k], k)
        sl = [slice(None)] * len(pts)
        sl[axis] = slice(idx, idx + 1)
        U[tuple(sl)] = vals
    boundary = vec(U)
    if rhs is None:
        rhs = assemble_rhs(prob, f) if f is not None else np.zeros(prob.N_dof, complex)
    if not np.any(boundary):
        return Lifting(boundary, np.asarray(rhs, dtype=complex))
    A_full = full_operator or assemble_full_operator(prob)
    corr = restrict(prob, A_full @ boundary)
    return Lifting(boundary, np.asarray(rhs, dtype=complex) - corr)


# --------------------------------------------------------------------------
# ultraweak variant

def assemble_ultraweak(prob, f, u0=None, npts=None):
    """Operator and load of the ultraweak method on the final-condition space.

    Returns ``(A_uw, rhs)`` with ``A_uw[i,j] = (S B_j, S B_i)`` over ``X_{h,T}``
    and ``rhs_i = (f, B_i) + i (u0, B_i(., 0))``. The discrete solution is
    ``u_h = S z_h`` where ``z_h`` has the returned coefficients.
    """
    if prob.trial != "final":
        raise ValueError("the ultraweak method needs the final-condition space (trial='final')")
    A = assemble_system_operator(prob)
    rules = _quadrature_grids(prob, npts)
    pts = [r.points for r in rules]
    B0 = [basis_matrix(kv, x, 0)[k] for kv, x, k in zip(prob.kvs, pts, prob.index_sets)]
    F = _evaluate(f, pts) * _weights_tensor(rules)
    rhs = _contract(F, B0)
    if u0 is not None:
        ws = _weights_tensor(rules[1:])
        U0 = _evaluate(u0, pts[1:]) * ws
        s = U0
        for k, B in enumerate(B0[1:]):
            s = mode_product(s, B, k)
        bt0 = basis_matrix(prob.time_kv, [0.0], 0)[prob.index_sets[0]].toarray()[:, 0]
        rhs = rhs + 1j * np.multiply.outer(bt0, s)
    return A, vec(rhs)


# --------------------------------------------------------------------------
# evaluation of discrete functions

def evaluate_on_grid(prob, coeffs_full, points, which=("value",)):
    """Evaluate ``u_h`` given by full-space coefficients on a tensor grid.

    ``which`` selects among "value", "dt", "lap", "S" (``i dt - nu Δ``).
    Returns a dict of arrays of shape ``(len(t), len(x_1), ...)``.
    """
    C = unvec(np.asarray(coeffs_full, dtype=complex), prob.full_dims)
    kvs = prob.kvs
    need_d2 = any(w in ("lap", "S") for w in which)
    Bs = [[basis_matrix(kv, x, r).T.tocsr() for r in range(3 if (k and need_d2) else 2)]
          for k, (kv, x) in enumerate(zip(kvs, points))]
    out = {}
    base_t = mode_product(C, Bs[0][0], 0)
    val = base_t
    for k in range(1, prob.d + 1):
        val = mode_product(val, Bs[k][0], k)
    out["value"] = val
    if any(w in ("dt", "S") for w in which):
        dt = mode_product(C, Bs[0][1], 0)
        for k in range(1, prob.d + 1):
            dt = mode_product(dt, Bs[k][0], k)
        out["dt"] = dt
    if need_d2:
        lap = 0
        for l in range(1, prob.d + 1):
            G = base_t
            for k in range(1, prob.d + 1):
                G = mode_product(G, Bs[k][2 if k == l else 0], k)
            lap = lap + G
        out["lap"] = lap
        out["S"] = 1j * out["dt"] - prob.nu * lap
    return {w: out[w] for w in which}
