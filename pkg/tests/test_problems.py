import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from kronschro.assembly import SpaceTimeProblem, assemble_rhs, restrict
from kronschro.bspline import element_quadrature, make_open_knot_vector, basis_matrix
from kronschro.problems import (
    PROBLEMS,
    _exp_poly_integrals,
    check_consistency,
    gaussian_1d,
    high_mode_1d,
    oscillatory_moments,
    schrodinger_fd,
    traveling_wave,
    traveling_wave_2d,
    zero_solution,
)


def test_registry():
    assert set(PROBLEMS) == {"gaussian1d", "highmode1d", "wave2d"}


# Gaussian ---------------------------------------------------------------------

def test_gaussian_origin_value():
    assert gaussian_1d().u(0.0, 0.0) == pytest.approx(1.5)


def test_gaussian_load_matches_finite_differences():
    g = gaussian_1d()
    f = g.f(1.0, 0.5)
    fd = schrodinger_fd(g, np.array([1.0]), np.array([[0.5]]), h=1e-3)[0]
    assert abs(f - fd) <= 1e-6 * abs(f)


def test_gaussian_denominator_bounded_away_from_zero():
    t = np.linspace(0, 2, 1001)
    s = np.abs(1.5 ** 2 - 1j * 2.5 * t)
    assert s.min() == pytest.approx(2.25)
    assert np.argmin(s) == 0


def test_gaussian_symbolic_load():
    t, x = sympy.symbols("t x", real=True)
    a, b, c, nu = sympy.Rational(3, 2), sympy.Rational(3, 2), sympy.Rational(5, 2), sympy.Rational(1, 3)
    s = b ** 2 - sympy.I * c * t
    u = a * b / sympy.sqrt(s) * sympy.exp(-x ** 2 / s)
    f = sympy.I * sympy.diff(u, t) - nu * sympy.diff(u, x, 2)
    g = gaussian_1d(nu=1 / 3)
    fn = sympy.lambdify((t, x), f, "numpy")
    tt, xx = np.meshgrid(np.linspace(0, 2, 7), np.linspace(0, 1, 5), indexing="ij")
    np.testing.assert_allclose(g.f(tt, xx), fn(tt, xx), rtol=1e-12)


# traveling wave ---------------------------------------------------------------

def test_wave_amplitude():
    w = traveling_wave_2d()
    assert w.params["amplitude"] == pytest.approx(50 ** 0.25)
    assert w.params["amplitude"] == pytest.approx(2.6591, abs=1e-4)
    rng = np.random.default_rng(0)
    t, x, y = rng.uniform(0, 1, (3, 50))
    np.testing.assert_allclose(np.abs(w.u(t, x, y)), w.params["amplitude"], rtol=1e-14)


def test_wave_load_matches_finite_differences():
    w = traveling_wave_2d()
    f = w.f(0.3, 0.4, 0.7)
    fd = schrodinger_fd(w, np.array([0.3]), np.array([[0.4, 0.7]]), h=1e-4)[0]
    assert abs(f - fd) <= 1e-6 * abs(f)


def test_wave_load_reduces_to_reference_formula():
    # for nu = 1, d = 2: f = a (4i/ω² + 4|x|²/ω⁴ + 2t/ω²) u / a
    w = traveling_wave_2d()
    om = 0.2
    t, x, y = 0.45, 0.2, 0.9
    r2 = x * x + y * y
    ref = (4j / om ** 2 + 4 * r2 / om ** 4 + 2 * t / om ** 2) * w.u(t, x, y)
    assert w.f(t, x, y) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("d,nu", [(1, 1.0), (2, 0.5), (3, 2.0)])
def test_wave_consistency_any_dimension(d, nu):
    assert check_consistency(traveling_wave(d=d, nu=nu, omega=0.5), n=50) < 1e-6


# high-mode problem ------------------------------------------------------------

def test_high_mode_initial_value_vanishes():
    h = high_mode_1d()
    x = np.linspace(0, 1, 33)
    assert np.abs(h.u(np.zeros(1)[:, None], x[None, :])).max() == 0
    assert h.homogeneous and h.params["M"] == 625


def test_high_mode_termwise_identity():
    t, x = sympy.symbols("t x", real=True)
    for k in (1, 2, 7, 625):
        w2 = (k * sympy.pi) ** 2
        e = sympy.sqrt(2) * sympy.sin(k * sympy.pi * x)
        u = (-sympy.I * t / k) * sympy.exp(sympy.I * w2 * t) * e
        res = sympy.I * sympy.diff(u, t) - sympy.diff(u, x, 2) - sympy.exp(sympy.I * w2 * t) * e / k
        assert sympy.simplify(res) == 0


def test_eigenfunctions_are_normalized():
    rule = element_quadrature(make_open_knot_vector(1, 64), 12)
    x, w = rule.points, rule.flat_weights
    for k in range(1, 11):
        assert np.sum(w * 2 * np.sin(k * np.pi * x) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_high_mode_consistency_full_truncation():
    # high-precision central differences resolve frequencies up to (625π)²
    h = high_mode_1d()
    mpmath.mp.dps = 60
    M = 625
    pi = mpmath.pi

    def u(t, x):
        return mpmath.fsum((-1j * t / k) * mpmath.expj((k * pi) ** 2 * t)
                           * mpmath.sqrt(2) * mpmath.sin(k * pi * x) for k in range(1, M + 1))

    step = mpmath.mpf("1e-20")
    for t0, x0 in ((0.37, 0.41), (1.61, 0.83)):
        t, x = mpmath.mpf(t0), mpmath.mpf(x0)
        ut = (u(t + step, x) - u(t - step, x)) / (2 * step)
        uxx = (u(t, x + step) - 2 * u(t, x) + u(t, x - step)) / step ** 2
        fd = complex(1j * ut - uxx)
        f = complex(h.f(np.array([t0]), np.array([x0]))[0])
        assert abs(f - fd) <= 1e-8 * abs(f)
    mpmath.mp.dps = 15


def test_high_mode_double_precision_consistency_small_truncation():
    assert check_consistency(high_mode_1d(M=5), n=50) < 1e-6


def test_high_mode_moments_match_quadrature():
    h = high_mode_1d(M=6)
    prob = SpaceTimeProblem.uniform(1, 3, 4, T=2.0)
    mom = h.moments(prob)
    ref = assemble_rhs(prob, h.f, npts=40)
    np.testing.assert_allclose(mom.rhs, ref, atol=1e-11 * np.abs(ref).max())
    s = np.sum(1.0 / np.arange(1, 7) ** 2)
    assert mom.norm_u_sq == pytest.approx(8 / 3 * s)
    assert mom.norm_f_sq == pytest.approx(2 * s)
    # ‖u‖² against quadrature
    rules = [element_quadrature(kv, 40) for kv in prob.kvs]
    tt, xx = np.meshgrid(rules[0].points, rules[1].points, indexing="ij")
    W = np.outer(rules[0].flat_weights, rules[1].flat_weights)
    assert np.sum(W * np.abs(h.u(tt, xx)) ** 2) == pytest.approx(mom.norm_u_sq, rel=1e-10)


def test_high_mode_moments_restricted_to_dimension_one():
    with pytest.raises(ValueError):
        high_mode_1d(M=3).moments(SpaceTimeProblem.uniform(2, 2, 2))
    with pytest.raises(ValueError):
        high_mode_1d(M=0)


# oscillatory integrals --------------------------------------------------------

def test_exp_poly_integrals_branches_agree():
    theta = np.array([7.9, 8.0, 8.1, 50.0, -12.0])
    q = 4
    got = _exp_poly_integrals(theta, q)
    for i, th in enumerate(theta):
        for j in range(q + 1):
            ref = complex(mpmath.quad(lambda y: y ** j * mpmath.expj(th * y), [0, 1]))
            assert abs(got[i, j] - ref) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(p=st.integers(1, 5), n_el=st.integers(1, 6), sigma=st.floats(-300, 300),
       r=st.integers(0, 2), tpow=st.integers(0, 1))
def test_oscillatory_moments_against_quadrature(p, n_el, sigma, r, tpow):
    if r > p:
        return
    kv = make_open_knot_vector(p, n_el, 0, 1.5)
    rule = element_quadrature(kv, 120)
    x, w = rule.points, rule.flat_weights
    B = basis_matrix(kv, x, r).toarray()
    ref = B @ (w * x ** tpow * np.exp(1j * sigma * x))
    got = oscillatory_moments(kv, [sigma], r, tpow)[:, 0]
    np.testing.assert_allclose(got, ref, atol=1e-11)


def test_zero_solution():
    z = zero_solution(d=2)
    assert not np.any(z.u(np.ones(3), np.ones(3), np.ones(3)))
    prob = SpaceTimeProblem.uniform(2, 2, 2)
    assert not np.any(z.moments(prob).rhs)


@pytest.mark.parametrize("M", [3, 10, 40])
def test_truncation_increment_norm(M):
    # |f_{M+1} - f_M| = sqrt(T) / (M + 1)
    T = 2.0
    rt = element_quadrature(make_open_knot_vector(1, 8, 0, T), 12)
    rx = element_quadrature(make_open_knot_vector(1, 4 * (M + 1)), 12)
    tt, xx = np.meshgrid(rt.points, rx.points, indexing="ij")
    W = np.outer(rt.flat_weights, rx.flat_weights)
    diff = high_mode_1d(M + 1).f(tt, xx) - high_mode_1d(M).f(tt, xx)
    norm = np.sqrt(np.sum(W * np.abs(diff) ** 2))
    assert norm == pytest.approx(np.sqrt(T) / (M + 1), abs=1e-10)
