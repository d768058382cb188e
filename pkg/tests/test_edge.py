import numpy as np
import pytest
import sympy as sp
from scipy import integrate

from conecalc.errors import InadmissibleWeight, NoConvergence, NotPolynomialInSecondVariable
from conecalc.edge import (EdgeGridFunction, EdgeOperator, YGrid, apply_K, bracket, d_y,
                           edge_symbol, edge_symbol_apply, hs_norm, left_symbol_reduce,
                           multiplication_symbol, op_double, op_left, oscillatory_integral,
                           potential_symbol, right_symbol_reduce, right_to_left,
                           smoothing_mellin_symbol, symbol_vars, synth_singular,
                           twisted_homogeneity_check, ws_norm)
from conecalc.fuchs import FuchsOperator
from conecalc.mellin_core import BaseModel, RadialGrid, WeightedGridFunction, cutoff
from conecalc.spaces import weighted_l2
from conecalc.symbols import MeromorphicSymbol

LAMBDAS = (1.0, 2.0, 4.5)
ETAS = (1.0, 1.5, -2.0)


@pytest.fixture(scope="module")
def yg():
    return YGrid()


def edge_bump(yg, fg, base=None):
    fn = lambda Y, R: np.exp(-Y ** 2) * np.exp(-np.log(R) ** 2) * (1 + 0.3j * Y)
    if base is None:
        return EdgeGridFunction.from_function(yg, fg, fn)
    return EdgeGridFunction.from_function(yg, fg, fn, base)


def fiber_probes(fg):
    return [WeightedGridFunction(fg, np.exp(-3 * (fg.t - c) ** 2) * (1 + 0.2j * fg.t))
            for c in (-2.0, -1.5, -1.0)]


# -- spaces ---------------------------------------------------------------------

def test_bracket_variants():
    e = np.linspace(-3, 3, 601)
    for v in ("smooth", "alt"):
        b = bracket(e, v)
        assert np.all(b > 0) and np.allclose(b[np.abs(e) >= 1], np.abs(e[np.abs(e) >= 1]))
    assert bracket(0.0, "smooth") == 0.5


def test_ws_norm_s0_is_l2(yg, grid):
    for base in (None, BaseModel.circle(2)):
        u = edge_bump(yg, grid, base)
        assert abs(ws_norm(u, 0.0) - u.l2_norm()) < 1e-10 * u.l2_norm()
    assert ws_norm(edge_bump(yg, grid).replace(np.zeros((yg.Q, grid.M))), 1.0) == 0.0


def test_K_identity(yg, grid):
    # with g = 0 and gamma = 0 kappa is unitary on every fiber space and the
    # identity is trivial; a non-unitary action makes it bite
    b = edge_bump(yg, grid)
    u = EdgeGridFunction(yg, grid, b.values, b.base, 0.3, 0.5)
    for s, fs in ((0.0, 0.0), (1.5, 1.0), (3.0, 0.5)):
        a = ws_norm(u, s, fs)
        assert abs(a - hs_norm(apply_K(u, inverse=True), s, fs)) < 1e-9 * a
        assert abs(a - hs_norm(u, s, fs)) > 1e-3 * a


@pytest.mark.parametrize("Q", [256, 512])
def test_integer_s_derivatives(grid, Q):
    # sum_{k<=2} eta^(2k) <= <eta>^4 <= 2 sum_{k<=2} eta^(2k)
    yg = YGrid(2 * np.pi * 4, Q)
    u = edge_bump(yg, grid)
    a = ws_norm(u, 2.0)
    b = np.sqrt(sum(ws_norm(d_y(u, k), 0.0) ** 2 for k in range(3)))
    assert 1.0 - 1e-12 <= a / b <= np.sqrt(2) + 1e-12
    assert a / b <= 4


def test_d_y_inequality(yg, grid):
    u = edge_bump(yg, grid)
    for s in (1.0, 2.5):
        assert ws_norm(d_y(u), s - 1) <= ws_norm(u, s)


def test_synth_singular_constant_in_y(yg, grid):
    p, l, c = 0.2, 1, 1.7 - 0.4j
    u = synth_singular(np.full(yg.Q, c), p, l, yg, grid, gamma=-3.0)
    # only eta = 0 is present: the profile is taken at [0] = 1/2
    b0 = 0.5
    x = grid.r * b0
    prof = c * b0 ** 0.5 * cutoff(x) * x ** (-p) * np.log(x) ** l
    assert np.abs(u.values[:, :, 0] - prof[None, :]).max() < 1e-12 * np.abs(prof).max()
    assert not np.any(synth_singular(np.zeros(yg.Q), p, l, yg, grid, gamma=-3.0).values)
    with pytest.raises(ValueError):
        synth_singular(np.ones(yg.Q), 0.6, 0, yg, grid, gamma=0.0)


def test_synth_singular_bracket_difference(yg, grid):
    b = np.exp(-yg.y ** 2)
    us = synth_singular(b, 0.2, 0, yg, grid, gamma=-3.0)
    ua = synth_singular(b, 0.2, 0, yg, grid, gamma=-3.0, variant="alt")
    diff = us.replace(us.values - ua.values)
    d0 = ws_norm(diff, 0.0)
    assert d0 > 0
    # the difference lives on |eta| < 1, where <eta>^(2s) <= 2^s
    for s in (2, 4, 8):
        ds = ws_norm(diff, s)
        assert np.isfinite(ds) and ds <= 2 ** (s / 2) * d0 * (1 + 1e-12)
        assert np.isfinite(ws_norm(us, s))


# -- symbols ----------------------------------------------------------------------

def test_homogeneity_potential(fine_grid):
    a = potential_symbol(0.3, fine_grid, gamma=-4.0)
    assert twisted_homogeneity_check(a, LAMBDAS, ETAS, [1.0, 2 - 1j]) <= 1e-9


def test_homogeneity_multiplication(fine_grid):
    a = multiplication_symbol()
    assert twisted_homogeneity_check(a, LAMBDAS, ETAS, fiber_probes(fine_grid)) <= 1e-9


def test_homogeneity_smoothing(fine_grid):
    h = MeromorphicSymbol.scalar([0.0], poles=[(-4.0, [1.0])])
    a = smoothing_mellin_symbol(h, 2, 1, 1, 0.0, -0.5)
    assert a.order == 2
    assert twisted_homogeneity_check(a, LAMBDAS, ETAS, fiber_probes(fine_grid)) <= 1e-8
    with pytest.raises(InadmissibleWeight):
        smoothing_mellin_symbol(h, 2, 1, 0, 0.0, -1.5)
    with pytest.raises(InadmissibleWeight):
        smoothing_mellin_symbol(h, 2, 1, 0, 0.0, 0.2)


def test_homogeneity_edge_symbol(fine_grid):
    op = EdgeOperator(2, {(2, 0): 1.0, (0, 0): -0.49, (0, 2): 1.0, (1, 1): 0.3})
    assert twisted_homogeneity_check(edge_symbol(op), LAMBDAS, ETAS, fiber_probes(fine_grid)) <= 1e-7


def test_edge_symbol_identity(grid):
    u = WeightedGridFunction(grid, np.exp(-(grid.t + 0.5) ** 2))
    op = EdgeOperator(0, {(0, 0): 1.0}, mellin=MeromorphicSymbol.identity())
    out = edge_symbol_apply(op, 0.0, 1.3, u)
    on = cutoff(grid.r * 1.3) > 0
    assert np.abs(out.values[on] - u.values[on]).max() < 1e-12


def test_edge_symbol_matches_cone_operator(grid):
    # sigma_wedge of r^-2((-r d/dr)^2 - nu^2) at |eta| = 1 has no eta terms
    u = WeightedGridFunction(grid, np.exp(-(grid.t + 0.5) ** 2))
    op = EdgeOperator(2, {(2, 0): 1.0, (0, 0): -0.49})
    s = edge_symbol_apply(op, 0.0, 1.0, u)
    ref = FuchsOperator.euler(0.7).apply(u)
    d = s.values - ref.values
    d[:20] = d[-20:] = 0          # the finite-difference side zeroes its edge nodes
    assert weighted_l2(s.replace(d)) <= 1e-8 * weighted_l2(u)
    with pytest.raises(ValueError):
        edge_symbol_apply(op, 0.0, 0.0, u)


# -- oscillatory integrals --------------------------------------------------------

def test_os_gaussian():
    a = lambda x, xi: np.exp(-x ** 2 - xi ** 2)
    res = oscillatory_integral(a, x_extent=7.0, xi_extent=7.0)
    ref = integrate.dblquad(lambda xi, x: np.cos(x * xi) * np.exp(-x ** 2 - xi ** 2),
                            -9, 9, -9, 9, epsabs=1e-13, epsrel=1e-13)[0] / (2 * np.pi)
    assert abs(res.value - ref) <= 1e-8


def test_os_x_independent():
    # int exp(-i x xi) dx = 2 pi delta(xi): Os[a] = a(0)
    a = lambda x, xi: np.exp(-xi ** 2) * np.cos(xi) + 0 * x
    res = oscillatory_integral(a, xi_extent=7.0)
    assert abs(res.value - 1.0) <= 1e-8
    assert res.diagnostic <= 1e-8


def test_os_zero_and_budget():
    res = oscillatory_integral(lambda x, xi: 0 * x * xi, x_extent=4.0, xi_extent=4.0)
    assert res.value == 0
    with pytest.raises(NoConvergence):
        oscillatory_integral(lambda x, xi: np.exp(-xi ** 2) + 0 * x, budget=1e3)


# -- left and right symbols ----------------------------------------------------------

def test_left_symbol_trivial():
    y, yp, eta = symbol_vars()
    a = y * sp.exp(-eta ** 2)
    assert sp.simplify(left_symbol_reduce(a) - a) == 0


def test_left_symbol_linear_in_yp(yg):
    y, yp, eta = symbol_vars()
    b = sp.exp(-eta ** 2)
    a = (yp - y) * b
    aL = left_symbol_reduce(a)
    assert sp.simplify(aL - (-sp.I) * sp.diff(b, eta)) == 0
    u = np.exp(-yg.y ** 2)
    got = op_left(aL, u, yg)
    # eta integral in closed form: int exp(i s eta - eta^2) deta / 2pi = exp(-s^2/4) / (2 sqrt(pi))
    for i in (96, 128, 150):
        yi = yg.y[i]
        ref = integrate.quad(lambda s: (s - yi) * np.exp(-(yi - s) ** 2 / 4 - s ** 2), -12, 12,
                             epsabs=1e-14)[0] / (2 * np.sqrt(np.pi))
        assert abs(got[i] - ref) <= 1e-8
    assert np.abs(op_double(a, u, yg) - got).max() <= 1e-8


def test_right_left_consistency(yg):
    y, yp, eta = symbol_vars()
    for a in ((yp - y) * sp.exp(-eta ** 2), yp ** 2 * eta * sp.exp(-eta ** 2) + y * yp):
        aL = left_symbol_reduce(a)
        assert sp.simplify(right_to_left(right_symbol_reduce(a)) - aL) == 0
        u = np.exp(-yg.y ** 2)
        assert np.abs(op_double(a, u, yg) - op_left(aL, u, yg)).max() <= 1e-8


def test_not_polynomial():
    y, yp, eta = symbol_vars()
    with pytest.raises(NotPolynomialInSecondVariable):
        left_symbol_reduce(sp.exp(yp * eta))
