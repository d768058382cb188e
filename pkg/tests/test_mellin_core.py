import numpy as np
import pytest
from scipy import integrate, special

from conecalc.errors import GridMismatch, PoleOnWeightLine, WindowTruncation
from conecalc.mellin_core import (BaseModel, RadialGrid, WeightedGridFunction, cutoff, dilate,
                                  mellin_eval, mellin_forward, mellin_inverse, op_mellin)
from conecalc.symbols import MeromorphicSymbol


def bump(grid, c=0.0, a=1.0, base=None):
    vals = np.exp(-a * (grid.t - c) ** 2) * (1 + 0.3j * grid.t)
    if base is None:
        return WeightedGridFunction(grid, vals)
    return WeightedGridFunction(grid, np.outer(vals, 1 + np.arange(base.dim)), base)


def quad_mellin(fn, z, lo=-40.0, hi=5.0):
    # int r^(z-1) fn(r) dr in t = log r
    re = integrate.quad(lambda t: (np.exp(z * t) * fn(np.exp(t))).real, lo, hi, limit=400,
                        epsabs=1e-14, epsrel=1e-12)[0]
    im = integrate.quad(lambda t: (np.exp(z * t) * fn(np.exp(t))).imag, lo, hi, limit=400,
                        epsabs=1e-14, epsrel=1e-12)[0]
    return re + 1j * im


def test_grid_invariants():
    g = RadialGrid(5.0, 64)
    assert np.all(np.diff(g.r) > 0) and g.r[0] > 0
    assert np.allclose(g.rho, -g.rho[::-1])
    with pytest.raises(ValueError):
        RadialGrid(5.0, 100)
    with pytest.raises(ValueError):
        RadialGrid(-1.0, 64)


def test_cutoff_shape():
    r = np.linspace(0.01, 2, 400)
    w = cutoff(r)
    assert np.all(w[r <= 0.5] == 1) and np.all(w[r >= 2 / 3] == 0)
    assert np.all(np.diff(w) <= 1e-15)


def test_zero_in_zero_out(grid):
    z = WeightedGridFunction(grid, np.zeros(grid.M))
    s = mellin_forward(z, 0.5)
    assert not np.any(s.values)
    assert not np.any(mellin_inverse(s).values)


@pytest.mark.parametrize("c,a", [(0.0, 1.0), (-2.0, 0.6), (1.5, 3.0)])
def test_roundtrip(grid, c, a):
    u = bump(grid, c, a)
    back = mellin_inverse(mellin_forward(u, 0.5))
    assert np.linalg.norm(back.values - u.values) / np.linalg.norm(u.values) < 1e-12


def test_roundtrip_circle(grid):
    b = BaseModel.circle(3)
    u = bump(grid, base=b)
    back = mellin_inverse(mellin_forward(u, 1.0))
    w = np.exp(grid.t)[:, None]
    assert np.abs(w * (back.values - u.values)).max() < 1e-12 * np.abs(w * u.values).max()


def test_linearity(grid, rng):
    u, v = bump(grid, 0.5), bump(grid, -1.0, 2.0)
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    lhs = mellin_forward(u * a + v * b, 0.3).values
    rhs = a * mellin_forward(u, 0.3).values + b * mellin_forward(v, 0.3).values
    assert np.abs(lhs - rhs).max() < 1e-13 * np.abs(rhs).max()


def test_parseval(grid):
    u = bump(grid, 0.4, 1.3)
    beta = 0.7
    s = mellin_forward(u, beta)
    lhs = grid.dt * np.sum(np.abs(np.exp(beta * grid.t) * u.values[:, 0]) ** 2)
    rhs = grid.drho / (2 * np.pi) * np.sum(np.abs(s.values) ** 2)
    assert abs(lhs - rhs) / lhs < 1e-9


def test_forward_against_quadrature(grid):
    fn = lambda r: np.exp(-np.log(r) ** 2) * r ** 0.2
    u = WeightedGridFunction.from_function(grid, fn)
    s = mellin_forward(u, 0.5)
    for k in (grid.M // 2, grid.M // 2 + 7, grid.M // 2 - 31):
        ref = quad_mellin(fn, s.z[k], -12, 12)
        assert abs(s.values[k, 0] - ref) < 1e-10


def test_window_truncation(grid):
    u = WeightedGridFunction.from_function(grid, lambda r: np.exp(-r))
    with pytest.raises(WindowTruncation):
        mellin_forward(u, 0.5)


def test_inverse_grid_mismatch(grid):
    s = mellin_forward(bump(grid), 0.5)
    with pytest.raises(GridMismatch):
        mellin_inverse(s, RadialGrid(6.0, 4096))


def test_gamma_inverse_pair():
    g = RadialGrid(64.0, 16384)
    u = WeightedGridFunction.from_function(g, lambda r: np.exp(-r))
    s = mellin_forward(u, 0.5)
    back = mellin_inverse(s.replace(special.gamma(s.z)[:, None]))
    inner = (g.r > np.exp(-10)) & (g.r < 10)
    rel = np.abs(back.values[inner, 0] - np.exp(-g.r[inner])) / np.exp(-g.r[inner])
    assert rel.max() < 1e-6


def test_op_mellin_identity(grid):
    u = bump(grid)
    out = op_mellin(MeromorphicSymbol.identity(), 0.0, u)
    assert np.abs(out.values - u.values).max() < 1e-13


def test_op_mellin_z_is_euler_derivative(grid):
    u = bump(grid, 0.2, 1.5)
    out = op_mellin(lambda z: z, 0.0, u)
    # -r d/dr = -d/dt, checked with a centred fourth-order difference
    v, h = u.values[:, 0], grid.dt
    fd = -(v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    assert np.abs(out.values[2:-2, 0] - fd).max() < 1e-6


def test_op_mellin_pole_on_line(grid):
    f = MeromorphicSymbol.scalar([0.0], poles=[(0.5 + 2j, [1.0])])
    with pytest.raises(PoleOnWeightLine):
        op_mellin(f, 0.0, bump(grid))


def test_op_mellin_commutes_with_dilation(grid):
    u = bump(grid, 0.0, 2.0)
    f = MeromorphicSymbol.scalar([1.0, 0.5, 0.25])
    # the z^2 term lifts the roundoff floor at the window ends above 1e-12
    lhs = dilate(op_mellin(f, 0.0, u), 1.7, plain=True, tol=1e-9)
    rhs = op_mellin(f, 0.0, dilate(u, 1.7, plain=True))
    w = np.exp(0.5 * grid.t)[:, None]
    assert np.abs(w * (lhs.values - rhs.values)).max() < 1e-10 * np.abs(w * rhs.values).max()


def test_dilate_pointwise(grid):
    fn = lambda r: np.exp(-np.log(r) ** 2)
    u = WeightedGridFunction.from_function(grid, fn)
    d = dilate(u, 1.7, plain=True)
    assert np.abs(d.values[:, 0] - fn(1.7 * grid.r)).max() < 1e-12
    assert dilate(u, 1.0) is u


def test_group_law(grid):
    u = bump(grid, 0.3, 1.2)
    a = dilate(dilate(u, 1.6, 0.4), 0.7, 0.4)
    b = dilate(u, 1.6 * 0.7, 0.4)
    assert np.abs(a.values - b.values).max() < 1e-8 * np.abs(u.values).max()


def test_beta_independence(grid):
    # compactly supported away from 0: Mu is entire and both lines agree
    u = WeightedGridFunction(grid, cutoff(grid.r, 2.0, 3.0) * (1 - cutoff(grid.r, 0.3, 0.4)))
    z = np.array([0.9 + 0.5j, 0.2 - 1.0j])
    s1 = mellin_forward(u, 0.5)
    s2 = mellin_forward(u, 1.5)
    k = grid.M // 2 + 3
    assert abs(s1.values[k, 0] - mellin_eval(u, s1.z[k])[0]) < 1e-6
    assert abs(s2.values[k, 0] - mellin_eval(u, s2.z[k])[0]) < 1e-6
    assert np.all(np.isfinite(mellin_eval(u, z)))
