"""Edge spaces over a one-dimensional edge, operator-valued symbols, and
scalar oscillatory integrals.

Functions of (y, r, x) live on a periodic y-window of period L (Q nodes)
times the radial log grid.  The y-Fourier transform is

    u^(eta_j) = (L/Q) sum_i u(y_i) exp(-i eta_j (y_i - y_0)),  eta_j = 2 pi j / L,

so that int |u|^2 dy = (1/L) sum_j |u^(eta_j)|^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft as spfft

from .errors import (GridMismatch, InadmissibleWeight, NoConvergence,
                     NotPolynomialInSecondVariable, WindowTruncation)
from .mellin_core import (BOUNDARY_TOL, POINT, BaseModel, RadialGrid,
                          WeightedGridFunction, cutoff, dilate, mellin_forward,
                          mellin_inverse, op_mellin, _workers)
from .spaces import hs_gamma_norm, weighted_l2

# [eta] = even polynomial on |eta| < 1 matched to |eta| up to the third
# derivative at |eta| = 1; the value at 0 selects the variant
_BRACKETS = {
    "smooth": (0.5, 0.1875, 0.8125, -0.6875, 0.1875),
    "alt": (0.75, -0.8125, 2.3125, -1.6875, 0.4375),
}

OMEGA = (0.5, 2.0 / 3.0)        # omega
OMEGA_WIDE = (0.75, 1.0)        # omega' = 1 on supp omega
OMEGA_NARROW = (0.25, 0.4)      # omega'' with 1 - omega'' = 1 on supp(1 - omega)


def bracket(eta, variant="smooth"):
    """Smooth positive [eta], equal to |eta| for |eta| >= 1."""
    c = _BRACKETS[variant]
    e = np.abs(np.asarray(eta, float))
    inner = sum(ci * e ** (2 * i) for i, ci in enumerate(c))
    return np.where(e >= 1, e, inner)


def japanese(eta):
    return np.sqrt(1.0 + np.asarray(eta, float) ** 2)


# ---------------------------------------------------------------------------
# grids and functions

@dataclass(frozen=True)
class YGrid:
    L: float = 2 * np.pi * 4
    Q: int = 256

    def __post_init__(self):
        if self.Q < 2 or self.Q & (self.Q - 1):
            raise ValueError("Q must be a power of two")
        if not self.L > 0:
            raise ValueError("period must be positive")

    @property
    def dy(self):
        return self.L / self.Q

    @property
    def y(self):
        return -self.L / 2 + self.dy * np.arange(self.Q)

    @property
    def eta(self):
        return 2 * np.pi * spfft.fftfreq(self.Q, d=self.dy)


@dataclass(frozen=True, eq=False)
class EdgeGridFunction:
    """values[i_y, i_r, k]: fiber samples at every y node, one layout for all y."""
    ygrid: YGrid
    fiber: RadialGrid
    values: np.ndarray
    base: BaseModel = POINT
    gamma: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, complex)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.shape != (self.ygrid.Q, self.fiber.M, self.base.dim):
            raise GridMismatch(f"values of shape {v.shape} do not match the grids")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, ygrid, fiber, fn, base=POINT, gamma=0.0, g=0.0):
        """fn(y, r) on the (Q, M) mesh, broadcast to all modes if scalar."""
        Y, R = np.meshgrid(ygrid.y, fiber.r, indexing="ij")
        v = np.asarray(fn(Y, R), complex)
        if v.ndim == 2:
            v = np.repeat(v[:, :, None], base.dim, axis=2)
        return cls(ygrid, fiber, v, base, gamma, g)

    def replace(self, values):
        return EdgeGridFunction(self.ygrid, self.fiber, values, self.base, self.gamma, self.g)

    def slice(self, i):
        return WeightedGridFunction(self.fiber, self.values[i], self.base, self.gamma)

    def hat(self):
        return self.ygrid.dy * spfft.fft(self.values, axis=0, workers=_workers())

    @classmethod
    def from_hat(cls, like, vhat):
        v = spfft.ifft(vhat, axis=0, workers=_workers()) / like.ygrid.dy
        return like.replace(v)

    def l2_norm(self):
        """Plain L^2 norm over (y, r, x) with the weight of the fiber."""
        beta = (self.base.n + 1) / 2 - self.gamma
        w = np.exp(2 * beta * self.fiber.t)[None, :, None]
        tot = (np.abs(self.values) ** 2 * w).sum(axis=(0, 1)) @ np.full(self.base.dim, self.base.weight)
        return float(np.sqrt(self.ygrid.dy * self.fiber.dt * tot))


def d_y(u: EdgeGridFunction, order=1):
    """D_y^order with D = -i d/dy (Fourier multiplier eta^order)."""
    eta = u.ygrid.eta
    return EdgeGridFunction.from_hat(u, u.hat() * (eta ** order)[:, None, None])


def _slices(u, vhat, lam_of_eta, tol):
    """kappa_{lam(eta_j)}^(-1) of every y-Fourier slice, as a list of grid functions.

    The window check is made against the largest weighted sample over all
    slices, so that slices at roundoff level do not trip it.
    """
    peak = np.abs(vhat).max(initial=0.0)
    out = []
    beta = (u.base.n + 1) / 2 - u.gamma
    wt = np.exp(beta * u.fiber.t)[:, None]
    top, edge = 0.0, 0.0
    for j, eta in enumerate(u.ygrid.eta):
        sl = vhat[j]
        if peak == 0 or np.abs(sl).max() <= 1e-14 * peak:
            out.append(None)
            continue
        w = WeightedGridFunction(u.fiber, sl, u.base, u.gamma)
        for f in (w, dilate(w, 1.0 / lam_of_eta(eta), u.g, tol=None)):
            a = np.abs(f.values * wt)
            top = max(top, a.max())
            edge = max(edge, a[:4].max(), a[-4:].max())
        out.append(f)
    if tol is not None and top > 0 and edge > max(tol, 1e3 * tol) * top:
        raise WindowTruncation(f"dilated fiber slices reach the window ends ({edge / top:.2e} of the peak)")
    return out


def ws_norm(u: EdgeGridFunction, s=0.0, fiber_s=0.0, tol=BOUNDARY_TOL):
    """{ (1/L) sum_j <eta_j>^(2s) || kappa_<eta_j>^(-1) u^(eta_j) ||_H^2 }^(1/2).

    H is the weighted Mellin space of order fiber_s and weight u.gamma.
    """
    if not np.any(u.values):
        return 0.0
    vhat = u.hat()
    parts = _slices(u, vhat, japanese, tol)
    tot = 0.0
    for eta, w in zip(u.ygrid.eta, parts):
        if w is None:
            continue
        tot += japanese(eta) ** (2 * s) * hs_gamma_norm(w, fiber_s, u.gamma, tol=None) ** 2
    return float(np.sqrt(tot / u.ygrid.L))


def hs_norm(u: EdgeGridFunction, s=0.0, fiber_s=0.0):
    """Plain H^s(R, H) norm: no group action in the fiber."""
    vhat = u.hat()
    tot = 0.0
    for j, eta in enumerate(u.ygrid.eta):
        if not np.any(vhat[j]):
            continue
        w = WeightedGridFunction(u.fiber, vhat[j], u.base, u.gamma)
        tot += japanese(eta) ** (2 * s) * hs_gamma_norm(w, fiber_s, u.gamma, tol=None) ** 2
    return float(np.sqrt(tot / u.ygrid.L))


def apply_K(u: EdgeGridFunction, inverse=False, tol=BOUNDARY_TOL):
    """K = F^(-1) kappa_<eta> F (or its inverse)."""
    vhat = u.hat()
    lam = (lambda e: japanese(e)) if inverse else (lambda e: 1.0 / japanese(e))
    parts = _slices(u, vhat, lam, tol)
    out = np.zeros_like(vhat)
    for j, w in enumerate(parts):
        if w is not None:
            out[j] = w.values
    return EdgeGridFunction.from_hat(u, out)


def action_ratio(u: EdgeGridFunction, s, g_a, g_b, fiber_s=0.0):
    """ws_norm with group action exponent g_a over the one with g_b."""
    ua = EdgeGridFunction(u.ygrid, u.fiber, u.values, u.base, u.gamma, g_a)
    ub = EdgeGridFunction(u.ygrid, u.fiber, u.values, u.base, u.gamma, g_b)
    return ws_norm(ua, s, fiber_s) / ws_norm(ub, s, fiber_s)


# ---------------------------------------------------------------------------
# edge singular functions

def _singular_profile(r, br, p, l, n):
    x = r * br
    return br ** ((n + 1) / 2) * cutoff(x, *OMEGA) * x ** (-p) * np.log(x) ** l


def synth_singular(b, p, l, ygrid: YGrid, fiber: RadialGrid, base=POINT, gamma=0.0,
                   variant="smooth"):
    """F^(-1){ [eta]^((n+1)/2) omega(r[eta]) b^(x, eta) (r[eta])^(-p) log^l(r[eta]) }.

    b is an array (Q, dim) of values b(y) per base mode, or a callable of y.
    """
    n = base.n
    if not complex(p).real < (n + 1) / 2 - gamma:
        raise ValueError("need Re p < (n+1)/2 - gamma")
    bv = b(ygrid.y) if callable(b) else b
    bv = np.asarray(bv, complex)
    if bv.ndim == 1:
        bv = np.repeat(bv[:, None], base.dim, axis=1)
    bhat = ygrid.dy * spfft.fft(bv, axis=0)
    out = np.zeros((ygrid.Q, fiber.M, base.dim), complex)
    for j, eta in enumerate(ygrid.eta):
        if not np.any(bhat[j]):
            continue
        prof = _singular_profile(fiber.r, float(bracket(eta, variant)), p, l, n)
        out[j] = np.outer(prof, bhat[j])
    like = EdgeGridFunction(ygrid, fiber, out, base, gamma)
    return EdgeGridFunction.from_hat(like, out)


# ---------------------------------------------------------------------------
# operator-valued symbols

@dataclass(eq=False)
class OperatorValuedSymbol:
    """a(eta) acting on fiber functions (or on C^d for potential symbols).

    apply(eta, v) returns a WeightedGridFunction.  g_in/g_out are the
    group-action exponents of kappa and kappa~; beta_in/beta_out override
    the weight line used to dilate (None: the function's own weight).
    """
    order: float
    kind: str
    apply: Callable
    gamma_in: float = 0.0
    gamma_out: float = 0.0
    g_in: float = 0.0
    g_out: float = 0.0
    beta_in: float | None = None
    beta_out: float | None = None
    scalar_input: bool = False
    info: dict = field(default_factory=dict)

    def __call__(self, eta, v):
        return self.apply(eta, v)


def potential_symbol(p, fiber: RadialGrid, base=POINT, gamma=0.0, variant="smooth",
                     beta_out=None):
    """c -> [eta]^((n+1)/2) omega(r[eta]) (r[eta])^(-p) c, order 0.

    Dilating r^-p on the window needs (n+1)/2 - gamma well to the right of
    Re p (about 30/T), so gamma is usually strongly negative here.
    """
    n = base.n

    def apply(eta, c):
        c = np.broadcast_to(np.asarray(c, complex), (base.dim,))
        prof = _singular_profile(fiber.r, float(bracket(eta, variant)), p, 0, n)
        return WeightedGridFunction(fiber, np.outer(prof, c), base, gamma)

    return OperatorValuedSymbol(0.0, "potential", apply, gamma_out=gamma, beta_out=beta_out,
                                scalar_input=True, info={"p": p})


def multiplication_symbol(phi=None, variant="smooth", gamma=0.0):
    """v -> phi(r[eta]) v, order 0 (phi defaults to the cut-off omega)."""
    phi = (lambda x: cutoff(x, *OMEGA)) if phi is None else phi

    def apply(eta, v):
        return v.multiply(phi(v.grid.r * float(bracket(eta, variant))))

    return OperatorValuedSymbol(0.0, "multiplication", apply, gamma, gamma)


def _check_smoothing_weight(gamma, j, gamma_j):
    if not (gamma - j - 1e-12 <= gamma_j <= gamma + 1e-12):
        raise InadmissibleWeight(f"need gamma - {j} <= gamma_j <= gamma, got gamma_j = {gamma_j}")


def smoothing_mellin_symbol(h, mu, j, alpha, gamma, gamma_j, variant="smooth"):
    """omega(r[eta]) r^(-mu+j) op_M(h) eta^alpha omega~(r[eta]), order mu - j + alpha.

    op_M integrates along Re z = (n+1)/2 - gamma_j;  gamma - j <= gamma_j <= gamma.
    """
    _check_smoothing_weight(gamma, j, gamma_j)
    if alpha > j:
        raise ValueError("smoothing Mellin terms need alpha <= j")

    def apply(eta, v):
        br = float(bracket(eta, variant))
        r = v.grid.r
        w = v.multiply(cutoff(r * br, *OMEGA_WIDE))
        w = op_mellin(h, gamma_j, w.replace(gamma=gamma_j))
        w = w.multiply(cutoff(r * br, *OMEGA) * r ** (-mu + j) * eta ** alpha)
        return w.replace(gamma=gamma - mu)

    return OperatorValuedSymbol(mu - j + alpha, "smoothing-mellin", apply, gamma, gamma - mu,
                                info={"j": j, "alpha": alpha, "gamma_j": gamma_j})


@dataclass(frozen=True, eq=False)
class EdgeOperator:
    """r^(-mu) sum a_{j,alpha}(y) (-r d/dr)^j (r D_y)^alpha  plus smoothing Mellin terms.

    terms maps (j, alpha) to a scalar, a (d, d) matrix, or a callable of y;
    mellin, if given, replaces the alpha = 0 part near the tip by
    op_M(mellin) on the weight line; smoothing is a list of
    (j, alpha, h, gamma_j).
    """
    mu: int
    terms: dict
    base: BaseModel = POINT
    mellin: object = None
    smoothing: tuple = ()

    def __post_init__(self):
        for (j, a) in self.terms:
            if j < 0 or a < 0 or j + a > self.mu:
                raise ValueError(f"term {(j, a)} exceeds the order {self.mu}")

    def coeff(self, key, y):
        c = self.terms[key]
        c = c(y) if callable(c) else c
        c = np.asarray(c, complex)
        return c * np.eye(self.base.dim) if c.ndim == 0 else c


def _euler_powers(w: WeightedGridFunction, jmax, tol):
    """[(-r d/dr)^j w for j = 0..jmax] through one Mellin transform."""
    if jmax == 0:
        return [w]
    beta = (w.n + 1) / 2 - w.gamma
    s = mellin_forward(w, beta, tol)
    return [w] + [mellin_inverse(s.replace(s.values * (s.z ** j)[:, None])) for j in range(1, jmax + 1)]


def _differential_part(op: EdgeOperator, y, eta, v, skip_alpha0=False, tol=BOUNDARY_TOL):
    """r^(-mu) sum a eta^alpha (-r d/dr)^j (r^alpha v), derivatives taken spectrally."""
    r = v.grid.r
    out = np.zeros_like(v.values)
    for a in sorted({a for (_, a) in op.terms}):
        if skip_alpha0 and a == 0:
            continue
        js = [j for (j, aa) in op.terms if aa == a]
        w = v.multiply(r ** a).replace(gamma=v.gamma + a)
        pw = _euler_powers(w, max(js), tol)
        for j in js:
            out += (eta ** a) * (pw[j].values @ op.coeff((j, a), y).T)
    return v.replace(out * (r ** (-float(op.mu)))[:, None], gamma=v.gamma - op.mu)


def edge_symbol_apply(op: EdgeOperator, y, eta, u: WeightedGridFunction, tol=BOUNDARY_TOL):
    """Homogeneous principal edge symbol sigma_wedge(op)(y, eta) applied to u.

    omega(r|eta|) r^(-mu) op_M(h) omega'(r|eta|) + (1 - omega) P(eta) (1 - omega''),
    with P the differential edge symbol and h its conormal part (or op.mellin).
    For purely differential operators the two pieces recombine to P(eta) u.
    """
    if eta == 0:
        raise ValueError("the principal edge symbol lives on eta != 0")
    if u.base != op.base:
        raise GridMismatch("operator and function live on different base models")
    r = u.grid.r
    e = abs(eta)
    gamma = u.gamma
    for (j, a, h, gj) in op.smoothing:
        _check_smoothing_weight(gamma, j, gj)
    if op.mellin is None:
        # a differential operator is local: the cut-off pieces recombine to
        # P(eta) u, which is evaluated directly to avoid the cut-offs' spectrum
        res = _differential_part(op, y, eta, u, tol=tol).values
    else:
        near = u.multiply(cutoff(r * e, *OMEGA_WIDE))
        far = u.multiply(1 - cutoff(r * e, *OMEGA_NARROW))
        # the alpha = 0 part near the tip is the Mellin operator on the weight line
        m = op_mellin(op.mellin, gamma, near).values * (r ** (-float(op.mu)))[:, None]
        inner = m + _differential_part(op, y, eta, near, skip_alpha0=True, tol=tol).values
        outer = _differential_part(op, y, eta, far, tol=tol).values
        om = cutoff(r * e, *OMEGA)[:, None]
        res = om * inner + (1 - om) * outer
    for (j, a, h, gj) in op.smoothing:
        t = smoothing_mellin_symbol(h, op.mu, j, a, gamma, gj, "smooth")
        res = res + t.apply(eta, u).values
    return u.replace(res, gamma=gamma - op.mu)


def edge_symbol(op: EdgeOperator, y=0.0, gamma=0.0):
    """sigma_wedge(op)(y, .) as an OperatorValuedSymbol of order mu."""
    return OperatorValuedSymbol(float(op.mu), "principal-edge",
                                lambda eta, v: edge_symbol_apply(op, y, eta, v),
                                gamma, gamma - op.mu)


def twisted_homogeneity_check(a: OperatorValuedSymbol, lambdas, etas, probes, tol=1e-9,
                              out_tol=1e-6):
    """max || a(l eta) v - l^mu kappa~_l a(eta) kappa_l^(-1) v || / ||v||.

    The window checks inside the dilations are looser than the module
    default: cut-off symbols shrink the peak of a(eta) v while its tails stay
    put, and spectral derivatives lift the roundoff floor at the window ends
    by about rho_max^mu (out_tol applies to a(eta) kappa^(-1) v).
    """
    worst = 0.0
    for lam in lambdas:
        for eta in etas:
            for v in probes:
                if a.scalar_input:
                    vin = v
                    vnorm = float(np.linalg.norm(np.atleast_1d(v)))
                else:
                    vin = dilate(v, 1.0 / lam, a.g_in, beta=a.beta_in, tol=tol)
                    vnorm = weighted_l2(v, a.gamma_in)
                lhs = a.apply(lam * eta, v)
                mid = a.apply(eta, vin)
                rhs = dilate(mid, lam, a.g_out, beta=a.beta_out, tol=out_tol)
                diff = lhs.replace(lhs.values - lam ** a.order * rhs.values)
                worst = max(worst, weighted_l2(diff, a.gamma_out) / vnorm)
    return worst


# ---------------------------------------------------------------------------
# oscillatory integrals

@dataclass
class OscResult:
    value: complex
    diagnostic: float
    epsilons: list
    values: list
    evaluations: int


def _gauss_reg(x, xi):
    return np.exp(-x ** 2 - xi ** 2)


def _regularised(a, chi, eps, x_extent, xi_extent, c, chunk=1 << 22):
    X = min(x_extent, c / eps)
    Xi = min(xi_extent, c / eps)
    dx = np.pi / (2 * Xi)
    dxi = np.pi / (2 * X)
    nx = int(np.ceil(X / dx))
    nxi = int(np.ceil(Xi / dxi))
    x = dx * np.arange(-nx, nx + 1)
    xi = dxi * np.arange(-nxi, nxi + 1)
    rows = max(1, chunk // len(x))
    tot = 0.0 + 0.0j
    for s in range(0, len(xi), rows):
        XI = xi[s:s + rows, None]
        tot += np.sum(np.exp(-1j * x[None, :] * XI) * chi(eps * x[None, :], eps * XI)
                      * a(x[None, :], XI))
    return tot * dx * dxi / (2 * np.pi), len(x) * len(xi)


def _cost(eps, x_extent, xi_extent, c):
    X = min(x_extent, c / eps)
    Xi = min(xi_extent, c / eps)
    return (2 * np.ceil(X * 2 * Xi / np.pi) + 1) ** 2


def oscillatory_integral(a, chi=None, epsilons=None, x_extent=np.inf, xi_extent=np.inf,
                         budget=4e7, tol=1e-8, c=6.5, levels=5):
    """Os[a] = lim int int exp(-i x xi) chi(eps x, eps xi) a(x, xi) dx dxi / 2pi.

    Trapezoid sums on boxes fitted to the regulariser (and to the amplitude
    extents when given), then Romberg extrapolation in eps^2 over the
    `levels` smallest affordable eps.  The residual is the gap between the
    last two entries of the final tableau column.
    """
    chi = _gauss_reg if chi is None else chi
    eps_all = [2.0 ** -k for k in range(2, 11)] if epsilons is None else list(epsilons)
    usable = [e for e in eps_all if _cost(e, x_extent, xi_extent, c) <= budget]
    if len(usable) < max(3, levels):
        raise NoConvergence("too few regularisation levels fit the evaluation budget")
    vals, evals = [], 0
    for e in usable:
        v, k = _regularised(a, chi, e, x_extent, xi_extent, c)
        vals.append(v)
        evals += k
    e = np.array(usable[-levels:])
    h = e ** 2
    # Romberg tableau in eps^2 (steps need not be halvings)
    T = [[v] for v in vals[-levels:]]
    for i in range(1, len(T)):
        for k in range(1, i + 1):
            T[i].append((h[i - k] * T[i][k - 1] - h[i] * T[i - 1][k - 1]) / (h[i - k] - h[i]))
    R2, prev = T[-1][-1], T[-1][-2]
    diag = float(abs(R2 - prev))
    scale = max(1.0, abs(R2))
    if diag > tol * scale:
        raise NoConvergence(f"extrapolation residual {diag:.2e} above {tol:.1e}")
    return OscResult(complex(R2), diag, usable, vals, evals)


# ---------------------------------------------------------------------------
# left / right symbols of double symbols polynomial in y'

def _sym():
    import sympy
    return sympy


def symbol_vars():
    sp = _sym()
    return sp.symbols("y y_p eta", real=True)


def _poly_in(expr, var):
    sp = _sym()
    try:
        poly = sp.Poly(sp.expand(expr), var)
    except sp.PolynomialError as exc:
        raise NotPolynomialInSecondVariable(str(exc)) from exc
    return poly


def left_symbol_reduce(a):
    """a_L(y, eta) = sum_k (1/k!) d_eta^k D_y'^k a |_{y'=y}, D = -i d."""
    sp = _sym()
    y, yp, eta = symbol_vars()
    poly = _poly_in(a, yp)
    out = 0
    for k in range(poly.degree() + 1):
        term = sp.diff(a, yp, k) * (-sp.I) ** k
        out += sp.diff(term, eta, k) / sp.factorial(k)
    return sp.simplify(out.subs(yp, y))


def right_symbol_reduce(a):
    """a_R(y', eta) = sum_k (1/k!) (-d_eta)^k D_y^k a |_{y=y'}."""
    sp = _sym()
    y, yp, eta = symbol_vars()
    poly = _poly_in(a, y)
    out = 0
    for k in range(poly.degree() + 1):
        term = sp.diff(a, y, k) * (-sp.I) ** k
        out += (-1) ** k * sp.diff(term, eta, k) / sp.factorial(k)
    return sp.simplify(out.subs(y, yp))


def right_to_left(aR):
    """Left symbol of the operator with right symbol aR(y', eta)."""
    return left_symbol_reduce(aR)


def _lambdify(expr):
    sp = _sym()
    y, yp, eta = symbol_vars()
    f = sp.lambdify((y, yp, eta), expr, "numpy")
    return lambda Y, YP, E: np.broadcast_to(np.asarray(f(Y, YP, E), complex),
                                            np.broadcast(Y, YP, E).shape)


def op_double(a, u, ygrid: YGrid):
    """Op(a)u(y) = int int exp(i(y-y')eta) a(y, y', eta) u(y') dy' deta/2pi.

    a must be polynomial in y': a = sum_m y'^m c_m(y, eta); each y'^m u is
    transformed on the periodic window and the eta integral is a direct sum.
    """
    y, yp, eta = symbol_vars()
    poly = _poly_in(a, yp)
    Y = ygrid.y
    E = np.fft.fftshift(ygrid.eta)
    deta = 2 * np.pi / ygrid.L
    u = np.asarray(u, complex)
    out = np.zeros(ygrid.Q, complex)
    for (m,), cm in zip(poly.monoms(), poly.coeffs()):
        uh = np.fft.fftshift(ygrid.dy * np.fft.fft(Y ** m * u * np.exp(0j))
                             * np.exp(-1j * ygrid.eta * Y[0]))
        C = _lambdify(cm)(Y[:, None], 0.0 * Y[:, None], E[None, :])
        out += (np.exp(1j * Y[:, None] * E[None, :]) * C) @ uh
    return out * deta / (2 * np.pi)


def op_left(aL, u, ygrid: YGrid):
    """Op(a_L)u(y) = int exp(i y eta) a_L(y, eta) u^(eta) deta/2pi."""
    sp = _sym()
    y, yp, eta = symbol_vars()
    if sp.sympify(aL).has(yp):
        raise ValueError("a left symbol may not depend on y'")
    return op_double(aL, u, ygrid)
