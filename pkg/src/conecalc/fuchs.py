"""Fuchs-type operators r^(-mu) sum_j a_j(r) (-r d/dr)^j on the model cone.

Sign convention: M((-r d/dr) u)(z) = z Mu(z), so the conormal symbol of
r^(-mu) sum_j a_j (-r d/dr)^j is h(z) = sum_j a_j(0) z^j and
h(p) r^(-p) is the action on r^(-p).  A cheap self-test at import asserts it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from scipy import linalg, special

from .asymptotics import DiscreteAsymptoticType, WeightData
from .errors import (DepthExceedsTaylor, IntermediateLineHitsRoot, NoConvergence,
                     NotElliptic, PoleTooCloseToTargetLine, ResidualTooLarge,
                     WindowTruncation)
from .mellin_core import (POINT, BaseModel, RadialGrid, WeightedGridFunction,
                          boundary_ratio, check_window, cutoff, cutoff_derivative, inverse_weighted, mellin_eval,
                          mellin_forward, op_mellin, pad_values,
                          padded_grid, restrict_values, SpectralFunction)
from .symbols import (ConormalSequence, MeromorphicSymbol, laurent_extract,
                      locate_singularities)

EPS_MARGIN = 1e-3
MAX_PADDED_M = 2 ** 21
FD_ORDER = 8


# ---------------------------------------------------------------------------
# finite differences on the log grid

def fd_weights(m, order=FD_ORDER):
    """Central weights (in units of dt^-m) for d^m/dt^m with the given accuracy."""
    q = order // 2 + (m - 1) // 2
    offs = np.arange(-q, q + 1)
    V = np.vander(offs, increasing=True).T.astype(float)
    rhs = np.zeros(2 * q + 1)
    rhs[m] = factorial(m)
    return offs, np.linalg.solve(V, rhs)


def diff_t(values, m, dt, order=FD_ORDER):
    """m-th t-derivative along axis 0; the q edge nodes on each side are left at 0."""
    values = np.asarray(values)
    if m == 0:
        return values.copy()
    offs, w = fd_weights(m, order)
    q = offs[-1]
    M = len(values)
    out = np.zeros_like(values, dtype=complex)
    for o, c in zip(offs, w):
        out[q:M - q] += c * values[q + o:M - q + o]
    return out / dt ** m


def fd_margin(mu, order=FD_ORDER):
    return order // 2 + (max(mu, 1) - 1) // 2


def euler_d(values, j, dt):
    """(-r d/dr)^j = (-d/dt)^j on samples."""
    return (-1) ** j * diff_t(values, j, dt)


# ---------------------------------------------------------------------------
# circle operators

def circle_matrix(N, terms):
    """Fourier matrix of sum_m c_m(x) d^m/dx^m on modes -N..N.

    terms = {m: {q: c}} with c_m(x) = sum_q c exp(iqx).  Coefficients of
    trig degree above N are rejected rather than aliased.
    """
    d = 2 * N + 1
    k = np.arange(-N, N + 1)
    A = np.zeros((d, d), complex)
    for m, trig in terms.items():
        for q, c in trig.items():
            if abs(q) > N:
                raise ValueError(f"trig degree {q} exceeds the truncation N = {N}")
            for col, kk in enumerate(k):
                row = col + q
                if 0 <= row < d:
                    A[row, col] += c * (1j * kk) ** m
    return A


# ---------------------------------------------------------------------------
# operators

@dataclass(frozen=True, eq=False)
class FuchsOperator:
    """A = r^(-mu) sum_{j<=mu} sum_l a[j, l] r^l (-r d/dr)^j.

    a has shape (mu+1, k_taylor+1, d, d).  circle_terms, when given, holds
    the differential operators on S^1 behind a[j, l] ({m: {q: c}}) and is
    used for the interior principal symbol.
    """
    mu: int
    a: np.ndarray
    base: BaseModel = POINT
    circle_terms: tuple | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        if a.ndim == 2:
            a = a[:, :, None, None]
        if a.shape[0] != self.mu + 1:
            raise ValueError("need coefficients a_j for j = 0..mu")
        if a.shape[2:] != (self.base.dim, self.base.dim):
            raise ValueError("coefficient matrices do not match the base model")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def k_taylor(self):
        return self.a.shape[1] - 1

    @property
    def dim(self):
        return self.base.dim

    def h(self, l=0):
        """Conormal level l: z -> sum_j a[j, l] z^j."""
        if l > self.k_taylor:
            return MeromorphicSymbol.zero(self.dim, self.base)
        return MeromorphicSymbol(self.a[:, l], (), float(self.mu - l), self.base).pruned()

    @property
    def conormal_symbol(self):
        return self.h(0)

    def truncated(self, k):
        return FuchsOperator(self.mu, self.a[:, :k + 1], self.base, self.circle_terms)

    # -- constructors -------------------------------------------------------
    @classmethod
    def scalar(cls, mu, coeffs):
        """coeffs[j] = Taylor coefficients [a_j0, a_j1, ...] of a_j(r)."""
        K = max(len(c) for c in coeffs)
        a = np.zeros((mu + 1, K), complex)
        for j, c in enumerate(coeffs):
            a[j, :len(c)] = c
        return cls(mu, a)

    @classmethod
    def on_circle(cls, mu, N, terms):
        """terms[j][l] = {m: {q: c}}: a_j(r) = sum_l r^l sum_m c_m(x) d^m/dx^m."""
        base = BaseModel.circle(N)
        K = max(len(t) for t in terms)
        a = np.zeros((mu + 1, K, base.dim, base.dim), complex)
        for j, tl in enumerate(terms):
            for l, op in enumerate(tl):
                for m in op:
                    if m > mu - j:
                        raise ValueError(f"a_{j} must have order <= {mu - j} on the circle")
                a[j, l] = circle_matrix(N, op)
        frozen = tuple(tuple(dict(op) for op in tl) for tl in terms)
        return cls(mu, a, base, frozen)

    @classmethod
    def identity(cls, base=POINT):
        return cls(0, np.eye(base.dim)[None, None], base,
                   None if base.kind == "point" else (({0: {0: 1.0}},),))

    @classmethod
    def euler(cls, nu, base=POINT):
        """r^(-2) ((-r d/dr)^2 - nu^2)."""
        if base.kind == "point":
            return cls.scalar(2, [[-nu ** 2], [0.0], [1.0]])
        return cls.on_circle(2, base.N, [[{0: {0: -nu ** 2}}], [{}], [{0: {0: 1.0}}]])

    @classmethod
    def polar_laplacian(cls, N=32, n=1):
        """r^(-2) {(-r d/dr)^2 - (n-1)(-r d/dr) + Laplacian of S^1}."""
        if n != 1:
            raise ValueError("the circle model realizes n = 1 only")
        return cls.on_circle(2, N, [[{2: {0: 1.0}}], [{0: {0: -(n - 1.0)}}], [{0: {0: 1.0}}]])

    # -- action -------------------------------------------------------------
    def coefficient(self, j, r):
        """a_j(r) at radii r: shape (len(r), d, d)."""
        r = np.atleast_1d(np.asarray(r, float))
        return np.einsum("lr,lab->rab", r[None, :] ** np.arange(self.k_taylor + 1)[:, None],
                         self.a[j])

    def apply(self, u: WeightedGridFunction) -> WeightedGridFunction:
        """Direct log-grid differentiation (8th order); the edge nodes are zero."""
        g = u.grid
        r = g.r
        out = np.zeros_like(u.values)
        for j in range(self.mu + 1):
            Dj = euler_d(u.values, j, g.dt)
            for l in range(self.k_taylor + 1):
                alj = self.a[j, l]
                if not np.any(alj):
                    continue
                out += (r ** l)[:, None] * (Dj @ alj.T)
        out *= (r ** (-float(self.mu)))[:, None]
        q = fd_margin(self.mu)
        out[:q] = 0
        out[len(out) - q:] = 0
        return u.replace(out, gamma=u.gamma - self.mu)

    def apply_to_monomial(self, p, vec=None):
        """A (v r^(-p)) = sum_l r^(-mu + l - p) h_l(p) v, returned as {exponent: vector}."""
        v = np.ones(self.dim) if vec is None else np.asarray(vec, complex)
        out = {}
        for l in range(self.k_taylor + 1):
            hl = sum(self.a[j, l] * p ** j for j in range(self.mu + 1))
            out[-self.mu + l - p] = hl @ v
        return out

    def to_dict(self):
        return {"mu": self.mu, "base": self.base.to_dict(),
                "a": [[[[ [float(x.real), float(x.imag)] for x in row] for row in m]
                       for m in al] for al in self.a]}


def conormal_sequence(A: FuchsOperator, k: int) -> ConormalSequence:
    if k > A.k_taylor:
        raise DepthExceedsTaylor(f"depth {k} exceeds the Taylor depth {A.k_taylor}")
    terms = [MeromorphicSymbol(A.a[:, j], (), float(A.mu - j), A.base) for j in range(k + 1)]
    return ConormalSequence(float(A.mu), terms)


# ---------------------------------------------------------------------------
# roots

def companion_roots(h: MeromorphicSymbol):
    """Finite eigenvalues of the matrix polynomial h (block companion pencil)."""
    if h.poles:
        raise ValueError("companion roots need a polynomial symbol")
    H = np.asarray(h.holo)
    D = len(H) - 1
    d = h.dim
    if D == 0:
        return np.array([], complex)
    if h.is_diagonal:
        out = []
        for i in range(d):
            c = H[:, i, i]
            nz = np.flatnonzero(np.abs(c) > 0)
            if len(nz) and nz[-1] > 0:
                out.append(np.roots(c[:nz[-1] + 1][::-1]))
        return np.concatenate(out) if out else np.array([], complex)
    X = np.zeros((D * d, D * d), complex)
    Y = np.eye(D * d, dtype=complex)
    for i in range(D - 1):
        X[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = np.eye(d)
    for j in range(D):
        X[(D - 1) * d:, j * d:(j + 1) * d] = -H[j]
    Y[(D - 1) * d:, (D - 1) * d:] = H[D]
    w = linalg.eigvals(X, Y)
    return w[np.isfinite(w)]


def indicial_roots(A: FuchsOperator, strip, im_range=None, resolution=256):
    """Zeros of det sigma_c(A) in the strip, located by the argument principle."""
    h = A.conormal_symbol
    if im_range is None:
        ev = companion_roots(h)
        inside = ev[(ev.real >= strip[0]) & (ev.real <= strip[1])]
        top = max(np.abs(inside.imag).max(initial=0.0) + 1.0, 1.0)
        im_range = (-top, top)
    found = locate_singularities(h, strip, resolution=resolution, im_range=im_range)
    return [(_snap(z), m) for z, m in found]


def ellipticity_report(A: FuchsOperator, gamma, window=50.0, samples=2001, tol=1e-8):
    """Interior principal symbol, conormal invertibility along the weight line, nearest root."""
    n = A.base.n
    beta = (n + 1) / 2 - gamma
    # (a) reduced principal symbol at r = 0 and a few radii, on unit (rho~, xi) samples
    rs = np.array([0.0, 0.25, 0.5, 1.0])
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    if A.base.kind == "point":
        vals = np.abs(A.coefficient(A.mu, rs)[:, 0, 0])
        psi_min = float(vals.min())
    else:
        xs = np.linspace(0, 2 * np.pi, 32, endpoint=False)
        psi_min = np.inf
        for rr in rs:
            for th in ang:
                rt, xi = np.cos(th), np.sin(th)
                s = np.zeros_like(xs, dtype=complex)
                for j in range(A.mu + 1):
                    for l, op in enumerate(A.circle_terms[j]):
                        trig = op.get(A.mu - j, {})
                        c = sum(cq * np.exp(1j * q * xs) for q, cq in trig.items())
                        s = s + rr ** l * c * (1j * xi) ** (A.mu - j) * (-1j * rt) ** j
                psi_min = min(psi_min, float(np.abs(s).min()))
    # (b) conormal symbol along the line
    h = A.conormal_symbol
    zl = beta + 1j * np.linspace(-window, window, samples)
    hv = h.eval_many(zl)
    if hv.ndim == 2:
        smin = np.abs(hv).min(axis=1)
    else:
        smin = np.linalg.svd(hv, compute_uv=False).min(axis=1)
    imin = int(np.argmin(smin))
    # (c) nearest root
    roots = companion_roots(h)
    if len(roots):
        dist = np.abs(roots.real - beta)
        i = int(np.argmin(dist))
        nearest, ndist = complex(roots[i]), float(dist[i])
    else:
        nearest, ndist = None, np.inf
    ok_psi = psi_min > tol
    ok_con = smin.min() > tol and ndist > 1e-9
    return {
        "gamma": gamma, "line": beta,
        "sigma_psi_min": psi_min, "sigma_psi_ok": bool(ok_psi),
        "conormal_min_singular_value": float(smin.min()),
        "conormal_argmin": complex(zl[imin]),
        "conormal_ok": bool(ok_con),
        "nearest_root": nearest, "nearest_root_distance": ndist,
        "elliptic": bool(ok_psi and ok_con),
    }


# ---------------------------------------------------------------------------
# solver

def _padding_factor(grid, delta, digits=30.0):
    """Power-of-two window factor so that exp(-delta * extra) is below e^-digits."""
    if not np.isfinite(delta):
        return 1
    extra = digits / max(delta, 1e-300)
    f = 1
    while grid.T * (f - 1) < extra:
        f *= 2
        if grid.M * f > MAX_PADDED_M:
            raise WindowTruncation(
                f"a root at distance {delta:.2e} from the line needs a window beyond {MAX_PADDED_M} nodes")
    return f


def _solve_on_line(h: MeromorphicSymbol, z, G, chunk=4096):
    hv = h.eval_many(z)
    if hv.ndim == 2:
        return G / hv
    out = np.empty_like(G)
    for s in range(0, len(z), chunk):
        out[s:s + chunk] = np.linalg.solve(hv[s:s + chunk], G[s:s + chunk, :, None])[..., 0]
    return out


def _inverse_weighted(values, beta, big):
    """e^(beta t) u on the big grid from spectral samples on the line beta."""
    return inverse_weighted(SpectralFunction(beta, big.rho, values, big))


def _unweight(w, beta, t, t_max=None):
    with np.errstate(over="ignore"):
        fac = np.exp(-beta * t)
    out = w * fac[:, None]
    if t_max is not None:
        out[t > t_max] = 0
    return out


def _rhs(A, f):
    """r^mu f, the right-hand side of h(-r d/dr) u = r^mu f."""
    return f.values * (f.grid.r ** float(A.mu))[:, None]


def _line_roots(h, beta, tol=1e-9):
    roots = companion_roots(h)
    on = roots[np.abs(roots.real - beta) <= tol]
    return roots, on


def weighted_residual(A, u, f, gamma, rmin=None, rmax=None):
    """|| Au - f || / || f || in the weight gamma - mu on the grid interior."""
    g = u.grid
    beta = (u.n + 1) / 2 - gamma + A.mu
    res = (A.apply(u).values - f.values) * np.exp(beta * g.t)[:, None]
    ref = f.values * np.exp(beta * g.t)[:, None]
    q = fd_margin(A.mu) + 8
    mask = np.zeros(g.M, bool)
    mask[q:g.M - q] = True
    if rmin is not None:
        mask &= g.r >= rmin
    if rmax is not None:
        mask &= g.r <= rmax
    den = np.linalg.norm(ref[mask])
    num = np.linalg.norm(res[mask])
    return float(num / den) if den > 0 else float(num)


def solve_model(A: FuchsOperator, f: WeightedGridFunction, gamma, tol=1e-6, check=True):
    """u with A u = f in the weight gamma, for constant coefficients (k_taylor = 0).

    Mu = h^(-1) M(r^mu f) on the weight line.  The inversion runs on a
    zero-padded window wide enough for the decay set by the nearest root.
    """
    if A.k_taylor != 0:
        raise ValueError("solve_model handles k_taylor = 0; use solve_with_taylor")
    if f.base != A.base:
        raise ValueError("right-hand side lives on another base model")
    beta = (A.base.n + 1) / 2 - gamma
    h = A.conormal_symbol
    if np.linalg.cond(h.holo[-1]) > 1e12:
        raise NotElliptic("leading conormal coefficient is singular")
    roots, on = _line_roots(h, beta)
    if len(on):
        raise NotElliptic(f"conormal symbol is not invertible on Re z = {beta}: roots {on}")
    rhs = _rhs(A, f)
    check_window(f.replace(rhs), beta)
    delta = np.abs(roots.real - beta).min() if len(roots) else np.inf
    big = padded_grid(f.grid, _padding_factor(f.grid, delta))
    s = mellin_forward(WeightedGridFunction(big, pad_values(rhs, f.grid, big), A.base), beta, tol=None)
    U = _solve_on_line(h, s.z, s.values)
    w = restrict_values(_inverse_weighted(U, beta, big), f.grid, big)
    u = WeightedGridFunction(f.grid, _unweight(w, beta, f.grid.t), A.base, gamma)
    if check:
        res = weighted_residual(A, u, f, gamma)
        if res > tol:
            raise ResidualTooLarge(f"a posteriori residual {res:.2e} exceeds {tol:.1e}")
    return u


# ---------------------------------------------------------------------------
# asymptotics

_GL_CACHE = {}


def _gl_cut(a, b, n=512):
    key = (a, b, n)
    if key not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        _GL_CACHE[key] = (r, 0.5 * (b - a) * w * cutoff_derivative(r, a, b))
    return _GL_CACHE[key]


def singular_mellin(z, p, k, cut=(0.5, 2.0 / 3.0)):
    """Meromorphic continuation of M(omega r^(-p) log^k r)(z).

    Integration by parts gives -Phi(w)/w with Phi(w) = int r^w omega'(r) dr,
    w = z - p; the log power is the k-th w-derivative.
    """
    z = np.asarray(z, complex)
    w = z - p
    r, W = _gl_cut(*cut)
    lr = np.log(r)
    E = np.exp(np.multiply.outer(w, lr))
    out = np.zeros(w.shape, complex)
    for i in range(k + 1):
        phi = E @ (W * lr ** (k - i))
        out -= comb(k, i) * (-1) ** i * factorial(i) * w ** (-i - 1) * phi
    return out


def gaussian_singular_mellin(z, p, k, q=4):
    """M(exp(-r^q) r^(-p) log^k r)(z) = d^k/dw^k Gamma(w/q)/q at w = z - p.

    Derivatives by a Cauchy integral on a circle clear of the poles w = -q n.
    """
    w = np.asarray(z, complex) - p
    if k == 0:
        return np.exp(special.loggamma(w / q)) / q
    n = np.round(-w.real / q)
    # distance to the nearest pole of Gamma(w/q)
    dist = np.minimum(np.abs(w + q * np.maximum(n, 0)), np.abs(w + q * np.maximum(n + 1, 0)))
    dist = np.minimum(dist, np.abs(w + q * np.maximum(n - 1, 0)))
    rad = np.minimum(0.5 * dist, 0.5)
    N = 48
    ang = np.exp(2j * np.pi * np.arange(N) / N)
    pts = w[..., None] + rad[..., None] * ang
    vals = np.exp(special.loggamma(pts / q)) / q
    deriv = (vals * ang ** (-k)).mean(axis=-1) * factorial(k) / rad ** k
    return deriv


def singular_function(grid, p, k, cut=(0.5, 2.0 / 3.0)):
    r = grid.r
    return cutoff(r, *cut) * r ** (-p) * np.log(r) ** k


@dataclass(eq=False)
class Asymptotics:
    pairs: list                 # (p, m)
    laurent: list               # per pair: (m+1, d) Laurent coefficients of Mu
    coeffs: list                # per pair: (m+1, d) coefficients of omega r^-p log^k r
    type: DiscreteAsymptoticType
    u: WeightedGridFunction
    u_sing: WeightedGridFunction
    u_flat: WeightedGridFunction
    reconstruction_error: float
    info: dict = field(default_factory=dict)


def _root_multiplicities(A, lo, hi, roots):
    if not len(roots):
        return []
    inside = roots[(roots.real > lo) & (roots.real < hi)]
    if not len(inside):
        return []
    top = np.abs(inside.imag).max() + 1.0
    return indicial_roots(A, (lo, hi), im_range=(-top, top))


def _snap(p, tol=1e-12):
    p = complex(p)
    re = 0.0 if abs(p.real) < tol else p.real
    im = 0.0 if abs(p.imag) < tol * max(1.0, abs(p)) else p.imag
    return complex(re, im)


def _radius_for(p, others, cap=0.25):
    d = [abs(p - q) for q in others if abs(p - q) > 1e-9]
    return min(cap, 0.4 * min(d)) if d else cap


def extract_asymptotics(A: FuchsOperator, f: WeightedGridFunction, gamma, theta,
                        eps=EPS_MARGIN, cut=(0.5, 2.0 / 3.0), u=None, tol=1e-6,
                        zero_tol=1e-10):
    """Residues of Mu between the weight line and the line shifted by theta.

    Returns the Laurent data c_jk of Mu = h^(-1) M(r^mu f) at each pole p_j in
    the strip, the expansion coefficients of omega r^(-p_j) log^k r, the
    singular part, and the flat remainder computed as a Mellin inverse along
    the shifted line.
    """
    if A.k_taylor != 0:
        raise ValueError("extract_asymptotics handles k_taylor = 0; see solve_with_taylor")
    if not np.isfinite(theta):
        raise ValueError("extraction needs a finite theta")
    n = A.base.n
    beta = (n + 1) / 2 - gamma
    target = beta + theta
    h = A.conormal_symbol
    roots, on = _line_roots(h, beta)
    if len(on):
        raise NotElliptic(f"root {on[0]} on the weight line")
    near = roots[np.abs(roots.real - target) < eps]
    if len(near):
        raise PoleTooCloseToTargetLine(f"root {near[0]} within {eps} of Re z = {target}")
    if u is None:
        u = solve_model(A, f, gamma)
    rhs = f.replace(_rhs(A, f))
    weight = WeightData(gamma, theta, n)
    dright = np.abs(roots.real - beta).min() if len(roots) else 1.0
    mult = _root_multiplicities(A, target + eps / 2, beta - min(eps, dright) / 2, roots)

    def U(z):
        z = np.atleast_1d(z)
        F = mellin_eval(rhs, z)
        return _solve_on_line(h, z, F)[:, :, None]

    pairs, laurent, coeffs = [], [], []
    d = A.dim
    for p, mlt in mult:
        p = _snap(p)
        rad = _radius_for(p, list(roots))
        blk = laurent_extract(U, p, mlt - 1, rad)
        c = blk.coeffs[:, :, 0]
        ref = np.abs(U(p + rad * np.exp(2j * np.pi * np.arange(64) / 64))).max() * rad
        keep = np.flatnonzero(np.abs(c).max(axis=1) > zero_tol * max(ref, 1e-300))
        if not len(keep):
            continue
        m = int(keep[-1])
        c = c[:m + 1]
        a = np.array([(-1) ** k / factorial(k) * c[k] for k in range(m + 1)])
        pairs.append((complex(p), m))
        laurent.append(c)
        coeffs.append(a)
    g = f.grid
    # the residue at p carries the left tail of M(r^mu f) on Re z = Re p,
    # which the window cuts off
    for p, _ in pairs:
        ratio = boundary_ratio(np.exp(p.real * g.t)[:, None] * rhs.values)
        if ratio > tol:
            raise WindowTruncation(f"right-hand side not resolved on Re z = {p.real:.4g} "
                                   f"(end ratio {ratio:.1e}); enlarge T")
    P = DiscreteAsymptoticType(pairs, weight)
    sing = np.zeros((g.M, d), complex)
    for (p, m), a in zip(pairs, coeffs):
        for k in range(m + 1):
            sing += np.outer(singular_function(g, p, k, cut), a[k])
    u_sing = WeightedGridFunction(g, sing, A.base, gamma)
    # flat part along the shifted line
    left = roots[roots.real < target]
    # omega r^-p_j is not flat at infinity, so strip poles count as well
    right = roots[roots.real > target]
    deltas = [np.abs(left.real - target).min() if len(left) else np.inf,
              np.abs(right.real - target).min() if len(right) else np.inf]
    try:
        big = padded_grid(g, _padding_factor(g, min(deltas)))
    except WindowTruncation as exc:
        raise PoleTooCloseToTargetLine(str(exc)) from exc
    s = mellin_forward(WeightedGridFunction(big, pad_values(rhs.values, g, big), A.base),
                       target, tol=None)
    G = _solve_on_line(h, s.z, s.values)
    # the transform of omega r^-p only decays like exp(-c sqrt|rho|), which
    # aliases on the grid; subtract exp(-r^q) r^-p instead (Gamma-function
    # transform, exponential decay) and add the flat difference back on the grid
    qexp = max(4, int(np.ceil(-theta)) + 2)
    corr = np.zeros((g.M, d), complex)
    for (p, m), a in zip(pairs, coeffs):
        for k in range(m + 1):
            G -= np.outer(gaussian_singular_mellin(s.z, p, k, qexp), a[k])
            corr += np.outer((np.exp(-g.r ** qexp) - cutoff(g.r, *cut)) * g.r ** (-p)
                             * np.log(g.r) ** k, a[k])
    w = restrict_values(_inverse_weighted(G, target, big), g, big)
    flat = _unweight(w, target, g.t) + corr
    # removing the weight exp(target t) magnifies roundoff by exp(-theta t);
    # the contour result is used on r <= 1, where the asymptotics live, and
    # u - u_sing (the same function by definition) on r > 1
    outer = g.t > 0
    flat[outer] = u.values[outer] - sing[outer]
    u_flat = WeightedGridFunction(g, flat, A.base, gamma - theta)
    wt = np.exp(beta * g.t)[:, None]
    inner = (g.t <= 0) & (np.arange(g.M) >= 16)
    diff = (u.values - sing - flat) * wt
    err = float(np.linalg.norm(diff[inner]) / max(np.linalg.norm((u.values * wt)[inner]), 1e-300))
    if err > tol:
        raise ResidualTooLarge(f"reconstruction error {err:.2e} exceeds {tol:.1e}")
    return Asymptotics(pairs, laurent, coeffs, P, u, u_sing, u_flat, err,
                       {"roots": mult, "target_line": target, "window_factor": big.M // g.M})


# ---------------------------------------------------------------------------
# Taylor recursion

@dataclass(eq=False)
class TaylorSolution:
    u: WeightedGridFunction     # values beyond r_valid are set to 0
    type: DiscreteAsymptoticType
    pairs: list
    coeffs: list
    levels: int
    r_valid: float
    residual: float
    info: dict = field(default_factory=dict)


def solve_with_taylor(A: FuchsOperator, f: WeightedGridFunction, gamma, depth, tol=1e-5,
                      r_max=1.0, eps=EPS_MARGIN, max_levels=80, level_tol=1e-15,
                      zero_tol=1e-10):
    """Solve A u = f near the tip by the Mellin-space Taylor recursion.

    With A = sum_l r^(-mu+l) h_l(-r d/dr) and U_0 = h_0^(-1) M(r^mu f),
        U_l(z) = -h_0(z)^(-1) sum_{i=1..l} h_i(z+i) U_{l-i}(z+i),
    and u_l is the Mellin inverse of U_l along Re z = beta - l, which makes
    h_0 u_l = -sum_i r^i h_i u_{l-i} exact.  Levels are added until they stop
    contributing on r <= r_max; depth fixes the reported asymptotic type,
    Theta = (-(depth+1), 0].
    """
    if A.k_taylor == 0:
        u = solve_model(A, f, gamma)
        ex = extract_asymptotics(A, f, gamma, -(depth + 1.0), eps=eps, u=u)
        return TaylorSolution(u, ex.type, ex.pairs, ex.coeffs, 1, np.inf,
                              weighted_residual(A, u, f, gamma))
    n = A.base.n
    beta = (n + 1) / 2 - gamma
    h0 = A.conormal_symbol
    roots = companion_roots(h0)
    if len(roots) and np.abs(roots.real - beta).min() < eps:
        raise NotElliptic(f"root near the weight line Re z = {beta}")
    for l in range(1, max_levels + 1):
        if len(roots) and np.abs(roots.real - (beta - l)).min() < eps:
            raise IntermediateLineHitsRoot(f"a root lies on the intermediate line Re z = {beta - l}")
    g = f.grid
    delta = min(np.abs(roots.real - (beta - j)).min() for j in range(max_levels + 1)) if len(roots) else np.inf
    big = padded_grid(g, _padding_factor(g, delta))
    rhs = _rhs(A, f)
    check_window(f.replace(rhs), beta)
    s = mellin_forward(WeightedGridFunction(big, pad_values(rhs, g, big), A.base), beta, tol=None)
    rho = big.rho
    S = [_solve_on_line(h0, s.z, s.values)]
    t_valid = np.log(r_max) + 1.0
    mask = g.t <= np.log(r_max)
    total = _unweight(restrict_values(_inverse_weighted(S[0], beta, big), g, big), beta, g.t, t_valid)
    hs = [A.h(i) for i in range(A.k_taylor + 1)]
    quiet = 0
    levels = 1
    for l in range(1, max_levels + 1):
        z = (beta - l) + 1j * rho
        acc = np.zeros_like(S[0])
        for i in range(1, min(l, A.k_taylor) + 1):
            hv = hs[i].eval_many(z + i)
            acc += hv * S[l - i] if hv.ndim == 2 else np.einsum("kab,kb->ka", hv, S[l - i])
        Sl = -_solve_on_line(h0, z, acc)
        S.append(Sl)
        ul = _unweight(restrict_values(_inverse_weighted(Sl, beta - l, big), g, big),
                       beta - l, g.t, t_valid)
        total = total + ul
        levels = l + 1
        size = np.abs(ul[mask]).max(initial=0.0)
        if size <= level_tol * max(np.abs(total[mask]).max(initial=0.0), 1e-300):
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
    else:
        raise NoConvergence(f"Taylor recursion did not settle within {max_levels} levels")
    u = WeightedGridFunction(g, total, A.base, gamma)
    res = weighted_residual(A, u, f, gamma, rmin=np.exp(-g.T / 2), rmax=r_max)
    if res > tol:
        raise ResidualTooLarge(f"full-operator residual {res:.2e} exceeds {tol:.1e}")
    pairs, coeffs = _taylor_asymptotics(A, rhs, f.grid, beta, depth, roots, zero_tol)
    P = DiscreteAsymptoticType(pairs, WeightData(gamma, -(depth + 1.0), n))
    return TaylorSolution(u, P, pairs, coeffs, levels, r_max * np.e, res,
                          {"window_factor": big.M // g.M})


def _taylor_U(A, rhs_fn, z, l):
    """U_l(z) by the recursion, evaluated off the lines (z: array)."""
    h0 = A.conormal_symbol
    E = [_solve_on_line(h0, z + l, rhs_fn(z + l))]
    for j in range(1, l + 1):
        zz = z + (l - j)
        acc = np.zeros_like(E[0])
        for i in range(1, min(j, A.k_taylor) + 1):
            hv = A.h(i).eval_many(zz + i)
            acc += hv * E[j - i] if hv.ndim == 2 else np.einsum("kab,kb->ka", hv, E[j - i])
        E.append(-_solve_on_line(h0, zz, acc))
    return E[l]


def _taylor_asymptotics(A, rhs, grid, beta, depth, roots, zero_tol):
    lo = beta - (depth + 1)
    rhs_g = WeightedGridFunction(grid, rhs, A.base)

    def F(z):
        return mellin_eval(rhs_g, z)

    mult0 = {}
    for z0 in roots:
        for key in mult0:
            if abs(key - z0) < 1e-6:
                mult0[key] += 1
                break
        else:
            mult0[complex(z0)] = 1
    cands = {}
    for q, mq in mult0.items():
        for i in range(depth + 1):
            p = q - i
            if lo < p.real < beta:
                for key in cands:
                    if abs(key - p) < 1e-9:
                        cands[key] += mq
                        break
                else:
                    cands[p] = mq
    allpts = list(cands)
    pairs, coeffs = [], []
    for p, mm in sorted(cands.items(), key=lambda kv: (-kv[0].real, -kv[0].imag)):
        rad = _radius_for(p, allpts + [q - i for q in mult0 for i in range(depth + 2)])
        total = None
        for l in range(0, depth + 1):
            if not p.real < beta - l:
                continue
            fn = (lambda L: lambda z: _taylor_U(A, F, np.atleast_1d(z), L)[:, :, None])(l)
            blk = laurent_extract(fn, p, mm * (l + 1) - 1, rad)
            c = blk.coeffs[:, :, 0]
            if total is None:
                total = c
            else:
                n_ = max(len(total), len(c))
                total = np.pad(total, ((0, n_ - len(total)), (0, 0))) + np.pad(c, ((0, n_ - len(c)), (0, 0)))
        if total is None:
            continue
        ref = max(np.abs(total).max(), 1e-300)
        scale = max(np.abs(F(np.array([p + rad]))).max(), ref)
        keep = np.flatnonzero(np.abs(total).max(axis=1) > zero_tol * scale)
        if not len(keep):
            continue
        m = int(keep[-1])
        a = np.array([(-1) ** k / factorial(k) * total[k] for k in range(m + 1)])
        pairs.append((_snap(p), m))
        coeffs.append(a)
    return pairs, coeffs


# ---------------------------------------------------------------------------
# sign convention self-test

def _sign_self_test():
    g = RadialGrid(6.0, 256)
    p = 0.37
    u = WeightedGridFunction(g, g.r ** (-p))
    Du = euler_d(u.values, 1, g.dt)
    q = fd_margin(1)
    if not np.allclose(Du[q:-q, 0], p * u.values[q:-q, 0], rtol=1e-6):
        raise RuntimeError("(-r d/dr) r^-p != p r^-p on the log grid")
    bump = WeightedGridFunction(g, np.exp(-g.t ** 2))
    via_symbol = op_mellin(lambda z: z, 0.0, bump).values[:, 0]
    if not np.allclose(via_symbol[q:-q], euler_d(bump.values, 1, g.dt)[q:-q, 0], atol=1e-6):
        raise RuntimeError("Mellin symbol z does not act as -r d/dr")


_sign_self_test()
