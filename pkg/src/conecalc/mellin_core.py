"""Weighted Mellin transform on a logarithmic radial grid.

With t = log r the Mellin transform on the line Re z = beta becomes a
Fourier transform of t -> exp(beta t) u(exp t).  The grid is
t_i = -T + i dt, dt = 2T/M, and the dual frequencies are the half-shifted
symmetric set rho_k = (k - M/2 + 1/2) pi/T.  With this choice the discrete
forward/inverse pair is an exact roundtrip and an exact Parseval identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as spfft

from .errors import GridMismatch, PoleOnWeightLine, WindowTruncation

# relative size allowed for the weighted samples at the window ends
BOUNDARY_TOL = 1e-12
_EDGE_NODES = 4


# ---------------------------------------------------------------------------
# base models and cut-off

@dataclass(frozen=True)
class BaseModel:
    """Cross-section X: a point (n = 0) or the unit circle truncated to |k| <= N (n = 1).

    On the circle, grid values hold Fourier coefficients u_k(r) of
    u(r, x) = sum_k u_k(r) exp(ikx).
    """
    kind: str = "point"
    N: int = 0

    def __post_init__(self):
        if self.kind not in ("point", "circle"):
            raise ValueError(f"unknown base kind {self.kind!r}")
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if self.kind == "point" and self.N != 0:
            object.__setattr__(self, "N", 0)

    @property
    def n(self) -> int:
        return 0 if self.kind == "point" else 1

    @property
    def dim(self) -> int:
        return 1 if self.kind == "point" else 2 * self.N + 1

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1) if self.kind == "circle" else np.zeros(1, int)

    @property
    def weight(self) -> float:
        # |u|^2 integrated over X in terms of the stored coefficients
        return 2 * np.pi if self.kind == "circle" else 1.0

    def to_dict(self):
        return {"kind": self.kind, "N": self.N}

    @classmethod
    def circle(cls, N=32):
        return cls("circle", N)


POINT = BaseModel()


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def cutoff(r, a=0.5, b=2.0 / 3.0):
    """Smooth monotone cut-off: 1 for r <= a, 0 for r >= b."""
    r = np.asarray(r, dtype=float)
    x = (r - a) / (b - a)
    p, q = _psi(1.0 - x), _psi(x)
    return p / (p + q)


def cutoff_derivative(r, a=0.5, b=2.0 / 3.0):
    """d/dr of cutoff(r, a, b); supported in [a, b]."""
    r = np.asarray(r, dtype=float)
    x = (r - a) / (b - a)
    p, q = _psi(1.0 - x), _psi(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = np.where(1 - x > 0, -p / (1 - x) ** 2, 0.0)
        dq = np.where(x > 0, q / x ** 2, 0.0)
        out = (dp * q - p * dq) / (p + q) ** 2 / (b - a)
    return np.where((x > 0) & (x < 1), out, 0.0)


# ---------------------------------------------------------------------------
# grids and grid functions

@dataclass(frozen=True)
class RadialGrid:
    T: float = 12.0
    M: int = 4096

    def __post_init__(self):
        if not (self.T > 0):
            raise ValueError("T must be positive")
        M = int(self.M)
        if M < 8 or M & (M - 1):
            raise ValueError("M must be a power of two >= 8")

    @property
    def dt(self):
        return 2 * self.T / self.M

    @property
    def t(self):
        return -self.T + self.dt * np.arange(self.M)

    @property
    def r(self):
        return np.exp(self.t)

    @property
    def drho(self):
        return np.pi / self.T

    @property
    def rho(self):
        return (np.arange(self.M) - self.M / 2 + 0.5) * self.drho


def padded_grid(grid: RadialGrid, factor: int) -> RadialGrid:
    """Same spacing, window enlarged by a power-of-two factor; nodes stay aligned."""
    return RadialGrid(grid.T * factor, grid.M * factor)


def pad_values(values, grid, big):
    off = (big.M - grid.M) // 2
    out = np.zeros((big.M,) + values.shape[1:], complex)
    out[off:off + grid.M] = values
    return out


def restrict_values(values, grid, big):
    off = (big.M - grid.M) // 2
    return values[off:off + grid.M]


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedGridFunction:
    """Samples u(r_i)_k on the radial grid, one column per base mode."""
    grid: RadialGrid
    values: np.ndarray
    base: BaseModel = POINT
    gamma: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape != (self.grid.M, self.base.dim):
            raise GridMismatch(f"values of shape {v.shape}, expected {(self.grid.M, self.base.dim)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n(self):
        return self.base.n

    @classmethod
    def from_function(cls, grid, fn, base=POINT, gamma=0.0):
        """fn(r) -> (M,) for the point, or (M, dim) / callable per mode."""
        vals = np.asarray(fn(grid.r), dtype=complex)
        if vals.ndim == 1 and base.dim > 1:
            vals = np.outer(vals, np.ones(base.dim))
        return cls(grid, vals, base, gamma)

    def replace(self, values=None, gamma=None):
        return WeightedGridFunction(self.grid, self.values if values is None else values,
                                    self.base, self.gamma if gamma is None else gamma)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.replace(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.replace(self.values - other.values)

    def __mul__(self, c):
        return self.replace(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.replace(-self.values)

    def multiply(self, phi):
        """Pointwise product with a radial function phi(r) (array or callable)."""
        phi = phi(self.grid.r) if callable(phi) else np.asarray(phi)
        phi = np.asarray(phi)
        if phi.ndim == 1:
            phi = phi[:, None]
        return self.replace(self.values * phi)

    @property
    def physical(self):
        return self.values


def _check_compatible(u, v):
    if u.grid != v.grid or u.base != v.base:
        raise GridMismatch("grid functions live on different grids or bases")


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Samples of Mu on the line Re z = beta at z_k = beta + i rho_k."""
    beta: float
    rho: np.ndarray
    values: np.ndarray
    grid: RadialGrid
    base: BaseModel = POINT
    gamma: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))

    @property
    def z(self):
        return self.beta + 1j * self.rho

    def replace(self, values):
        return SpectralFunction(self.beta, self.rho, values, self.grid, self.base, self.gamma)


# ---------------------------------------------------------------------------
# transforms

def _phase_a(M):
    return -M / 2 + 0.5


def _node_phase(M):
    """exp(2 pi i a i / M) for i = 0..M-1, with the large part of the
    argument, exp(-pi i i) = (-1)^i, taken exactly."""
    i = np.arange(M)
    return np.where(i % 2 == 0, 1.0, -1.0) * np.exp(1j * np.pi * i / M)


def _freq_phase(M):
    """exp(-i rho_k T) = exp(-i pi (k - M/2 + 1/2)), exactly."""
    k = np.arange(M) - M // 2
    return np.where(k % 2 == 0, 1.0, -1.0) * (-1j)


def boundary_ratio(w):
    """Largest |w| at the window ends relative to max |w| (0 for w = 0)."""
    w = np.abs(np.asarray(w))
    peak = w.max()
    if peak == 0:
        return 0.0
    e = _EDGE_NODES
    return float(max(w[:e].max(), w[-e:].max()) / peak)


def check_window(u, beta, tol=BOUNDARY_TOL):
    ratio = boundary_ratio(np.exp(beta * u.grid.t)[:, None] * u.values)
    if ratio > tol:
        raise WindowTruncation(
            f"weighted samples at the window ends are {ratio:.2e} of the peak "
            f"(beta={beta}); enlarge T or choose another weight line")
    return ratio


def mellin_forward(u: WeightedGridFunction, beta: float, tol=BOUNDARY_TOL) -> SpectralFunction:
    """Mu(beta + i rho_k) for all dual frequencies, per base mode."""
    g = u.grid
    if tol is not None:
        check_window(u, beta, tol)
    M = g.M
    v = g.dt * np.exp(beta * g.t)[:, None] * u.values
    v = v * _node_phase(M)[:, None]
    vals = M * spfft.ifft(v, axis=0, workers=_workers())
    vals *= _freq_phase(M)[:, None]
    return SpectralFunction(beta, g.rho, vals, g, u.base, u.gamma)


def inverse_weighted(s: SpectralFunction, grid: RadialGrid | None = None) -> np.ndarray:
    """exp(beta t) u on the grid, before removing the weight (no overflow)."""
    g = s.grid if grid is None else grid
    if g != s.grid or s.values.shape[0] != g.M or not np.allclose(s.rho, g.rho, rtol=0, atol=1e-12 * g.drho):
        raise GridMismatch("spectral samples do not match the target radial grid")
    M = g.M
    w = s.values * np.conj(_freq_phase(M))[:, None]
    w = spfft.fft(w, axis=0, workers=_workers())
    w *= (g.drho / (2 * np.pi)) * np.conj(_node_phase(M))[:, None]
    return w


def mellin_inverse(s: SpectralFunction, grid: RadialGrid | None = None) -> WeightedGridFunction:
    g = s.grid if grid is None else grid
    w = inverse_weighted(s, g) * np.exp(-s.beta * g.t)[:, None]
    return WeightedGridFunction(g, w, s.base, s.gamma)


def mellin_eval(u: WeightedGridFunction, z) -> np.ndarray:
    """Direct trapezoid sum of int r^(z-1) u dr at arbitrary complex z.

    Returns shape z.shape + (dim,).
    """
    z = np.asarray(z, dtype=complex)
    t = u.grid.t
    ker = np.exp(np.multiply.outer(z, t))
    return u.grid.dt * ker @ u.values


# ---------------------------------------------------------------------------
# symbol evaluation helpers (duck typed: anything with eval_many, or a callable)

def symbol_values(f, z, dim):
    """Evaluate a symbol on an array of points; returns (K, dim, dim) or (K, dim) if diagonal."""
    z = np.asarray(z, dtype=complex)
    if hasattr(f, "eval_many"):
        vals = f.eval_many(z)
    else:
        vals = np.asarray(f(z), dtype=complex)
    vals = np.asarray(vals, dtype=complex)
    if vals.ndim == 0:
        vals = np.full(z.shape, vals)
    if vals.ndim == 1:
        return np.outer(vals, np.ones(dim))
    return vals


def _apply_symbol(vals, g):
    if vals.ndim == 2:
        return vals * g
    return np.einsum("kij,kj->ki", vals, g)


def op_mellin(f, gamma: float, u: WeightedGridFunction, pole_tol=1e-6, tol=BOUNDARY_TOL):
    """Mellin pseudo-differential action along the line Re z = (n+1)/2 - gamma.

    For n = 0 this is the standard weight line 1/2 - gamma.
    """
    beta = (u.n + 1) / 2 - gamma
    for p in getattr(f, "pole_locations", lambda: [])():
        if abs(p.real - beta) < pole_tol:
            raise PoleOnWeightLine(f"symbol pole at {p} on the line Re z = {beta}")
    s = mellin_forward(u, beta, tol)
    vals = symbol_values(f, s.z, u.base.dim)
    out = mellin_inverse(s.replace(_apply_symbol(vals, s.values)))
    return out.replace(gamma=u.gamma)


def dilate(u: WeightedGridFunction, lam: float, g: float = 0.0, plain=False, beta=None,
           tol=BOUNDARY_TOL):
    """kappa_lam^g u = lam^((n+1)/2 + g) u(lam r); plain=True gives u(lam r).

    Off-node values come from band-limited interpolation in t, done as the
    Mellin multiplier lam^(-z) on a weight line (default (n+1)/2 - u.gamma).
    """
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    if lam == 1:
        return u
    if beta is None:
        beta = (u.n + 1) / 2 - u.gamma
    s = mellin_forward(u, beta, tol)
    shifted = mellin_inverse(s.replace(s.values * np.exp(-s.z * np.log(lam))[:, None]))
    if tol is not None:
        check_window(shifted, beta, max(tol, 1e3 * tol))
    c = 1.0 if plain else lam ** ((u.n + 1) / 2 + g)
    return shifted.replace(shifted.values * c, gamma=u.gamma)


# ---------------------------------------------------------------------------
# global thread cap (CONECALC_THREADS)

_THREADS = {"n": None}


def set_threads(n):
    _THREADS["n"] = None if n is None else max(1, int(n))


def _workers():
    return _THREADS["n"]
