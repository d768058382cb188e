"""Meromorphic matrix-valued Mellin symbols stored as finite data.

A symbol is a matrix polynomial plus finitely many Laurent principal parts

    f(z) = sum_j h_j z^j + sum_blocks sum_k c_k (z - p)^(-(k+1)).

The algebra (products, translations, sums) is carried out exactly on that
data.  Zeros of det f are found with the argument principle and Laurent data
of inverses with trapezoidal contour quadrature.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (BaseMismatch, ConormalNotBijective, ContaminatedDisk,
                     ContourThroughZero, EvalAtPole, NotElliptic,
                     NotInvertibleOnLine, PoleOnStripBoundary, StripMismatch)
from .mellin_core import BaseModel

MERGE_TOL = 1e-9
PRUNE_TOL = 1e-13
INF = float("inf")


def _as_mats(coeffs, dim=None):
    a = np.asarray(coeffs, dtype=complex)
    if a.ndim == 1:          # scalar coefficients
        a = a[:, None, None]
    if a.ndim == 2:          # a single matrix
        a = a[None]
    if dim is not None and a.shape[1:] != (dim, dim):
        raise ValueError(f"expected {dim}x{dim} matrices, got {a.shape[1:]}")
    return a


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LaurentBlock:
    """Principal part sum_k coeffs[k] (z - p)^(-(k+1)), k = 0..m."""
    p: complex
    coeffs: np.ndarray
    rank_bound: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", complex(self.p))
        c = _as_mats(self.coeffs)
        if not np.all(np.isfinite(c)):
            raise ValueError("Laurent coefficients must be finite")
        object.__setattr__(self, "coeffs", _frozen(c))
        if self.rank_bound is not None:
            for ck in c:
                if np.linalg.matrix_rank(ck, tol=1e-10 * max(1.0, np.abs(ck).max())) > self.rank_bound:
                    raise ValueError("Laurent coefficient exceeds the declared rank bound")

    @property
    def m(self):
        return len(self.coeffs) - 1

    @property
    def dim(self):
        return self.coeffs.shape[1]

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        w = z - self.p
        out = np.zeros(z.shape + (self.dim, self.dim), complex)
        for k, ck in enumerate(self.coeffs):
            out += np.multiply.outer(w ** (-(k + 1)), ck)
        return out


@dataclass(frozen=True, eq=False)
class MeromorphicSymbol:
    holo: np.ndarray
    poles: tuple = ()
    order: float = 0.0
    base: BaseModel | None = None
    strip: tuple = (-INF, INF)
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        h = _as_mats(self.holo) if np.size(self.holo) else np.zeros((1, 1, 1), complex)
        d = h.shape[1]
        if h.shape[2] != d:
            raise ValueError("symbol matrices must be square")
        if self.base is not None and self.base.dim != d:
            raise BaseMismatch(f"matrix size {d} does not match base dimension {self.base.dim}")
        poles = tuple(self.poles)
        for b in poles:
            if b.dim != d:
                raise ValueError("pole block dimension mismatch")
        object.__setattr__(self, "holo", _frozen(h))
        object.__setattr__(self, "poles", poles)
        c, c2 = self.strip
        if c > c2:
            raise ValueError("strip must satisfy c <= c'")
        object.__setattr__(self, "strip", (float(c), float(c2)))

    # -- constructors -------------------------------------------------------
    @classmethod
    def identity(cls, dim=1, base=None, strip=(-INF, INF)):
        return cls(np.eye(dim)[None], (), 0.0, base, strip)

    @classmethod
    def zero(cls, dim=1, base=None, strip=(-INF, INF)):
        return cls(np.zeros((1, dim, dim)), (), -INF, base, strip)

    @classmethod
    def scalar(cls, poly=(0,), poles=(), order=None, strip=(-INF, INF)):
        """poly = [h_0, h_1, ...]; poles = [(p, [c_0, c_1, ...]), ...]."""
        blocks = tuple(LaurentBlock(p, np.asarray(c, complex)) for p, c in poles)
        if order is None:
            order = float(len(poly) - 1) if any(np.asarray(poly) != 0) else -INF
        return cls(np.asarray(poly, complex), blocks, order, None, strip)

    @classmethod
    def diagonal(cls, polys, base=None, order=None, strip=(-INF, INF)):
        """polys[k] = coefficient list for the k-th diagonal entry."""
        deg = max(len(p) for p in polys)
        d = len(polys)
        h = np.zeros((deg, d, d), complex)
        for k, p in enumerate(polys):
            h[:len(p), k, k] = p
        return cls(h, (), float(deg - 1) if order is None else order, base, strip)

    # -- basic properties ---------------------------------------------------
    @property
    def dim(self):
        return self.holo.shape[1]

    @property
    def degree(self):
        return len(self.holo) - 1

    def pole_locations(self):
        return [b.p for b in self.poles]

    @property
    def is_diagonal(self):
        d = self.dim
        off = ~np.eye(d, dtype=bool)
        if np.any(self.holo[:, off]):
            return False
        return all(not np.any(b.coeffs[:, off]) for b in self.poles)

    def replace(self, **kw):
        args = dict(holo=self.holo, poles=self.poles, order=self.order, base=self.base,
                    strip=self.strip)
        args.update(kw)
        return MeromorphicSymbol(**args)

    # -- evaluation ---------------------------------------------------------
    def eval_many(self, z, pole_tol=1e-12, diagonal=None):
        z = np.asarray(z, dtype=complex)
        for b in self.poles:
            if np.any(np.abs(z - b.p) <= pole_tol):
                raise EvalAtPole(f"evaluation at the pole {b.p}")
        diag = self.is_diagonal if diagonal is None else diagonal
        if diag:
            idx = np.arange(self.dim)
            out = np.zeros(z.shape + (self.dim,), complex)
            for hj in self.holo[::-1]:
                out = out * z[..., None] + hj[idx, idx]
            for b in self.poles:
                w = z - b.p
                for k, ck in enumerate(b.coeffs):
                    out += np.multiply.outer(w ** (-(k + 1)), ck[idx, idx])
            return out
        out = np.zeros(z.shape + (self.dim, self.dim), complex)
        for hj in self.holo[::-1]:
            out = out * z[..., None, None] + hj
        for b in self.poles:
            out += b(z)
        return out

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.eval_many(z, diagonal=False)

    # -- algebra ------------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, other * -1)

    def __mul__(self, c):
        if isinstance(c, MeromorphicSymbol):
            return multiply(self, c)
        return self.replace(holo=self.holo * c,
                            poles=tuple(LaurentBlock(b.p, b.coeffs * c) for b in self.poles))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return multiply(self, other)

    def pruned(self, tol=PRUNE_TOL):
        return _canonical(self.holo, [(b.p, b.coeffs) for b in self.poles], self, tol=tol)

    def allclose(self, other, atol=1e-12):
        """Coefficientwise comparison after canonical pruning."""
        a, b = self.pruned(), other.pruned()
        if a.dim != b.dim or len(a.poles) != len(b.poles):
            return False
        n = max(len(a.holo), len(b.holo))
        ha, hb = _pad(a.holo, n), _pad(b.holo, n)
        if not np.allclose(ha, hb, atol=atol, rtol=0):
            return False
        used = set()
        for ba in a.poles:
            match = [i for i, bb in enumerate(b.poles)
                     if i not in used and abs(bb.p - ba.p) <= max(atol, MERGE_TOL)]
            if not match:
                return False
            bb = b.poles[match[0]]
            used.add(match[0])
            m = max(len(ba.coeffs), len(bb.coeffs))
            if not np.allclose(_pad(ba.coeffs, m), _pad(bb.coeffs, m), atol=atol, rtol=0):
                return False
        return True

    # -- serialisation ------------------------------------------------------
    def to_dict(self):
        return {
            "order": _jnum(self.order),
            "base": None if self.base is None else self.base.to_dict(),
            "holo": [_jmat(h) for h in self.holo],
            "poles": [{"p": [b.p.real, b.p.imag], "m": b.m, "coeffs": [_jmat(c) for c in b.coeffs]}
                      for b in self.poles],
            "strip": [_jnum(self.strip[0]), _jnum(self.strip[1])],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        base = None if d.get("base") is None else BaseModel(**d["base"])
        holo = np.array([_unjmat(h) for h in d["holo"]])
        poles = tuple(LaurentBlock(complex(*b["p"]), np.array([_unjmat(c) for c in b["coeffs"]]))
                      for b in d.get("poles", []))
        strip = tuple(_unjnum(s) for s in d.get("strip", ["-inf", "inf"]))
        return cls(holo, poles, _unjnum(d.get("order", 0.0)), base, strip)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _jnum(x):
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unjnum(x):
    return float(x)


def _jmat(a):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(a)]


def _unjmat(a):
    arr = np.asarray(a, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _pad(a, n):
    if len(a) >= n:
        return a
    return np.concatenate([a, np.zeros((n - len(a),) + a.shape[1:], complex)])


def _canonical(holo, blocks, like, tol=PRUNE_TOL, order=None, strip=None):
    """Merge coincident poles, drop negligible trailing coefficients."""
    holo = np.asarray(holo, complex)
    merged = []
    for p, c in blocks:
        c = np.asarray(c, complex)
        for item in merged:
            if abs(item[0] - p) <= MERGE_TOL:
                n = max(len(item[1]), len(c))
                item[1] = _pad(item[1], n) + _pad(c, n)
                break
        else:
            merged.append([complex(p), c.copy()])
    scale = max([1.0, np.abs(holo).max(initial=0)] + [np.abs(c).max(initial=0) for _, c in merged])
    thr = tol * scale
    while len(holo) > 1 and np.abs(holo[-1]).max() <= thr:
        holo = holo[:-1]
    kept = []
    for p, c in merged:
        while len(c) and np.abs(c[-1]).max() <= thr:
            c = c[:-1]
        if len(c):
            kept.append(LaurentBlock(p, c))
    kept.sort(key=lambda b: (-b.p.real, -b.p.imag))
    return MeromorphicSymbol(holo, tuple(kept), like.order if order is None else order,
                             like.base, like.strip if strip is None else strip)


def _check_pair(f, g):
    if f.dim != g.dim or (f.base is not None and g.base is not None and f.base != g.base):
        raise BaseMismatch("symbols act on different base models")
    lo, hi = max(f.strip[0], g.strip[0]), min(f.strip[1], g.strip[1])
    if lo > hi:
        raise StripMismatch(f"strips {f.strip} and {g.strip} do not overlap")
    return (lo, hi), f.base if f.base is not None else g.base


def add(f, g):
    strip, base = _check_pair(f, g)
    n = max(len(f.holo), len(g.holo))
    blocks = [(b.p, b.coeffs) for b in f.poles] + [(b.p, b.coeffs) for b in g.poles]
    like = f.replace(base=base)
    return _canonical(_pad(f.holo, n) + _pad(g.holo, n), blocks, like,
                      order=max(f.order, g.order), strip=strip)


def _taylor_at(holo, p):
    """Coefficients F_j of sum_i h_i z^i = sum_j F_j (z - p)^j."""
    D = len(holo)
    F = np.zeros_like(holo)
    for j in range(D):
        for i in range(j, D):
            F[j] += comb(i, j) * p ** (i - j) * holo[i]
    return F


def _monomial_shift(e, p, dim):
    """(z - p)^e expanded in powers of z, as scalar weights."""
    return np.array([comb(e, i) * (-p) ** (e - i) for i in range(e + 1)], complex)


def _gbinom_neg(b, j):
    # binomial(-b, j)
    return (-1) ** j * comb(b + j - 1, j)


def multiply(f: MeromorphicSymbol, g: MeromorphicSymbol) -> MeromorphicSymbol:
    """Exact product f(z) g(z) (matrix order kept)."""
    strip, base = _check_pair(f, g)
    d = f.dim
    nf, ng = len(f.holo), len(g.holo)
    poly = np.zeros((nf + ng - 1, d, d), complex)
    for i in range(nf):
        for j in range(ng):
            poly[i + j] += f.holo[i] @ g.holo[j]
    blocks = []

    def poly_times_block(P, blk, left):
        # P(z) * blk (left=True) or blk * P(z)
        F = _taylor_at(P, blk.p)
        out = np.zeros((blk.m + 1, d, d), complex)
        extra = np.zeros((max(len(F) - 1, 1), d, d), complex)
        for j, Fj in enumerate(F):
            if not np.any(Fj):
                continue
            for k, ck in enumerate(blk.coeffs):
                prod = Fj @ ck if left else ck @ Fj
                e = j - k - 1
                if e < 0:
                    out[k - j] += prod
                else:
                    w = _monomial_shift(e, blk.p, d)
                    extra[:e + 1] += w[:, None, None] * prod
        blocks.append((blk.p, out))
        return extra

    for blk in g.poles:
        e = poly_times_block(f.holo, blk, True)
        poly = _pad(poly, len(e))
        poly[:len(e)] += e
    for blk in f.poles:
        e = poly_times_block(g.holo, blk, False)
        poly = _pad(poly, len(e))
        poly[:len(e)] += e
    for A in f.poles:
        for B in g.poles:
            p, q = A.p, B.p
            if abs(p - q) <= MERGE_TOL:
                out = np.zeros((A.m + B.m + 2, d, d), complex)
                for k, ck in enumerate(A.coeffs):
                    for l, dl in enumerate(B.coeffs):
                        out[k + l + 1] += ck @ dl
                blocks.append((p, out))
                continue
            at_p = np.zeros((A.m + 1, d, d), complex)
            at_q = np.zeros((B.m + 1, d, d), complex)
            for k, ck in enumerate(A.coeffs):
                a = k + 1
                for l, dl in enumerate(B.coeffs):
                    b = l + 1
                    prod = ck @ dl
                    for j in range(a):
                        at_p[k - j] += _gbinom_neg(b, j) * (p - q) ** (-b - j) * prod
                    for j in range(b):
                        at_q[l - j] += _gbinom_neg(a, j) * (q - p) ** (-a - j) * prod
            blocks.append((p, at_p))
            blocks.append((q, at_q))
    like = f.replace(base=base)
    return _canonical(poly, blocks, like, order=f.order + g.order, strip=strip)


def translate(f: MeromorphicSymbol, beta: float) -> MeromorphicSymbol:
    """(T^beta f)(z) = f(z + beta)."""
    if beta == 0:
        return f
    D = len(f.holo)
    h = np.zeros_like(f.holo)
    for i in range(D):
        for j in range(i, D):
            h[i] += comb(j, i) * beta ** (j - i) * f.holo[j]
    poles = tuple(LaurentBlock(b.p - beta, b.coeffs, b.rank_bound) for b in f.poles)
    return f.replace(holo=h, poles=poles, strip=(f.strip[0] - beta, f.strip[1] - beta))


def eval(f: MeromorphicSymbol, z, pole_tol=1e-12):
    """Single-point evaluation, returning a dim x dim matrix."""
    return f.eval_many(np.asarray(complex(z)), pole_tol=pole_tol, diagonal=False)


# ---------------------------------------------------------------------------
# argument principle

def _as_matrix_fn(f):
    """Wrap f so that it returns (K, d, d) for an array of points."""
    if isinstance(f, MeromorphicSymbol):
        return lambda z: f.eval_many(z, pole_tol=0.0, diagonal=False)

    def wrapped(z):
        z = np.asarray(z, complex)
        try:
            v = np.asarray(f(z), complex)
            if v.shape[:1] != z.shape:
                raise ValueError
        except Exception:
            v = np.array([np.asarray(f(complex(zz)), complex) for zz in z])
        if v.ndim == 1:
            v = v[:, None, None]
        return v
    return wrapped


class _LogDet:
    """log det of a matrix function, optionally times prod (z - p)^e to clear poles."""

    def __init__(self, fn, clear=()):
        self.fn = fn
        self.clear = list(clear)
        self.nevals = 0

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        vals = self.fn(z)
        self.nevals += len(z)
        if vals.shape[1] == 1:
            v = vals[:, 0, 0]
            with np.errstate(divide="ignore"):
                out = np.log(np.abs(v)) + 1j * np.angle(v)
        else:
            sign, logabs = np.linalg.slogdet(vals)
            out = logabs + 1j * np.angle(sign)
        for p, e in self.clear:
            out = out + e * np.log(z - p)
        return out


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


class _NearZero(Exception):
    pass


def _edge_phase_change(logdet, a, b, nodes, max_refine=40):
    """Total change of arg along the segment a -> b with adaptive insertion."""
    s = np.linspace(0.0, 1.0, nodes)
    vals = logdet(a + (b - a) * s)
    if not np.all(np.isfinite(vals)):
        raise _NearZero
    total = 0.0
    stack = [(s[i], s[i + 1], vals[i], vals[i + 1], 0) for i in range(nodes - 1)]
    while stack:
        s0, s1, v0, v1, depth = stack.pop()
        dphi = _wrap(v1.imag - v0.imag)
        if abs(dphi) <= np.pi / 4:
            total += dphi
            continue
        if depth >= max_refine:
            raise _NearZero
        sm = 0.5 * (s0 + s1)
        vm = logdet(np.array([a + (b - a) * sm]))[0]
        if not np.isfinite(vm):
            raise _NearZero
        stack.append((s0, sm, v0, vm, depth + 1))
        stack.append((sm, s1, vm, v1, depth + 1))
    return total


def _winding(logdet, rect, nodes):
    x0, x1, y0, y1 = rect
    c = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    tot = sum(_edge_phase_change(logdet, c[i], c[(i + 1) % 4], nodes) for i in range(4))
    w = tot / (2 * np.pi)
    if abs(w - round(w)) > 0.1:
        raise _NearZero
    return int(round(w))


def _polish(logdet, z0, mult, rect, scale, maxit=80):
    """Modified Newton z <- z - m g/g' on g = det f.

    g'/g comes from a central difference of ratios exp(L(z +- h) - L(z)),
    so only log det values are needed and no phase unwrapping is involved.
    """
    z = complex(z0)
    prev = np.inf
    x0, x1, y0, y1 = rect
    pad = 0.5 * max(x1 - x0, y1 - y0)
    for _ in range(maxit):
        h = 1e-7 * max(min(scale, 1.0), abs(z) * 1e-3, 1e-6)
        L = logdet(np.array([z, z + h, z - h]))
        if not np.isfinite(L[0]):
            return z, True          # landed on the zero
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = np.exp(L[1:] - L[0])
        dg = (ratio[0] - ratio[1]) / (2 * h)
        if not np.isfinite(dg):
            return z, True
        if dg == 0:
            break
        new = mult / dg
        if abs(new) >= abs(prev) and abs(prev) <= 1e-9 * max(1.0, abs(z)):
            return z, True          # stagnated at rounding level
        z = z - new
        prev = abs(new)
        if prev <= 1e-15 * max(1.0, abs(z)):
            return z, True
        if not (x0 - pad <= z.real <= x1 + pad and y0 - pad <= z.imag <= y1 + pad):
            return z, False
    return z, prev <= 1e-9 * max(1.0, abs(z))


_SPLITS = (0.4837, 0.5371, 0.4419, 0.5683, 0.4109)


def _split_order(logdet, rect, nodes):
    x0, x1, y0, y1 = rect
    s = np.linspace(0.0, 1.0, nodes)
    score = []
    for ratio in _SPLITS:
        if x1 - x0 >= y1 - y0:
            z = x0 + ratio * (x1 - x0) + 1j * (y0 + (y1 - y0) * s)
        else:
            z = x0 + (x1 - x0) * s + 1j * (y0 + ratio * (y1 - y0))
        v = logdet(z).real
        score.append(v.min() if np.all(np.isfinite(v)) else -np.inf)
    return [_SPLITS[i] for i in np.argsort(score)[::-1]]


def _find_zeros(logdet, rect, nodes, max_depth, cluster_size):
    found = []
    x0, x1, y0, y1 = rect
    try:
        w = _winding(logdet, rect, nodes)
    except _NearZero:
        raise ContourThroughZero(f"det vanishes on the boundary of {rect}")
    stack = [(rect, w, 0)]
    while stack:
        (x0, x1, y0, y1), w, depth = stack.pop()
        if w == 0:
            continue
        if w < 0:
            raise ContourThroughZero(f"negative winding {w} in {(x0, x1, y0, y1)}; function not analytic")
        size = max(x1 - x0, y1 - y0)
        centre = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        if w == 1 or depth >= max_depth or size <= cluster_size:
            z, ok = _polish(logdet, centre, w, (x0, x1, y0, y1), size)
            inside = x0 - 1e-9 * size <= z.real <= x1 + 1e-9 * size and \
                y0 - 1e-9 * size <= z.imag <= y1 + 1e-9 * size
            if ok and inside:
                found.append((z, w))
                continue
            if depth >= max_depth or size <= cluster_size:
                raise ContourThroughZero(f"could not isolate {w} zero(s) in {(x0, x1, y0, y1)}")
        # subdivide along the longer side, off centre to dodge symmetric roots;
        # among the candidate cuts prefer the one where |det| stays largest,
        # since a cut grazing a multiple zero can alias the phase count
        for ratio in _split_order(logdet, (x0, x1, y0, y1), nodes):
            if x1 - x0 >= y1 - y0:
                xm = x0 + ratio * (x1 - x0)
                kids = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
            else:
                ym = y0 + ratio * (y1 - y0)
                kids = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
            try:
                w0 = _winding(logdet, kids[0], nodes)
                w1 = _winding(logdet, kids[1], nodes)
            except _NearZero:
                continue
            # an edge grazing a multiple zero can alias the phase; the two
            # halves must add up to the parent count
            if w0 < 0 or w1 < 0 or w0 + w1 != w:
                continue
            stack.append((kids[0], w0, depth + 1))
            stack.append((kids[1], w1, depth + 1))
            break
        else:
            raise ContourThroughZero(f"no admissible subdivision of {(x0, x1, y0, y1)}")
    return found


def _blocks_of(fn, rect, dim):
    """Connected components of the sparsity pattern, sampled at a few points."""
    if dim == 1:
        return [np.arange(1)]
    x0, x1, y0, y1 = rect
    rng = np.random.default_rng(12345)
    pts = x0 + (x1 - x0) * rng.random(3) + 1j * (y0 + (y1 - y0) * rng.random(3))
    pattern = np.zeros((dim, dim), bool)
    for v in fn(pts):
        pattern |= np.abs(v) > 0
    pattern |= pattern.T
    ncomp, labels = connected_components(pattern, directed=False)
    return [np.flatnonzero(labels == c) for c in range(ncomp)]


def _restrict(f: MeromorphicSymbol, idx):
    """The diagonal block f[idx, idx] as a symbol of its own."""
    ix = np.ix_(idx, idx)
    holo = np.asarray(f.holo)[(slice(None),) + ix]
    poles = tuple(LaurentBlock(b.p, np.asarray(b.coeffs)[(slice(None),) + ix]) for b in f.poles)
    return MeromorphicSymbol(holo, poles, f.order, None, f.strip)


def _merge_roots(roots, tol):
    out = []
    for z, m in sorted(roots, key=lambda r: (r[0].real, r[0].imag)):
        for item in out:
            if abs(item[0] - z) <= tol:
                item[1] += m
                break
        else:
            out.append([z, m])
    return [(z, m) for z, m in out]


def _tiles(rect):
    x0, x1, y0, y1 = rect
    w, h = x1 - x0, y1 - y0
    nx = max(1, int(np.ceil(w / h - 1e-12))) if w > h else 1
    ny = max(1, int(np.ceil(h / w - 1e-12))) if h > w else 1
    # interior tile edges are pushed off the symmetric positions (real axis etc.)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xs[1:-1] += 0.1037 * w / nx
    ys[1:-1] += 0.1037 * h / ny
    return [(xs[i], xs[i + 1], ys[j], ys[j + 1]) for i in range(nx) for j in range(ny)]


def locate_singularities(f, strip, resolution=256, im_range=(-20.0, 20.0), max_depth=60,
                         cluster_size=1e-6, split_blocks=True):
    """Zeros of det f in the rectangle strip x im_range, with multiplicities.

    f is a MeromorphicSymbol or a callable returning matrices (or scalars).
    Poles of a MeromorphicSymbol are cleared before counting.  Returns a list
    of (z, multiplicity) sorted by real then imaginary part.
    """
    rect = (float(strip[0]), float(strip[1]), float(im_range[0]), float(im_range[1]))
    fn = _as_matrix_fn(f)
    dim = fn(np.array([complex(rect[0], rect[2])])).shape[1]
    comps = _blocks_of(fn, rect, dim) if split_blocks else [np.arange(dim)]
    roots = []
    for comp in comps:
        if len(comps) == 1:
            sub = fn
        elif isinstance(f, MeromorphicSymbol):
            sub = _as_matrix_fn(_restrict(f, comp))
        else:
            sub = (lambda idx: lambda z: fn(z)[:, idx[:, None], idx[None, :]])(comp)
        clear = []
        if isinstance(f, MeromorphicSymbol):
            for b in f.poles:
                clear.append((b.p, len(comp) * (b.m + 1)))
        logdet = _LogDet(sub, clear)
        for tile in _tiles(rect):
            roots += _find_zeros(logdet, tile, resolution, max_depth, cluster_size)
    roots = _merge_roots(roots, MERGE_TOL)
    if isinstance(f, MeromorphicSymbol) and f.poles:
        # zeros sitting on a pole of f come from clearing the pole; det f is
        # not defined there and the caller inspects such points separately
        roots = [(z, m) for z, m in roots
                 if all(abs(z - p) > MERGE_TOL for p in f.pole_locations())]
    return roots


# ---------------------------------------------------------------------------
# Laurent data

def _circle_values(f, p, radius, N):
    theta = 2 * np.pi * np.arange(N) / N
    z = p + radius * np.exp(1j * theta)
    return theta, _as_matrix_fn(f)(z)


def laurent_coefficients(f, p, radius, K, N=128):
    """c_k = (1/2 pi i) oint f(z) (z-p)^k dz for k = 0..K-1 (trapezoid rule)."""
    theta, vals = _circle_values(f, p, radius, N)
    ks = np.arange(K)
    w = (radius ** (ks[:, None] + 1)) * np.exp(1j * np.outer(ks + 1, theta)) / N
    return np.einsum("kj,jab->kab", w, vals)


def laurent_extract(f, p, m, radius, N=128, tail=3, tail_tol=1e-8, check_radius=True):
    """Principal part of f at p, assuming a pole of order at most m+1.

    Raises ContaminatedDisk when coefficients beyond m do not vanish or when
    a half radius gives different data, both signs of another singularity
    (or a higher order) inside the circle.
    """
    c = laurent_coefficients(f, p, radius, m + 1 + tail, N)
    scale = max(np.abs(c[:m + 1]).max(initial=0), 1e-300)
    tail_mag = np.abs(c[m + 1:]).max(initial=0)
    ref = max(scale, 1.0)
    if tail_mag > tail_tol * ref:
        raise ContaminatedDisk(f"Laurent data at {p} has nonzero coefficients beyond order {m + 1}")
    if check_radius:
        c2 = laurent_coefficients(f, p, radius / 2, m + 1, N)
        if np.abs(c2 - c[:m + 1]).max() > 1e-7 * ref:
            raise ContaminatedDisk(f"Laurent data at {p} depends on the radius")
    return LaurentBlock(p, c[:m + 1])


def laurent_order(f, p, radius, kmax=8, N=128, tol=1e-9):
    """Order of the pole at p fitted from the decay of the Laurent coefficients."""
    c = laurent_coefficients(f, p, radius, kmax + 1, N)
    mags = np.abs(c).reshape(len(c), -1).max(axis=1)
    scale = mags.max()
    if scale == 0:
        return 0
    nz = np.flatnonzero(mags > tol * scale)
    return int(nz[-1]) + 1 if len(nz) else 0


# ---------------------------------------------------------------------------
# inversion

def _invertibility_radius(h: MeromorphicSymbol):
    """R such that h(z) is invertible for all |z| >= R (Neumann series bound)."""
    H = h.holo[-1]
    try:
        Hinv = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        raise NotElliptic("leading coefficient of the symbol is singular")
    if np.linalg.cond(H) > 1e12:
        raise NotElliptic("leading coefficient of the symbol is numerically singular")
    D = h.degree
    lower = [np.linalg.norm(Hinv @ hj, 2) for hj in h.holo[:-1]]
    pmax = max([abs(b.p) for b in h.poles], default=0.0)
    pnorms = [(b.p, [np.linalg.norm(Hinv @ ck, 2) for ck in b.coeffs]) for b in h.poles]

    def bound(R):
        s = sum(a * R ** (j - D) for j, a in enumerate(lower))
        for p, ns in pnorms:
            s += sum(nk / (R - abs(p)) ** (k + 1) for k, nk in enumerate(ns)) * R ** (-D)
        return s

    R = max(1.0, 2 * pmax + 1.0)
    while bound(R) >= 0.5:
        R *= 2
        if R > 1e8:
            raise NotElliptic("could not bound the zeros of det h")
    return R


def invert_elliptic(h: MeromorphicSymbol, strip=None, probes=20, resolution=256,
                    fit_degree=None, tol=1e-8):
    """h^(-1) as a MeromorphicSymbol.

    All zeros of det h are located inside the disk where invertibility is not
    guaranteed by a Neumann bound; principal parts come from contour
    quadrature and the holomorphic remainder is fitted by least squares.
    """
    if strip is None:
        strip = h.strip
    R = _invertibility_radius(h)
    box = 1.05 * R
    roots = locate_singularities(h, (-box, box), resolution=resolution, im_range=(-box, box))
    for z, _ in roots:
        for edge in strip:
            if np.isfinite(edge) and abs(z.real - edge) <= 1e-9:
                raise PoleOnStripBoundary(f"pole {z} of the inverse lies on the strip boundary")
    cands = [(z, m) for z, m in roots]
    for b in h.poles:
        if all(abs(b.p - z) > MERGE_TOL for z, _ in cands):
            cands.append((b.p, h.dim * (b.m + 1)))
    pts = [z for z, _ in cands] + [b.p for b in h.poles]

    def inv_fn(z):
        return np.linalg.inv(h.eval_many(z, pole_tol=0.0, diagonal=False))

    blocks = []
    for z, mult in cands:
        others = [abs(z - q) for q in pts if abs(z - q) > MERGE_TOL]
        rad = 0.4 * min(others) if others else 0.5
        rad = min(rad, 0.5)
        blk = laurent_extract(inv_fn, z, mult - 1, rad)
        blocks.append((blk.p, blk.coeffs))
    principal = _canonical(np.zeros((1, h.dim, h.dim)), blocks,
                           MeromorphicSymbol.zero(h.dim, h.base))
    # holomorphic remainder: bounded at infinity, fitted on a large circle
    deg = max(h.degree, 0) if fit_degree is None else fit_degree
    K = max(4 * (deg + 1), 32)
    zc = 2 * R * np.exp(2j * np.pi * (np.arange(K) + 0.5) / K)
    resid = inv_fn(zc) - principal.eval_many(zc, diagonal=False)
    V = np.vander(zc, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, resid.reshape(K, -1), rcond=None)
    holo = coef.reshape(deg + 1, h.dim, h.dim)
    out = _canonical(holo, [(b.p, b.coeffs) for b in principal.poles],
                     h.replace(strip=strip), tol=1e-12, order=-h.order, strip=strip)
    # a posteriori check at probe points
    rng = np.random.default_rng(7)
    zp = R * (rng.uniform(-1, 1, probes) + 1j * rng.uniform(-1, 1, probes))
    err = _probe_error(out, h, zp)
    out.info.update({"roots": roots, "radius": R, "probe_error": err})
    if err > tol:
        raise NotElliptic(f"inverse residual {err:.2e} at probes exceeds {tol:.1e}")
    return out


def _probe_error(a, b, zp):
    far = [z for z in zp if all(abs(z - q) > 1e-3 for q in a.pole_locations() + b.pole_locations())]
    zp = np.array(far)
    prod = np.einsum("kij,kjl->kil", a.eval_many(zp, diagonal=False), b.eval_many(zp, diagonal=False))
    return float(np.abs(prod - np.eye(a.dim)).max())


def invert_one_plus(f: MeromorphicSymbol, beta=0.5, line_halfwidth=50.0, line_tol=1e-8):
    """l with (1 + f)(1 + l) = 1 for a smoothing symbol f."""
    one = MeromorphicSymbol.identity(f.dim, f.base, f.strip)
    h = add(one, f)
    if beta is not None:
        zl = beta + 1j * np.linspace(-line_halfwidth, line_halfwidth, 401)
        if not any(np.min(np.abs(zl - p)) < 1e-12 for p in h.pole_locations()):
            sv = np.linalg.svd(h.eval_many(zl, diagonal=False), compute_uv=False)
            if sv.min() < line_tol:
                raise NotInvertibleOnLine(f"1 + f is not invertible on Re z = {beta}")
        else:
            raise NotInvertibleOnLine(f"f has a pole on Re z = {beta}")
    hinv = invert_elliptic(h)
    l = add(hinv, one * -1)
    l = l.replace(order=-INF)
    l.info.update(hinv.info)
    return l


# ---------------------------------------------------------------------------
# conormal sequences and the Mellin translation product

@dataclass(frozen=True, eq=False)
class ConormalSequence:
    """Terms sigma_c^(mu - j), j = 0..k."""
    mu: float
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a conormal sequence needs at least one term")
        d = terms[0].dim
        for t in terms:
            if t.dim != d:
                raise BaseMismatch("conormal terms act on different bases")
        object.__setattr__(self, "terms", terms)

    @property
    def k(self):
        return len(self.terms) - 1

    @property
    def dim(self):
        return self.terms[0].dim

    @property
    def base(self):
        return self.terms[0].base

    @classmethod
    def identity(cls, dim=1, k=0, base=None):
        terms = [MeromorphicSymbol.identity(dim, base)] + [MeromorphicSymbol.zero(dim, base)] * k
        return cls(0.0, terms)

    @classmethod
    def zero(cls, dim=1, k=0, base=None, mu=0.0):
        return cls(mu, [MeromorphicSymbol.zero(dim, base)] * (k + 1))

    def one_plus(self):
        """The sequence of 1 + A for A given by its own terms."""
        t = list(self.terms)
        t[0] = add(MeromorphicSymbol.identity(self.dim, self.base), t[0])
        return ConormalSequence(0.0, t)

    def minus_one(self):
        t = list(self.terms)
        t[0] = add(t[0], MeromorphicSymbol.identity(self.dim, self.base) * -1)
        return ConormalSequence(0.0, t)

    def allclose(self, other, atol=1e-12):
        return (self.k == other.k and self.mu == other.mu
                and all(a.allclose(b, atol) for a, b in zip(self.terms, other.terms)))

    def to_dict(self):
        return {"mu": self.mu, "terms": [t.to_dict() for t in self.terms]}


def translation_product(A: ConormalSequence, B: ConormalSequence) -> ConormalSequence:
    """sigma^(mu+nu-l)(AB) = sum_{i+j=l} (T^(nu-i) A_j) B_i."""
    if A.dim != B.dim or (A.base is not None and B.base is not None and A.base != B.base):
        raise BaseMismatch("conormal sequences act on different bases")
    k = min(A.k, B.k)
    nu = B.mu
    terms = []
    for l in range(k + 1):
        acc = MeromorphicSymbol.zero(A.dim, A.base)
        for i in range(l + 1):
            j = l - i
            acc = add(acc, multiply(translate(A.terms[j], nu - i), B.terms[i]))
        terms.append(acc.replace(order=A.mu + B.mu - l))
    return ConormalSequence(A.mu + B.mu, terms)


def invert_conormal_sequence(A: ConormalSequence, gamma=0.0, n=None) -> ConormalSequence:
    """B with (1 + A)(1 + B) = 1 under the translation product, up to depth k.

    Input and output hold the A and B parts: term 0 is f_0 (not 1 + f_0).
    """
    if n is None:
        n = A.base.n if A.base is not None else 0
    beta = (n + 1) / 2 - gamma
    full = A.one_plus()
    try:
        l0 = invert_one_plus(A.terms[0], beta=beta)
    except NotInvertibleOnLine as exc:
        raise ConormalNotBijective(str(exc)) from exc
    B0 = add(MeromorphicSymbol.identity(A.dim, A.base), l0)
    for p in B0.pole_locations():
        if abs(p.real - beta) < 1e-9:
            raise ConormalNotBijective(f"level-0 inverse has a pole {p} on Re z = {beta}")
    Bfull = [B0]
    for l in range(1, A.k + 1):
        acc = MeromorphicSymbol.zero(A.dim, A.base)
        for i in range(l):
            acc = add(acc, multiply(translate(full.terms[l - i], -i), Bfull[i]))
        Bl = multiply(translate(B0, -l), acc) * -1
        Bfull.append(Bl.replace(order=-float(l)))
    terms = [l0] + Bfull[1:]
    return ConormalSequence(0.0, terms)
