"""Norms and pairings for weighted cone spaces.

The Mellin-side norm of order s and weight gamma is

    ||u||^2 = (1/2pi) sum_k w_k int (multiplier)(rho, k) |Mu_k(beta + i rho)|^2 drho,

beta = (n+1)/2 - gamma, with w_k the measure of a Fourier mode on X.  For
s = 0 and gamma = 0 Parseval turns this into int |u|^2 r^n dr dx.  The
multiplier depends on Im z only, so r^gamma intertwines weights exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .asymptotics import WeightData
from .errors import GridMismatch, WindowTruncation
from .mellin_core import (BOUNDARY_TOL, WeightedGridFunction, cutoff, dilate,
                          mellin_forward)

VARIANTS = ("bracket", "linear")


@dataclass(frozen=True)
class NormSpec:
    s: float = 0.0
    gamma: float = 0.0
    g: float = 0.0
    variant: str = "bracket"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown multiplier variant {self.variant!r}")
        if not all(np.isfinite([self.s, self.gamma, self.g])):
            raise ValueError("norm parameters must be finite")


def multiplier(rho, k, s, variant="bracket"):
    rho = np.asarray(rho, float)[:, None]
    k = np.asarray(k, float)[None, :]
    if variant == "bracket":
        return (1.0 + rho ** 2 + k ** 2) ** s
    if variant == "linear":
        return (1.0 + np.abs(rho) + np.abs(k)) ** (2 * s)
    raise ValueError(f"unknown multiplier variant {variant!r}")


def _mode_weights(u):
    return np.full(u.base.dim, u.base.weight)


def hs_gamma_norm(u: WeightedGridFunction, s=0.0, gamma=None, variant="bracket",
                  tol=BOUNDARY_TOL):
    """Mellin-side norm of order s in the weight gamma (default: u.gamma)."""
    gamma = u.gamma if gamma is None else gamma
    if not np.any(u.values):
        return 0.0
    beta = (u.n + 1) / 2 - gamma
    spec = mellin_forward(u, beta, tol)
    m = multiplier(spec.rho, u.base.modes, s, variant)
    dens = (m * np.abs(spec.values) ** 2) @ _mode_weights(u)
    return float(np.sqrt(u.grid.drho * dens.sum() / (2 * np.pi)))


def _partition(r, cut):
    w = cutoff(r, *cut)
    den = np.sqrt(w ** 2 + (1 - w) ** 2)
    return w / den, (1 - w) / den


def ksg_norm(u: WeightedGridFunction, s=0.0, gamma=None, g=0.0, variant="bracket",
             cut=(0.5, 2.0 / 3.0), tol=BOUNDARY_TOL):
    """Norm of the cone space with exit weight g.

    u is split with phi0 = omega / sqrt(omega^2 + (1-omega)^2) and
    phi1 = (1-omega) / sqrt(...), so phi0^2 + phi1^2 = 1.  The tip part uses
    the weighted Mellin norm; the exit part is the order-s log-grid norm of
    <r>^g phi1 u without weight, which lives on r >= cut[0].
    """
    gamma = u.gamma if gamma is None else gamma
    r = u.grid.r
    p0, p1 = _partition(r, cut)
    tip = u.multiply(p0)
    ex = u.multiply(p1 * (1 + r ** 2) ** (g / 2))
    a = hs_gamma_norm(tip, s, gamma, variant, tol) if np.any(tip.values) else 0.0
    b = hs_gamma_norm(ex, s, 0.0, variant, tol) if np.any(ex.values) else 0.0
    return float(np.hypot(a, b))


def flatness_profile(u: WeightedGridFunction, weight: WeightData, m_max=5, s=0.0,
                     variant="bracket", tol=BOUNDARY_TOL):
    """Norms at the weights gamma - theta - 1/(m+1), m = 0..m_max.

    A norm that cannot be resolved on the window (the weighted samples do
    not decay at the ends) is reported as inf.
    """
    if not np.isfinite(weight.theta):
        raise ValueError("flatness profile needs a finite theta")
    out = []
    for m in range(m_max + 1):
        gam = weight.gamma - weight.theta - 1.0 / (m + 1)
        try:
            out.append(hs_gamma_norm(u, s, gam, variant, tol))
        except WindowTruncation:
            out.append(np.inf)
    return out


def pairing(u: WeightedGridFunction, v: WeightedGridFunction):
    """int u conj(v) r^n dr dx by the trapezoid rule in t (dr = r dt)."""
    if u.grid != v.grid or u.base != v.base:
        raise GridMismatch("pairing needs functions on the same grid and base")
    r = u.grid.r
    dens = (u.values * np.conj(v.values)) @ _mode_weights(u)
    return complex(u.grid.dt * np.sum(dens * r ** (u.n + 1)))


def kappa(u: WeightedGridFunction, lam, g=0.0, tol=BOUNDARY_TOL):
    """Group action lam^((n+1)/2 + g) u(lam r, x)."""
    return dilate(u, lam, g, tol=tol)


def gram_matrix(funcs):
    return np.array([[pairing(a, b) for b in funcs] for a in funcs])


def variant_ratio(funcs, s, gamma=0.0):
    """Max and min of bracket/linear norm ratios over a family."""
    r = [hs_gamma_norm(u, s, gamma, "bracket") / hs_gamma_norm(u, s, gamma, "linear")
         for u in funcs]
    return float(min(r)), float(max(r))


def weighted_l2(u: WeightedGridFunction, gamma=None):
    """The s = 0 norm as a plain trapezoid sum (no window check needed)."""
    gamma = u.gamma if gamma is None else gamma
    beta = (u.n + 1) / 2 - gamma
    w = np.abs(u.values * np.exp(beta * u.grid.t)[:, None]) ** 2 @ _mode_weights(u)
    return float(np.sqrt(u.grid.dt * w.sum()))


def norm(u: WeightedGridFunction, spec: NormSpec):
    return ksg_norm(u, spec.s, spec.gamma, spec.g, spec.variant)
