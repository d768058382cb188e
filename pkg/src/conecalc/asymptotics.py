"""Discrete asymptotic types and their weight data."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

EQ_TOL = 1e-9
NEG_INF = float("-inf")


@dataclass(frozen=True)
class WeightData:
    """Weight gamma, interval Theta = (theta, 0] and dim X = n."""
    gamma: float = 0.0
    theta: float = NEG_INF
    n: int = 0

    def __post_init__(self):
        if not self.theta < 0:
            raise ValueError("theta must be negative (or -inf)")

    @property
    def line(self):
        """Real part of the weight line (n+1)/2 - gamma."""
        return (self.n + 1) / 2 - self.gamma

    @property
    def strip(self):
        return (self.line + self.theta, self.line)

    def to_dict(self):
        return {"gamma": self.gamma, "theta": "-inf" if np.isinf(self.theta) else self.theta,
                "n": self.n}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["gamma"]), float(d.get("theta", NEG_INF)), int(d.get("n", 0)))


def _merge(pairs):
    out = []
    for p, m in pairs:
        p = complex(p)
        for item in out:
            if abs(item[0] - p) <= EQ_TOL:
                item[1] = max(item[1], int(m))
                break
        else:
            out.append([p, int(m)])
    out.sort(key=lambda x: (-x[0].real, -x[0].imag))
    return tuple((p, m) for p, m in out)


@dataclass(frozen=True)
class DiscreteAsymptoticType:
    """Finite set of pairs (p_j, m_j) attached to weight data.

    Pairs at the same p (within 1e-9) are merged keeping the larger m, and
    stored by decreasing Re p, then Im p.
    """
    pairs: tuple = ()
    weight: WeightData = WeightData()

    def __post_init__(self):
        for _, m in self.pairs:
            if int(m) < 0:
                raise ValueError("log multiplicities must be nonnegative")
        object.__setattr__(self, "pairs", _merge(self.pairs))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def poles(self):
        return [p for p, _ in self.pairs]

    def same_as(self, other, tol=EQ_TOL):
        if len(self.pairs) != len(other.pairs):
            return False
        return all(abs(p - q) <= tol and m == n for (p, m), (q, n) in zip(self.pairs, other.pairs))

    def issubset(self, other, tol=1e-6):
        """Every (p, m) here has a (q, n) in other with |p - q| <= tol and m <= n."""
        return all(any(abs(p - q) <= tol and m <= n for q, n in other.pairs) for p, m in self.pairs)

    def to_dict(self):
        return {"pairs": [{"re": p.real, "im": p.imag, "m": m} for p, m in self.pairs],
                "weight": self.weight.to_dict()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        pairs = [(complex(q["re"], q.get("im", 0.0)), int(q["m"])) for q in d.get("pairs", [])]
        return cls(pairs, WeightData.from_dict(d["weight"]))


def validate(P: DiscreteAsymptoticType):
    """(ok, violators): strip condition line + theta < Re p < line for every pair."""
    lo, hi = P.weight.strip
    bad = [(p, m) for p, m in P.pairs if not (lo < p.real < hi)]
    return not bad, bad


def shift(P: DiscreteAsymptoticType, delta: float) -> DiscreteAsymptoticType:
    return DiscreteAsymptoticType([(p + delta, m) for p, m in P.pairs], P.weight)


def conjugate(P: DiscreteAsymptoticType) -> DiscreteAsymptoticType:
    return DiscreteAsymptoticType([(np.conj(p), m) for p, m in P.pairs], P.weight)


def shadow_close(P: DiscreteAsymptoticType, depth: int | None = None) -> DiscreteAsymptoticType:
    """Add (p - l, m) for integers l >= 1 staying above the lower strip edge.

    For theta = -inf an explicit depth bound is required; the lower edge is
    then line - (depth + 1).
    """
    lo = P.weight.strip[0]
    if np.isinf(lo):
        if depth is None:
            raise ValueError("shadow closure for theta = -inf needs a depth bound")
        lo = P.weight.line - (depth + 1)
    pairs = list(P.pairs)
    for p, m in P.pairs:
        l = 1
        while p.real - l > lo:
            pairs.append((p - l, m))
            l += 1
    return DiscreteAsymptoticType(pairs, P.weight)


def from_pole_set(D, weight: WeightData) -> DiscreteAsymptoticType:
    """Keep the poles inside the weight strip, with m = multiplicity - 1.

    The multiplicity is that of the zero of the determinant, so m is an upper
    bound for the log power that can occur.
    """
    lo, hi = weight.strip
    pairs = [(complex(z), int(mult) - 1) for z, mult in D if lo < complex(z).real < hi]
    return DiscreteAsymptoticType(pairs, weight)


@dataclass(frozen=True)
class MellinAsymptoticType:
    """Pairs (r_j, n_j) of a Mellin symbol inside a working strip."""
    pairs: tuple = ()
    strip: tuple = (NEG_INF, float("inf"))

    def __post_init__(self):
        lo, hi = self.strip
        object.__setattr__(self, "pairs",
                           _merge([(r, n) for r, n in self.pairs if lo <= complex(r).real <= hi]))

    @classmethod
    def of_symbol(cls, f):
        """Pole locations and Laurent orders of a MeromorphicSymbol."""
        return cls([(b.p, b.m) for b in f.poles], f.strip)
