"""Problem files, command dispatch and reports.

Problem documents are JSON (canonical).  A line-oriented key/value form is
also read: one ``dotted.key = <JSON value>`` per line, lines starting with ``#``
are comments, e.g.

    operator.preset = "euler"
    operator.nu = 0.7
    weight.gamma = 0.5

Top-level sections: base, operator, weight, grid, rhs, options.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from .asymptotics import NEG_INF, WeightData
from .errors import ConeCalcError, ParseError, SchemaError
from .mellin_core import BaseModel, RadialGrid, WeightedGridFunction, set_threads

SCHEMA = "conecalc.problem/1"
REPORT_SCHEMA = "conecalc.report/1"
COMMANDS = ("roots", "asymptotics", "solve", "norms", "check-symbol")
PRESETS = ("euler", "polar_laplacian")
GRID_DEFAULTS = {"T": 12.0, "M": 4096, "Q": 256, "L": 8 * math.pi}

_SECTIONS = {
    "schema": None,
    "base": {"kind", "N"},
    "operator": {"preset", "nu", "mu", "coefficients"},
    "weight": {"gamma", "theta"},
    "grid": {"T", "M", "Q", "L"},
    "rhs": {"terms"},
    "options": {"strip", "depth", "norms", "symbol", "sample_r", "tol"},
}
_TERM_KEYS = {"c", "power", "exp", "log", "mode"}


# --------------------------------------------------------------------------
# number formatting and canonical JSON

def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode(cnum(obj), indent, level)
    return json.dumps(str(obj))


def dumps(obj, indent=2):
    """Deterministic JSON: sorted keys, 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def cnum(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _num(v, key):
    if isinstance(v, bool):
        raise SchemaError(key, "expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str) and v in ("inf", "-inf", "+inf"):
        return float(v)
    raise SchemaError(key, "expected a number")


def _cplx(v, key):
    if isinstance(v, dict):
        extra = set(v) - {"re", "im"}
        if extra:
            raise SchemaError(f"{key}.{sorted(extra)[0]}", "unknown key")
        return complex(_num(v.get("re", 0.0), key + ".re"), _num(v.get("im", 0.0), key + ".im"))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(_num(v[0], key), _num(v[1], key))
    return complex(_num(v, key))


def _int(v, key, lo=None):
    if isinstance(v, bool) or not (isinstance(v, int) or (isinstance(v, float) and v.is_integer())):
        raise SchemaError(key, "expected an integer")
    v = int(v)
    if lo is not None and v < lo:
        raise SchemaError(key, f"must be >= {lo}")
    return v


# --------------------------------------------------------------------------
# parsing

def _parse_kv(text):
    doc = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ParseError("expected 'key = value'", lineno, col)
        key, val = line.split("=", 1)
        key = key.strip()
        if not key or any(not part.strip() for part in key.split(".")):
            raise ParseError("empty key", lineno, raw.index(line) + 1)
        try:
            value = json.loads(val.strip())
        except json.JSONDecodeError as exc:
            col = raw.index("=") + 2 + (len(val) - len(val.lstrip())) + exc.colno - 1
            raise ParseError(f"bad value: {exc.msg}", lineno, col) from None
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ParseError(f"{key} redefines a value as a section", lineno, 1)
        node[parts[-1]] = value
    return doc


def _loads(text):
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return _parse_kv(text)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Validated problem document with defaults filled in."""
    data: dict

    def __eq__(self, other):
        return isinstance(other, ProblemSpec) and dumps(self.data) == dumps(other.data)

    def __hash__(self):
        return hash(dumps(self.data))

    @property
    def base(self):
        b = self.data["base"]
        return BaseModel(b["kind"], b["N"] if b["kind"] == "circle" else 0)

    @property
    def grid(self):
        g = self.data["grid"]
        return RadialGrid(g["T"], g["M"])

    @property
    def weight(self):
        w = self.data["weight"]
        return WeightData(w["gamma"], w["theta"], self.base.n)

    @property
    def options(self):
        return self.data.get("options", {})

    def operator(self):
        return build_operator(self)

    def rhs(self, grid=None):
        return build_rhs(self, grid)

    def digest(self):
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _validate(doc):
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "the document must be an object")
    for key in doc:
        if key not in _SECTIONS:
            raise SchemaError(key, "unknown section")
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise SchemaError("schema", f"unsupported schema {schema!r}")
    out = {"schema": SCHEMA}
    for sec in ("base", "operator", "weight", "grid", "rhs", "options"):
        val = doc.get(sec, {})
        if not isinstance(val, dict):
            raise SchemaError(sec, "expected an object")
        for key in val:
            if key not in _SECTIONS[sec]:
                raise SchemaError(f"{sec}.{key}", "unknown key")

    b = doc.get("base", {})
    kind = b.get("kind", "point")
    if kind not in ("point", "circle"):
        raise SchemaError("base.kind", "expected 'point' or 'circle'")
    out["base"] = {"kind": kind, "N": _int(b.get("N", 32), "base.N", 0)}

    if "operator" not in doc:
        raise SchemaError("operator", "missing section")
    op = doc["operator"]
    if "preset" in op:
        preset = op["preset"]
        if preset not in PRESETS:
            raise SchemaError("operator.preset", f"unknown preset {preset!r}")
        o = {"preset": preset}
        if preset == "euler":
            if "nu" not in op:
                raise SchemaError("operator.nu", "the euler preset needs nu")
            o["nu"] = _num(op["nu"], "operator.nu")
        else:
            if kind != "circle":
                raise SchemaError("base.kind", "polar_laplacian needs base.kind = 'circle'")
            if "nu" in op:
                raise SchemaError("operator.nu", "not used by polar_laplacian")
        for k in ("mu", "coefficients"):
            if k in op:
                raise SchemaError(f"operator.{k}", "cannot be combined with a preset")
        out["operator"] = o
    else:
        if "mu" not in op:
            raise SchemaError("operator.mu", "missing key")
        if "coefficients" not in op:
            raise SchemaError("operator.coefficients", "missing key")
        if kind != "point":
            raise SchemaError("operator.coefficients", "explicit coefficients need a point base")
        mu = _int(op["mu"], "operator.mu", 0)
        co = op["coefficients"]
        if not isinstance(co, list) or len(co) != mu + 1:
            raise SchemaError("operator.coefficients", f"expected {mu + 1} lists a_0..a_mu")
        rows = []
        for j, row in enumerate(co):
            key = f"operator.coefficients[{j}]"
            if not isinstance(row, list) or not row:
                raise SchemaError(key, "expected a nonempty list of Taylor coefficients")
            rows.append([cnum(_cplx(v, f"{key}[{l}]")) for l, v in enumerate(row)])
        out["operator"] = {"mu": mu, "coefficients": rows}

    if "weight" not in doc:
        raise SchemaError("weight.gamma", "missing section")
    w = doc["weight"]
    if "gamma" not in w:
        raise SchemaError("weight.gamma", "missing key")
    theta = _num(w.get("theta", NEG_INF), "weight.theta")
    if not theta < 0:
        raise SchemaError("weight.theta", "theta must be negative")
    out["weight"] = {"gamma": _num(w["gamma"], "weight.gamma"), "theta": theta}
    if not math.isfinite(out["weight"]["gamma"]):
        raise SchemaError("weight.gamma", "must be finite")

    g = doc.get("grid", {})
    grid = {"T": _num(g.get("T", GRID_DEFAULTS["T"]), "grid.T"),
            "M": _int(g.get("M", GRID_DEFAULTS["M"]), "grid.M", 8),
            "Q": _int(g.get("Q", GRID_DEFAULTS["Q"]), "grid.Q", 2),
            "L": _num(g.get("L", GRID_DEFAULTS["L"]), "grid.L")}
    if not (grid["T"] > 0 and math.isfinite(grid["T"])):
        raise SchemaError("grid.T", "must be positive")
    if grid["M"] % 2:
        raise SchemaError("grid.M", "must be even")
    if not (grid["L"] > 0 and math.isfinite(grid["L"])):
        raise SchemaError("grid.L", "must be positive")
    out["grid"] = grid

    if "rhs" in doc:
        out["rhs"] = {"terms": _validate_terms(doc["rhs"].get("terms"), "rhs.terms")}

    opts = doc.get("options", {})
    o = {}
    if "strip" in opts:
        s = opts["strip"]
        if not isinstance(s, list) or len(s) != 2:
            raise SchemaError("options.strip", "expected [a, b]")
        o["strip"] = [_num(s[0], "options.strip[0]"), _num(s[1], "options.strip[1]")]
        if not o["strip"][0] < o["strip"][1]:
            raise SchemaError("options.strip", "need a < b")
    if "depth" in opts:
        o["depth"] = _int(opts["depth"], "options.depth", 0)
    if "tol" in opts:
        o["tol"] = _num(opts["tol"], "options.tol")
    if "sample_r" in opts:
        sr = opts["sample_r"]
        if not isinstance(sr, list):
            raise SchemaError("options.sample_r", "expected a list of radii")
        o["sample_r"] = [_num(v, f"options.sample_r[{i}]") for i, v in enumerate(sr)]
    if "norms" in opts:
        o["norms"] = _validate_norms(opts["norms"])
    if "symbol" in opts:
        o["symbol"] = _validate_symbol(opts["symbol"])
    out["options"] = o
    return out


def _validate_terms(terms, key):
    if not isinstance(terms, list) or not terms:
        raise SchemaError(key, "expected a nonempty list of terms")
    out = []
    for i, t in enumerate(terms):
        k = f"{key}[{i}]"
        if not isinstance(t, dict):
            raise SchemaError(k, "expected an object")
        for name in t:
            if name not in _TERM_KEYS:
                raise SchemaError(f"{k}.{name}", "unknown key")
        out.append({"c": cnum(_cplx(t.get("c", 1.0), k + ".c")),
                    "power": _num(t.get("power", 0.0), k + ".power"),
                    "exp": _num(t.get("exp", 0.0), k + ".exp"),
                    "log": _int(t.get("log", 0), k + ".log", 0),
                    "mode": _int(t.get("mode", 0), k + ".mode")})
    return out


_NORM_KEYS = {"s", "fiber_s", "gamma", "g", "y_width", "profile", "variant"}


def _validate_norms(n):
    if not isinstance(n, dict):
        raise SchemaError("options.norms", "expected an object")
    for k in n:
        if k not in _NORM_KEYS:
            raise SchemaError(f"options.norms.{k}", "unknown key")
    variant = n.get("variant", "bracket")
    if variant not in ("bracket", "linear"):
        raise SchemaError("options.norms.variant", "expected 'bracket' or 'linear'")
    out = {"s": _num(n.get("s", 0.0), "options.norms.s"),
           "fiber_s": _num(n.get("fiber_s", 0.0), "options.norms.fiber_s"),
           "g": _num(n.get("g", 0.0), "options.norms.g"),
           "y_width": _num(n.get("y_width", 1.0), "options.norms.y_width"),
           "variant": variant,
           "profile": _validate_terms(n.get("profile"), "options.norms.profile")}
    if "gamma" in n:
        out["gamma"] = _num(n["gamma"], "options.norms.gamma")
    return out


_SYMBOL_KINDS = ("potential", "multiplication", "smoothing", "edge")
_SYMBOL_KEYS = {"kind", "p", "gamma", "variant", "pole", "mu", "j", "alpha", "gamma_j",
                "terms", "lambdas", "etas", "centers"}


def _validate_symbol(s):
    if not isinstance(s, dict):
        raise SchemaError("options.symbol", "expected an object")
    for k in s:
        if k not in _SYMBOL_KEYS:
            raise SchemaError(f"options.symbol.{k}", "unknown key")
    kind = s.get("kind")
    if kind not in _SYMBOL_KINDS:
        raise SchemaError("options.symbol.kind", f"expected one of {', '.join(_SYMBOL_KINDS)}")
    variant = s.get("variant", "smooth")
    if variant not in ("smooth", "alt"):
        raise SchemaError("options.symbol.variant", "expected 'smooth' or 'alt'")
    out = {"kind": kind, "variant": variant,
           "gamma": _num(s.get("gamma", -4.0 if kind == "potential" else 0.0),
                         "options.symbol.gamma")}
    for k, default in (("lambdas", [1.0, 2.0, 4.5]), ("etas", [1.0, 1.5, -2.0]),
                       ("centers", [-2.0, -1.5, -1.0])):
        v = s.get(k, default)
        if not isinstance(v, list) or not v:
            raise SchemaError(f"options.symbol.{k}", "expected a nonempty list")
        out[k] = [_num(x, f"options.symbol.{k}[{i}]") for i, x in enumerate(v)]
    if any(l < 1 for l in out["lambdas"]):
        raise SchemaError("options.symbol.lambdas", "need lambda >= 1")
    if any(abs(e) < 1 for e in out["etas"]):
        raise SchemaError("options.symbol.etas", "need |eta| >= 1")
    if kind == "potential":
        out["p"] = cnum(_cplx(s.get("p", 0.3), "options.symbol.p"))
    elif kind == "smoothing":
        out["pole"] = _num(s.get("pole", -4.0), "options.symbol.pole")
        out["mu"] = _int(s.get("mu", 2), "options.symbol.mu", 0)
        out["j"] = _int(s.get("j", 1), "options.symbol.j", 0)
        out["alpha"] = _int(s.get("alpha", 1), "options.symbol.alpha", 0)
        out["gamma_j"] = _num(s.get("gamma_j", out["gamma"] - 0.5), "options.symbol.gamma_j")
    elif kind == "edge":
        terms = s.get("terms")
        if not isinstance(terms, list) or not terms:
            raise SchemaError("options.symbol.terms", "expected a list of {j, alpha, c}")
        out["mu"] = _int(s.get("mu", 2), "options.symbol.mu", 0)
        tl = []
        for i, t in enumerate(terms):
            k = f"options.symbol.terms[{i}]"
            if not isinstance(t, dict) or set(t) - {"j", "alpha", "c"}:
                raise SchemaError(k, "expected keys j, alpha, c")
            tl.append({"j": _int(t.get("j", 0), k + ".j", 0),
                       "alpha": _int(t.get("alpha", 0), k + ".alpha", 0),
                       "c": cnum(_cplx(t.get("c", 1.0), k + ".c"))})
        out["terms"] = tl
    return out


def parse_spec(source) -> ProblemSpec:
    """Parse a problem document from a path or from its text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                     and not source.lstrip().startswith("{")
                                     and "=" not in source):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {source}: {exc.strerror}") from None
    else:
        text = source
    return ProblemSpec(_validate(_loads(text)))


def serialize(spec: ProblemSpec) -> str:
    return dumps(spec.data)


# --------------------------------------------------------------------------
# building objects

def _c(d):
    return complex(d["re"], d["im"])


def build_operator(spec: ProblemSpec):
    from .fuchs import FuchsOperator
    op = spec.data["operator"]
    base = spec.base
    if op.get("preset") == "euler":
        return FuchsOperator.euler(op["nu"], base)
    if op.get("preset") == "polar_laplacian":
        return FuchsOperator.polar_laplacian(base.N)
    return FuchsOperator.scalar(op["mu"], [[_c(v) for v in row] for row in op["coefficients"]])


def _terms_values(terms, r, base):
    vals = np.zeros((len(r), base.dim), complex)
    lr = np.log(r)
    for t in terms:
        k = t["mode"]
        if abs(k) > base.N:
            raise SchemaError("rhs.terms.mode", f"mode {k} outside |k| <= {base.N}")
        col = k + base.N
        # combined exponent keeps r^a e^(-b r) finite where each factor is not
        with np.errstate(over="ignore", under="ignore"):
            v = np.exp(t["power"] * lr - t["exp"] * r) * lr ** t["log"]
        vals[:, col] += _c(t["c"]) * v
    return vals


def build_rhs(spec: ProblemSpec, grid=None):
    if "rhs" not in spec.data:
        raise SchemaError("rhs.terms", "this command needs a right-hand side")
    A = build_operator(spec)
    grid = spec.grid if grid is None else grid
    vals = _terms_values(spec.data["rhs"]["terms"], grid.r, spec.base)
    return WeightedGridFunction(grid, vals, spec.base, spec.weight.gamma - A.mu)


# --------------------------------------------------------------------------
# commands

def _roots_table(pairs):
    return [{"re": complex(z).real, "im": complex(z).imag, "multiplicity": int(m)}
            for z, m in pairs]


def cmd_roots(spec, args):
    from .fuchs import indicial_roots
    A = build_operator(spec)
    strip = args.strip or spec.options.get("strip")
    if strip is None:
        lo, hi = spec.weight.strip
        if not math.isfinite(lo):
            raise SchemaError("options.strip", "needed when weight.theta = -inf")
        strip = (lo, hi)
    roots = indicial_roots(A, tuple(strip))
    results = {"strip": list(strip), "roots": _roots_table(roots)}
    csv_rows = {"roots": (["root", "multiplicity"],
                          [[_root_str(z), int(m)] for z, m in roots])}
    return results, {}, csv_rows


def _root_str(z):
    z = complex(z)
    return fmt_float(z.real) if z.imag == 0 else f"{fmt_float(z.real)}{'+' if z.imag >= 0 else '-'}{fmt_float(abs(z.imag))}j"


def _coeff_table(pairs, coeffs, base):
    rows = []
    for (p, m), c in zip(pairs, coeffs):
        c = np.asarray(c)
        for k in range(c.shape[0]):
            for comp in range(c.shape[1]):
                if c[k, comp] != 0 or base.dim == 1:
                    rows.append({"p": cnum(p), "k": k, "mode": int(base.modes[comp]),
                                 "c": cnum(c[k, comp])})
    return rows


def _coeff_csv(table):
    return (["p_re", "p_im", "k", "mode", "c_re", "c_im"],
            [[fmt_float(r["p"]["re"]), fmt_float(r["p"]["im"]), r["k"], r["mode"],
              fmt_float(r["c"]["re"]), fmt_float(r["c"]["im"])] for r in table])


def cmd_asymptotics(spec, args):
    from .fuchs import extract_asymptotics, solve_with_taylor
    A = build_operator(spec)
    f = build_rhs(spec)
    w = spec.weight
    depth = args.depth if args.depth is not None else spec.options.get("depth")
    diag = {}
    if A.k_taylor == 0 and depth is None:
        if not math.isfinite(w.theta):
            raise SchemaError("weight.theta", "asymptotics needs a finite theta or a depth")
        ex = extract_asymptotics(A, f, w.gamma, w.theta)
        pairs, coeffs, typ = ex.pairs, ex.coeffs, ex.type
        diag["reconstruction_error"] = ex.reconstruction_error
        laurent = [{"p": cnum(p), "m": int(m), "laurent": [[cnum(x) for x in row] for row in L]}
                   for (p, m), L in zip(ex.pairs, ex.laurent)]
    else:
        if depth is None:
            raise SchemaError("options.depth", "needed for operators with Taylor terms")
        ts = solve_with_taylor(A, f, w.gamma, depth)
        pairs, coeffs, typ = ts.pairs, ts.coeffs, ts.type
        diag.update(levels=ts.levels, r_valid=ts.r_valid, residual=ts.residual)
        laurent = []
    table = _coeff_table(pairs, coeffs, spec.base)
    results = {"type": typ.to_dict(), "pairs": [{"p": cnum(p), "m": int(m)} for p, m in pairs],
               "coefficients": table}
    if laurent:
        results["laurent"] = laurent
    return results, diag, {"coefficients": _coeff_csv(table)}


def cmd_solve(spec, args):
    from .fuchs import solve_model, solve_with_taylor, weighted_residual
    A = build_operator(spec)
    f = build_rhs(spec)
    w = spec.weight
    tol = spec.options.get("tol", 1e-6)
    diag = {}
    if A.k_taylor == 0:
        u = solve_model(A, f, w.gamma, tol=tol)
        diag["residual"] = weighted_residual(A, u, f, w.gamma)
        r_valid = math.inf
    else:
        depth = args.depth if args.depth is not None else spec.options.get("depth", 0)
        ts = solve_with_taylor(A, f, w.gamma, depth)
        u, r_valid = ts.u, ts.r_valid
        diag.update(residual=ts.residual, levels=ts.levels, r_valid=r_valid)
    t = u.grid.t
    spline = CubicSpline(t, u.values, axis=0)
    samples = []
    for r in spec.options.get("sample_r", [0.1, 0.5, 1.0, 2.0]):
        if not (r > 0 and r <= r_valid and abs(math.log(r)) < u.grid.T):
            continue
        vals = spline(math.log(r))
        samples.append({"r": float(r), "u": [cnum(v) for v in vals]})
    results = {"samples": samples}
    head = ["t", "r"] + [f"{part}_{k}" for k in u.base.modes for part in ("re", "im")]
    rows = [[fmt_float(ti), fmt_float(ri)] + [fmt_float(getattr(v, part)) for v in row
                                               for part in ("real", "imag")]
            for ti, ri, row in zip(t, u.grid.r, u.values)]
    return results, diag, {"solution": (head, rows)}


def cmd_norms(spec, args):
    from .edge import EdgeGridFunction, YGrid, ws_norm
    from .spaces import hs_gamma_norm, ksg_norm
    if "norms" not in spec.options:
        raise SchemaError("options.norms", "the norms command needs options.norms")
    n = spec.options["norms"]
    g = spec.data["grid"]
    fiber = spec.grid
    base = spec.base
    gamma = n.get("gamma", spec.weight.gamma)
    prof = _terms_values(n["profile"], fiber.r, base)
    yg = YGrid(g["L"], g["Q"])
    gy = np.exp(-(yg.y / n["y_width"]) ** 2)
    u = EdgeGridFunction(yg, fiber, gy[:, None, None] * prof[None], base, gamma, n["g"])
    fu = WeightedGridFunction(fiber, prof, base, gamma)
    results = {
        "ws_norm": ws_norm(u, n["s"], n["fiber_s"]),
        "l2_norm": u.l2_norm(),
        "fiber_hs_norm": hs_gamma_norm(fu, n["fiber_s"], gamma, n["variant"]),
        "fiber_ksg_norm": ksg_norm(fu, n["fiber_s"], gamma, n["g"], n["variant"]),
    }
    results["relative_difference"] = abs(results["ws_norm"] - results["l2_norm"]) / results["l2_norm"]
    return results, {}, {"norms": (["name", "value"],
                                   [[k, fmt_float(v)] for k, v in sorted(results.items())])}


def cmd_check_symbol(spec, args):
    from .edge import (EdgeOperator, edge_symbol, multiplication_symbol, potential_symbol,
                       smoothing_mellin_symbol, twisted_homogeneity_check)
    from .symbols import MeromorphicSymbol
    if "symbol" not in spec.options:
        raise SchemaError("options.symbol", "the check-symbol command needs options.symbol")
    s = spec.options["symbol"]
    fiber, base = spec.grid, spec.base
    if s["kind"] == "potential":
        a = potential_symbol(_c(s["p"]), fiber, base, s["gamma"], s["variant"])
        probes = [np.ones(base.dim), np.full(base.dim, 2 - 1j)]
    else:
        probes = [WeightedGridFunction(fiber, np.outer(
            np.exp(-3 * (fiber.t - c) ** 2) * (1 + 0.2j * fiber.t), np.ones(base.dim)),
            base, s["gamma"]) for c in s["centers"]]
        if s["kind"] == "multiplication":
            a = multiplication_symbol(variant=s["variant"], gamma=s["gamma"])
        elif s["kind"] == "smoothing":
            h = MeromorphicSymbol.scalar([0.0], poles=[(s["pole"], [1.0])])
            a = smoothing_mellin_symbol(h, s["mu"], s["j"], s["alpha"], s["gamma"],
                                        s["gamma_j"], s["variant"])
        else:
            op = EdgeOperator(s["mu"], {(t["j"], t["alpha"]): _c(t["c"]) for t in s["terms"]},
                              base)
            a = edge_symbol(op, 0.0, s["gamma"])
    dev = twisted_homogeneity_check(a, s["lambdas"], s["etas"], probes)
    results = {"kind": a.kind, "order": a.order, "deviation": dev}
    return results, {}, {"symbol": (["kind", "order", "deviation"],
                                    [[a.kind, fmt_float(a.order), fmt_float(dev)]])}


_DISPATCH = {"roots": cmd_roots, "asymptotics": cmd_asymptotics, "solve": cmd_solve,
             "norms": cmd_norms, "check-symbol": cmd_check_symbol}


def run(command, spec: ProblemSpec, args=None):
    """Run a command and return (report dict, csv tables)."""
    if command not in _DISPATCH:
        raise SchemaError("command", f"unknown command {command!r}")
    args = args or argparse.Namespace(strip=None, depth=None)
    spec = copy.deepcopy(spec)
    results, diag, tables = _DISPATCH[command](spec, args)
    report = {"schema": REPORT_SCHEMA, "command": command, "input_digest": spec.digest(),
              "spec": spec.data, "results": results, "diagnostics": diag,
              "version": __version__}
    for key in ("strip", "depth"):
        v = getattr(args, key, None)
        if v is not None:
            report.setdefault("arguments", {})[key] = list(v) if key == "strip" else v
    return report, tables


def write_csv(directory, tables):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, (head, rows) in sorted(tables.items()):
        with open(d / f"{name}.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(head)
            wr.writerows(rows)


def _parser():
    p = argparse.ArgumentParser(prog="conecalc", description="Mellin and cone calculus computations")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", required=True, help="problem file (JSON or key = value lines)")
    p.add_argument("--csv", metavar="DIR", help="also write numeric tables as CSV")
    p.add_argument("--strip", nargs=2, type=float, metavar=("A", "B"))
    p.add_argument("--depth", type=int)
    p.add_argument("--out", metavar="FILE", help="write the report here instead of stdout")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    threads = os.environ.get("CONECALC_THREADS")
    try:
        if threads:
            try:
                set_threads(int(threads))
            except ValueError:
                raise SchemaError("CONECALC_THREADS", "expected an integer") from None
        spec = parse_spec(Path(args.spec))
        if args.strip is not None and not args.strip[0] < args.strip[1]:
            raise SchemaError("--strip", "need a < b")
        report, tables = run(args.command, spec, args)
    except ConeCalcError as exc:
        print(f"conecalc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"conecalc: invalid input: {exc}", file=sys.stderr)
        return 1
    text = dumps(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv:
        write_csv(args.csv, tables)
    return 0


if __name__ == "__main__":
    sys.exit(main())
