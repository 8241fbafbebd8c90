"""Structured-text fixtures (YAML) for bundles, sections, chains and pairs.

Expressions are arithmetic strings over chart coordinates ``x0, x1, ...``,
cube parameters ``u0, u1, ...`` and named parameters, with the functions
``sin, cos, exp, sqrt`` and the constant ``pi``.  They are checked against a
syntax whitelist before sympy turns them into numeric callables and exact
derivatives.
"""
from __future__ import annotations

import ast
import math
from pathlib import Path
from typing import Callable, Dict, List, Sequence

import numpy as np
import sympy as sp
import yaml

from .ak_pairs import AkPair, SingularSet, dirac_pair, exact_pair
from .bundles import (
    BASES, BundleWithConnection, SectionField, Transition, builtin, constant_section, monopole_section,
    section_zeros_two, zero_section,
)
from .chains import Cell, Chain
from .exterior import Chart, FormField, GradedElement

FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt}
_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load, ast.Call,
                  ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


class FixtureError(ValueError):
    """Raised for any malformed fixture; the CLI maps it to exit status 2."""


def check_expression(text: str, names: Sequence[str]) -> ast.Expression:
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise FixtureError(f"cannot parse expression {text!r}: {exc.msg}") from None
    allowed = set(names) | {"pi"}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise FixtureError(f"disallowed syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise FixtureError(f"non-numeric constant in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
                raise FixtureError(f"unknown function in {text!r}")
            if len(node.args) != 1:
                raise FixtureError(f"functions take one argument in {text!r}")
        elif isinstance(node, ast.Name) and node.id not in allowed and node.id not in FUNCTIONS:
            raise FixtureError(f"unknown name {node.id!r} in {text!r}")
    return tree


class ExprVector:
    """Vector of expressions in ``nvars`` variables named ``<prefix>0..``."""

    def __init__(self, texts: Sequence, nvars: int, prefix: str = "x", params: Dict[str, float] = None):
        params = dict(params or {})
        self.syms = sp.symbols([f"{prefix}{i}" for i in range(nvars)]) if nvars else []
        names = [str(s) for s in self.syms] + list(params)
        local = {str(s): s for s in self.syms}
        local.update(FUNCTIONS)
        local["pi"] = sp.pi
        local.update({k: sp.Float(v) if not float(v).is_integer() else sp.Integer(int(v)) for k, v in params.items()})
        exprs = []
        for t in texts:
            check_expression(str(t), names)
            exprs.append(sp.sympify(str(t), locals=local))
        self.exprs = exprs
        self._f = sp.lambdify([self.syms], exprs, "math")
        jac = [[sp.diff(e, s) for s in self.syms] for e in exprs]
        self._j = sp.lambdify([self.syms], jac, "math")

    def __call__(self, x) -> np.ndarray:
        return np.array(self._f(list(np.asarray(x, float))), float)

    def jacobian(self, x) -> np.ndarray:
        return np.array(self._j(list(np.asarray(x, float))), float).reshape(len(self.exprs), len(self.syms))


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise FixtureError(f"{where}: missing key {key!r}")
    return d[key]


def _pair_key(key: str, size: int) -> tuple:
    try:
        idx = tuple(int(s) for s in str(key).split(","))
    except ValueError:
        raise FixtureError(f"bad index {key!r}") from None
    if any(not 0 <= i < size for i in idx):
        raise FixtureError(f"index {key!r} out of range")
    return idx


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


def bundle_from_dict(d: dict, params: Dict[str, float] = None) -> BundleWithConnection:
    params = dict(params or {})
    params.update(d.get("params", {}))
    if "builtin" in d:
        opts = {k: v for k, v in d.items() if k not in ("builtin", "params")}
        try:
            return builtin(d["builtin"], **opts)
        except KeyError as exc:
            raise FixtureError(str(exc)) from None
    base = _require(d, "base", "bundle")
    if base not in BASES:
        raise FixtureError(f"unknown base {base!r}")
    all_charts = BASES[base]()
    names = d.get("charts", list(all_charts))
    try:
        charts = {c: all_charts[c] for c in names}
    except KeyError as exc:
        raise FixtureError(f"unknown chart {exc}") from None
    r = int(_require(d, "rank", "bundle"))
    n = next(iter(charts.values())).dim
    conn_spec = d.get("connection", {})
    conn, dconn = {}, {}
    for c in charts:
        entries = conn_spec.get(c, {})
        keys, vecs = [], []
        for key, comps in entries.items():
            i, j = _pair_key(key, r)
            if i >= j:
                raise FixtureError("connection entries are given for i < j only")
            if len(comps) != n:
                raise FixtureError(f"connection entry {key} needs {n} components")
            keys.append((i, j))
            vecs.append(ExprVector(comps, n, params=params))
        conn[c], dconn[c] = _antisym_connection(keys, vecs, r, n)
    trans = []
    for t in d.get("transitions", []):
        src, tgt = _require(t, "source", "transition"), _require(t, "target", "transition")
        if "angle" in t:
            if r != 2:
                raise FixtureError("angle transitions need rank 2")
            ang = ExprVector([t["angle"]], n, params=params)
            g = lambda x, ang=ang: _rot(ang(x)[0])
            dg = lambda x, ang=ang: _drot(ang(x)[0])[:, :, None] * ang.jacobian(x)[0][None, None, :]
        else:
            rows = _require(t, "frame", "transition")
            flat = ExprVector([e for row in rows for e in row], n, params=params)
            g = lambda x, flat=flat: flat(x).reshape(r, r)
            dg = lambda x, flat=flat: flat.jacobian(x).reshape(r, r, n)
        trans.append(Transition(src, tgt, g, frame_jac=dg))
    meta = dict(params)
    meta.update(d.get("meta", {}) or {})
    return BundleWithConnection(d.get("name", "fixture"), r, charts, conn, dconn, trans, base, meta)


def _rot(a: float) -> np.ndarray:
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def _drot(a: float) -> np.ndarray:
    return np.array([[-math.sin(a), -math.cos(a)], [math.cos(a), -math.sin(a)]])


def _antisym_connection(keys, vecs, r, n):
    def w(x):
        out = np.zeros((r, r, n))
        for (i, j), v in zip(keys, vecs):
            out[i, j] = v(x)
            out[j, i] = -out[i, j]
        return out

    def dw(x):
        out = np.zeros((r, r, n, n))
        for (i, j), v in zip(keys, vecs):
            out[i, j] = v.jacobian(x)
            out[j, i] = -out[i, j]
        return out

    return w, dw


# ---------------------------------------------------------------------------
# Sections, chains, pairs
# ---------------------------------------------------------------------------


def section_from_dict(d: dict, B: BundleWithConnection, params: Dict[str, float] = None) -> SectionField:
    params = dict(params or {})
    params.update(B.meta if isinstance(B.meta, dict) else {})
    params = {k: v for k, v in params.items() if isinstance(v, (int, float))}
    if "builtin" in d:
        kind = d["builtin"]
        if kind == "zero":
            return zero_section(B)
        if kind == "constant":
            return constant_section(B, _require(d, "value", "section"))
        if kind == "modes":
            modes = {int(k): complex(v) for k, v in _require(d, "modes", "section").items()}
            return monopole_section(B, modes, d.get("name", ""))
        if kind == "two_zero":
            return section_zeros_two(B)
        raise FixtureError(f"unknown built-in section {kind!r}")
    comps, jacs = {}, {}
    for c, exprs in _require(d, "components", "section").items():
        if c not in B.charts:
            raise FixtureError(f"section chart {c!r} not in bundle")
        if len(exprs) != B.rank:
            raise FixtureError(f"section on {c!r} needs {B.rank} components")
        ev = ExprVector(exprs, B.chart(c).dim, params=params)
        comps[c], jacs[c] = ev, ev.jacobian
    return SectionField(B, comps, jacs, d.get("name", "section"))


def chain_from_dict(d: dict, charts: Dict[str, Chart], params: Dict[str, float] = None) -> Chain:
    dim = int(_require(d, "dim", "chain"))
    terms = []
    for cell in d.get("cells", []):
        name = _require(cell, "chart", "cell")
        if name not in charts:
            raise FixtureError(f"unknown chart {name!r}")
        ch = charts[name]
        exprs = _require(cell, "map", "cell")
        if len(exprs) != ch.dim:
            raise FixtureError(f"cell map needs {ch.dim} components")
        ev = ExprVector(exprs, dim, prefix="u", params=params)
        terms.append((int(cell.get("coef", 1)), Cell(dim, ch, ev, ev.jacobian, cell.get("label", ""))))
    return Chain(terms, dim)


def _form_from_dict(spec: dict, charts: Dict[str, Chart], degree: int, params) -> FormField:
    dims = {ch.dim for ch in charts.values()}
    if len(dims) != 1:
        raise FixtureError("pair charts must share a dimension")
    n = dims.pop()
    idx, evs = [], []
    for key, text in spec.items():
        I = _pair_key(key, n)
        if len(I) != degree or list(I) != sorted(set(I)):
            raise FixtureError(f"form index {key!r} must list {degree} increasing axes")
        idx.append(I)
        evs.append(ExprVector([text], n, params=params))

    def ev(ch, x):
        return GradedElement(n, 0, {(I, ()): e(x)[0] for I, e in zip(idx, evs)})

    return FormField(n, 0, ev, degree, charts.keys())


def pair_from_dict(d: dict, params: Dict[str, float] = None) -> AkPair:
    if "builtin" in d:
        kind = d["builtin"]
        if kind == "dirac":
            return dirac_pair(float(d.get("scale", 1.0)))
        if kind == "exact":
            return exact_pair(int(d.get("seed", 0)))
        raise FixtureError(f"unknown built-in pair {kind!r}")
    base = d.get("base", "S2")
    if base not in BASES:
        raise FixtureError(f"unknown base {base!r}")
    charts = BASES[base]()
    k = int(_require(d, "degree", "pair"))
    omega = _form_from_dict(_require(d, "omega", "pair"), charts, k, params)
    phi = _form_from_dict(_require(d, "phi", "pair"), charts, k - 1, params)
    sets = []
    for key in ("singular_omega", "singular_phi"):
        s = d.get(key, {}) or {}
        cells = chain_from_dict(s["chain"], charts, params).terms if "chain" in s else []
        sets.append(SingularSet([c for _, c in cells], s.get("points", [])))
    return AkPair(k, omega, phi, sets[0], sets[1], float(d.get("modulus", 1.0)),
                  float(d.get("clearance", 1e-3)), d.get("name", "pair"))


def load(path) -> dict:
    """Parse a fixture file into its objects (``bundle``, ``section``,
    ``chains``, ``pair``)."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise FixtureError(f"cannot read fixture {path}: {exc}") from None
    return from_document(doc)


def from_document(doc) -> dict:
    if not isinstance(doc, dict):
        raise FixtureError("fixture must be a mapping")
    params = {k: float(v) for k, v in (doc.get("params") or {}).items()}
    out: dict = {"params": params}
    if "bundle" in doc:
        out["bundle"] = bundle_from_dict(doc["bundle"], params)
    if "section" in doc:
        if "bundle" not in out:
            raise FixtureError("a section needs a bundle")
        out["section"] = section_from_dict(doc["section"], out["bundle"], params)
    if "chains" in doc:
        charts = dict(out["bundle"].charts) if "bundle" in out else {}
        for b in BASES.values():
            for name, ch in b().items():
                charts.setdefault(name, ch)
        out["chains"] = {name: chain_from_dict(c, charts, params) for name, c in doc["chains"].items()}
    if "pair" in doc:
        out["pair"] = pair_from_dict(doc["pair"], params)
    return out


DATA_DIR = Path(__file__).with_name("data")


def sample_fixtures() -> List[Path]:
    return sorted(DATA_DIR.glob("*.yaml"))
