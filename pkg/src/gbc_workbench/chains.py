"""Cube-parametrized chains, their boundary, quadrature, and R/cZ values."""
from __future__ import annotations

import itertools
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exterior import (
    FD_STEP, Chart, DimensionError, EvaluationError, FormField, GradedElement, SmoothMap,
    jacobian_fd, substitute_forms, wedge,
)

DEFAULT_ORDER = 16
MATCH_TOL = 1e-9


class AdmissibilityError(ValueError):
    pass


class UnsupportedRing(ValueError):
    pass


# ---------------------------------------------------------------------------
# Cells and chains
# ---------------------------------------------------------------------------


class Cell:
    """Smooth map from the unit cube ``[0,1]^q`` into a chart, with a sign."""

    def __init__(self, dim: int, chart: Chart, fn: Callable, jac: Optional[Callable] = None,
                 label: str = "", orientation: int = 1):
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.dim = dim
        self.chart = chart
        self.fn = fn
        self.jac = jac
        self.label = label
        self.orientation = orientation

    def __call__(self, u) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(u, float)), float)

    def jacobian(self, u) -> np.ndarray:
        u = np.asarray(u, float)
        if self.jac is not None:
            return np.asarray(self.jac(u), float).reshape(self.chart.dim, self.dim)
        return jacobian_fd(self.fn, u).reshape(self.chart.dim, self.dim)

    def reversed(self) -> "Cell":
        return Cell(self.dim, self.chart, self.fn, self.jac, self.label, -self.orientation)

    def face(self, axis: int, side: int) -> "Cell":
        """Restriction to ``u[axis] = side`` (``axis`` 0-based)."""
        if not 0 <= axis < self.dim:
            raise DimensionError("face axis out of range")

        def lift(v):
            return np.insert(np.asarray(v, float), axis, float(side))

        jac = None
        if self.jac is not None:
            jac = lambda v: np.delete(self.jacobian(lift(v)), axis, axis=1)
        return Cell(self.dim - 1, self.chart, lambda v: self(lift(v)), jac,
                    label=f"{self.label}|u{axis + 1}={side}")

    def compose(self, m: SmoothMap) -> "Cell":
        """``m o cell``; the map's source must be this cell's chart."""
        if m.source.name != self.chart.name:
            raise EvaluationError(f"map starts on {m.source.name!r}, cell lives on {self.chart.name!r}")
        return Cell(self.dim, m.target, lambda u: m(self(u)), lambda u: m.jacobian(self(u)) @ self.jacobian(u),
                    label=f"{m.name}*{self.label}", orientation=self.orientation)

    def grid(self, n: int, interior: bool = True) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((1, 0))
        ticks = (np.arange(n) + 0.5) / n if interior else np.linspace(0.0, 1.0, n)
        return np.array(list(itertools.product(ticks, repeat=self.dim)))

    def sample(self, n: int = 5, interior: bool = True) -> np.ndarray:
        return np.array([self(u) for u in self.grid(n, interior)])

    def check_in_chart(self, margin: float = FD_STEP, n: int = 9) -> bool:
        """Interior samples keep at least ``margin`` from the chart boundary."""
        return all(self.chart.contains(p, margin) for p in self.sample(n))

    def is_degenerate(self, n: int = 4, tol: float = 1e-9) -> bool:
        """True when the image in ambient coordinates has rank below ``dim``."""
        if self.dim == 0:
            return False
        amb = lambda u: self.chart.to_ambient(self(u))
        for u in self.grid(n):
            J = jacobian_fd(amb, u)
            s = np.linalg.svd(J, compute_uv=False)
            if s.size >= self.dim and s[self.dim - 1] > tol * max(1.0, s[0]):
                return False
        return True

    def __repr__(self):
        return f"Cell({self.dim}, {self.chart.name!r}, {self.label!r}, {self.orientation:+d})"


ParamSimplex = Cell


def _matches(a: Cell, b: Cell, n: int = 3, tol: float = MATCH_TOL) -> bool:
    if a.dim != b.dim or a.chart.name != b.chart.name:
        return False
    per = np.array([p or 0.0 for p in a.chart.periods]) if a.chart.periods else np.zeros(a.chart.dim)
    for u in a.grid(n, interior=False):
        d = a(u) - b(u)
        wrap = np.where(per > 0, per * np.round(d / np.where(per > 0, per, 1.0)), 0.0)
        if np.max(np.abs(d - wrap), initial=0.0) > tol:
            return False
    return True


class Chain:
    """Formal integer combination of cells of one dimension."""

    def __init__(self, terms: Iterable[Tuple[int, Cell]] = (), dim: Optional[int] = None):
        self.terms: List[Tuple[int, Cell]] = []
        for coef, cell in terms:
            if int(coef) != coef:
                raise ValueError("chain coefficients must be integers")
            if coef:
                self.terms.append((int(coef), cell))
        dims = {cell.dim for _, cell in self.terms}
        if len(dims) > 1:
            raise DimensionError(f"cells of mixed dimension {sorted(dims)}")
        if dims and dim is not None and dims != {dim}:
            raise DimensionError("declared chain dimension disagrees with its cells")
        self.dim = dims.pop() if dims else dim

    @classmethod
    def of(cls, *cells: Cell) -> "Chain":
        return cls([(1, c) for c in cells])

    def __add__(self, other: "Chain") -> "Chain":
        if self.dim is not None and other.dim is not None and self.dim != other.dim:
            raise DimensionError("cannot add chains of different dimension")
        return Chain(self.terms + other.terms, self.dim if self.dim is not None else other.dim)

    def __neg__(self) -> "Chain":
        return Chain([(-c, cell) for c, cell in self.terms], self.dim)

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def __mul__(self, n: int) -> "Chain":
        return Chain([(n * c, cell) for c, cell in self.terms], self.dim)

    __rmul__ = __mul__

    def __len__(self):
        return len(self.terms)

    def is_empty(self) -> bool:
        return not self.terms

    def signed_cells(self):
        for coef, cell in self.terms:
            yield coef * cell.orientation, cell

    def simplify(self) -> "Chain":
        """Drop degenerate cells and cancel cells that agree as maps
        (modulo chart periods)."""
        pool: List[List] = []
        for coef, cell in self.signed_cells():
            if cell.is_degenerate():
                continue
            for entry in pool:
                if _matches(entry[1], cell):
                    entry[0] += coef
                    break
            else:
                pool.append([coef, cell])
        out = []
        for coef, cell in pool:
            if coef:
                base = cell if cell.orientation == 1 else cell.reversed()
                out.append((coef, base))
        return Chain(out, self.dim)

    def check_in_charts(self, margin: float = FD_STEP) -> bool:
        return all(cell.check_in_chart(margin) for _, cell in self.terms)

    def pushforward(self, maps) -> "Chain":
        """Compose every cell with ``maps[cell.chart.name]`` (or a single map)."""
        out = []
        for coef, cell in self.terms:
            m = maps if isinstance(maps, SmoothMap) else maps[cell.chart.name]
            out.append((coef, cell.compose(m)))
        return Chain(out, self.dim)

    def __repr__(self):
        return f"Chain(dim={self.dim}, {self.terms!r})"


def boundary(c: Chain, simplify: bool = True) -> Chain:
    """Cubical boundary: face ``u_i = s`` carries ``(-1)^(i+s)`` (i from 1)."""
    if c.dim is None:
        return Chain()
    if c.dim == 0:
        raise DimensionError("a 0-chain has no boundary")
    out = []
    for coef, cell in c.signed_cells():
        for i in range(cell.dim):
            for s in (0, 1):
                out.append((coef * (-1) ** (i + 1 + s), cell.face(i, s)))
    ch = Chain(out, c.dim - 1)
    return ch.simplify() if simplify else ch


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _rule(order: int, dim: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x = (x + 1) / 2
    w = w / 2
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    nodes = np.array(list(itertools.product(x, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    return nodes, weights


def _pulled_top(f: FormField, cell: Cell, u) -> float:
    pt = cell(u)
    if not cell.chart.contains(pt):
        raise EvaluationError(f"cell {cell.label!r} leaves chart {cell.chart.name!r} at {pt}")
    val = f(cell.chart, pt)
    if val.r:
        raise DimensionError("only ordinary forms (no fiber generators) can be integrated")
    if cell.dim == 0:
        return float(val.c[0])
    pulled = substitute_forms(val, cell.jacobian(u))
    return float(pulled.c[(1 << cell.dim) - 1])


def integrate_cell(f: FormField, cell: Cell, order: int = DEFAULT_ORDER) -> float:
    nodes, weights = _rule(order, cell.dim)
    return float(sum(w * _pulled_top(f, cell, u) for u, w in zip(nodes, weights)))


def integrate(f: FormField, c: Chain, order: int = DEFAULT_ORDER, jobs: int = 1) -> float:
    """Sum over cells of sign times tensor Gauss-Legendre quadrature of the
    pulled-back top-degree part."""
    if c.is_empty():
        return 0.0
    if f.degree is not None and f.degree != c.dim:
        raise DimensionError(f"{f.degree}-form integrated over a {c.dim}-chain")
    cells = list(c.signed_cells())
    if jobs > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            vals = list(pool.map(lambda sc: integrate_cell(f, sc[1], order), cells))
    else:
        vals = [integrate_cell(f, cell, order) for _, cell in cells]
    return float(sum(s * v for (s, _), v in zip(cells, vals)))


# ---------------------------------------------------------------------------
# Values modulo cZ
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModValue:
    value: float
    modulus: float = 1.0

    def __post_init__(self):
        if self.modulus <= 0:
            raise ValueError("modulus must be positive")
        if not 0.0 <= self.value < self.modulus:
            raise ValueError("representative must lie in [0, modulus)")

    def __add__(self, other):
        if isinstance(other, ModValue):
            _same_modulus(self, other)
            other = other.value
        return mod_reduce(self.value + other, self.modulus)

    def __sub__(self, other):
        if isinstance(other, ModValue):
            _same_modulus(self, other)
            other = other.value
        return mod_reduce(self.value - other, self.modulus)

    def __neg__(self):
        return mod_reduce(-self.value, self.modulus)


def _same_modulus(a: ModValue, b: ModValue) -> None:
    if a.modulus != b.modulus:
        raise ValueError(f"modulus mismatch: {a.modulus} vs {b.modulus}")


def mod_reduce(x: float, c: float = 1.0) -> ModValue:
    if c <= 0:
        raise ValueError("modulus must be positive")
    v = float(x - c * math.floor(x / c))
    if v < 0:  # x / c underflowed to -0.0
        v += c
    if v >= c:  # x just below a multiple of c can round up
        v = 0.0
    return ModValue(v, float(c))


def mod_distance(a: ModValue, b: ModValue) -> float:
    _same_modulus(a, b)
    d = abs(a.value - b.value)
    return min(d, a.modulus - d)


def parse_coefficient_ring(text: str) -> float:
    """``"Z"`` or ``"<c>Z"`` to the modulus ``c``.  Dense rings are refused."""
    s = text.strip().replace(" ", "").replace("ℤ", "Z")
    if s in ("Q", "R", "ℚ", "ℝ", "C"):
        raise UnsupportedRing(f"{text!r} is dense in R; only A = cZ admits a numeric reduction")
    m = re.fullmatch(r"([0-9.eE+-]*)\*?Z", s)
    if not m:
        raise UnsupportedRing(f"cannot parse coefficient ring {text!r}")
    c = float(m.group(1)) if m.group(1) not in ("", "+") else 1.0
    if c <= 0:
        raise UnsupportedRing("the generator of cZ must be positive")
    return c


# ---------------------------------------------------------------------------
# Closed test forms
# ---------------------------------------------------------------------------


class _Poly:
    """Random cubic in ambient coordinates with an analytic gradient."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.exps = np.array([m for m in itertools.product(range(4), repeat=dim) if sum(m) <= 3])
        self.coef = rng.normal(size=len(self.exps))
        # exponents after differentiating along each axis (clipped; the factor kills the clipped rows)
        self.lowered = [np.maximum(self.exps - np.eye(dim, dtype=int)[a], 0) for a in range(dim)]

    def value(self, y) -> float:
        y = np.asarray(y, float)
        return float(self.coef @ np.prod(y ** self.exps, axis=1))

    def grad(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        return np.array([(self.coef * self.exps[:, a]) @ np.prod(y ** low, axis=1)
                         for a, low in enumerate(self.lowered)])


_AMBIENT = 4


class AmbientPolynomial:
    """Random cubic in the first four ambient coordinates of a chart's
    embedding, as a 0-form and with its differential."""

    def __init__(self, rng: np.random.Generator):
        self.P = _Poly(_AMBIENT, rng)

    @staticmethod
    def _pad(y) -> np.ndarray:
        y = np.asarray(y, float)
        yy = np.zeros(_AMBIENT)
        k = min(_AMBIENT, y.size)
        yy[:k] = y[:k]
        return yy

    def value(self, chart: Chart, x) -> float:
        return self.P.value(self._pad(chart.to_ambient(x)))

    def differential(self, chart: Chart, x) -> GradedElement:
        y = chart.to_ambient(x)
        g = np.zeros(y.size)
        k = min(_AMBIENT, y.size)
        g[:k] = self.P.grad(self._pad(y))[:k]
        J = jacobian_fd(chart.to_ambient, np.asarray(x, float)) if chart.embed is not None else np.eye(chart.dim)
        row = g @ J
        out = GradedElement(chart.dim, 0)
        for b in range(chart.dim):
            out.c[1 << b] = row[b]
        return out


def polynomial_form(dim: int, degree: int, rng: np.random.Generator, exact: bool = True) -> FormField:
    """``f_0 df_1 ^ ... ^ df_degree`` (``f_0 = 1`` when ``exact``)."""
    polys = [AmbientPolynomial(rng) for _ in range(degree + (0 if exact else 1))]

    def ev(ch, x):
        val = GradedElement.scalar(ch.dim, 0)
        rest = polys
        if not exact:
            val = val * polys[0].value(ch, x)
            rest = polys[1:]
        for P in rest:
            val = wedge(val, P.differential(ch, x))
        return val

    def dev(ch, x):
        if exact:
            return GradedElement(ch.dim, 0)
        val = GradedElement.scalar(ch.dim, 0)
        for P in polys:
            val = wedge(val, P.differential(ch, x))
        return val

    return FormField(dim, 0, ev, degree, derivative=dev, name=f"poly{degree}{'' if exact else '*'}")


def test_form_battery(dim: int, degree: int, count: int = 8, seed: int = 0,
                      extra: Sequence[FormField] = ()) -> List[FormField]:
    """Closed ``degree``-forms on ``dim``-dimensional charts: random exact
    forms ``df_1 ^ ... ^ df_degree`` built from cubics in ambient coordinates,
    plus caller-supplied closed forms (e.g. harmonic or volume forms)."""
    rng = np.random.default_rng(seed)
    out = list(extra)
    if degree == 0:
        out.append(FormField(dim, 0, lambda ch, x: GradedElement.scalar(dim, 0), 0, name="1"))
        return out
    if degree > dim:
        return out
    while len(out) < count:
        out.append(polynomial_form(dim, degree, rng))
    return out


def chain_battery(dim: int, degree: int, count: int = 8, seed: int = 0) -> List[FormField]:
    """Random non-closed ``degree``-forms ``f_0 df_1 ^ ... ^ df_degree``; unlike
    closed forms these separate chains that are merely homologous (a nonzero
    0-chain ``p - q`` is invisible to constants but not to ``f_0``)."""
    rng = np.random.default_rng(seed)
    return [polynomial_form(dim, degree, rng, exact=False) for _ in range(count)]


def witness_residual(c: Chain, forms: Sequence[FormField], order: int = DEFAULT_ORDER) -> float:
    """Largest |integral| of the supplied closed forms over ``c`` (zero for a
    chain that is null in the sense of the battery)."""
    if c.is_empty():
        return 0.0
    return max((abs(integrate(f, c, order)) for f in forms), default=0.0)


# ---------------------------------------------------------------------------
# Standard cells
# ---------------------------------------------------------------------------


def affine_cell(chart: Chart, origin, edges, label: str = "") -> Cell:
    """``u -> origin + sum_i u_i edges[i]``."""
    o = np.asarray(origin, float)
    E = np.asarray(edges, float).reshape(-1, chart.dim).T
    return Cell(E.shape[1], chart, lambda u: o + E @ u, lambda u: E, label or "affine")


def bilinear_cell(chart: Chart, corners, label: str = "") -> Cell:
    """Quadrilateral through ``corners`` = (p00, p10, p11, p01), counterclockwise
    in the chart when the corners are."""
    p00, p10, p11, p01 = (np.asarray(c, float) for c in corners)

    def fn(u):
        a, b = u
        return (1 - a) * (1 - b) * p00 + a * (1 - b) * p10 + a * b * p11 + (1 - a) * b * p01

    def jac(u):
        a, b = u
        return np.stack([(1 - b) * (p10 - p00) + b * (p11 - p01), (1 - a) * (p01 - p00) + a * (p11 - p10)], axis=1)

    return Cell(2, chart, fn, jac, label or "quad")


def latitude_cell(chart: Chart, theta: float, phi0: float = 0.0, turns: float = 1.0, label: str = "") -> Cell:
    """Circle of latitude, ``phi`` increasing from ``phi0`` through ``turns`` turns."""
    span = 2 * math.pi * turns
    J = np.array([[0.0], [span]])
    return Cell(1, chart, lambda u: np.array([theta, phi0 + span * u[0]]), lambda u: J,
                label or f"latitude({theta:.6g})")


def band_cell(chart: Chart, theta0: float, theta1: float, phi0: float = 0.0, label: str = "") -> Cell:
    """``theta0 <= theta <= theta1`` times a full turn in ``phi``; oriented by
    ``dtheta ^ dphi`` (the outward orientation of the round sphere)."""
    J = np.diag([theta1 - theta0, 2 * math.pi])
    return Cell(2, chart, lambda u: np.array([theta0 + (theta1 - theta0) * u[0], phi0 + 2 * math.pi * u[1]]),
                lambda u: J, label or f"band({theta0:.6g},{theta1:.6g})")
