"""Graded-commutative algebra of forms with values in the exterior algebra of a fiber.

An element lives in ``Lambda(R^p)* (x) Lambda(R^r)`` with the super (Koszul) sign
rule.  Generators are packed into one bitmask: fiber generator ``e_j`` is bit
``j`` and form generator ``dx^a`` is bit ``r + a``.  The canonical monomial for
a mask lists its generators in ascending bit order, so every monomial reads
``e_J ^ dx^I`` (fiber part first).  All signs come from counting transpositions
while sorting a concatenated product into that order.

Coefficients are held in a dense vector of length ``2**(p + r)``; absent
monomials are exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

ZERO_TOL = 1e-12
FD_STEP = 1e-4
DERIVATIVE_TOL = 1e-6


class DimensionError(ValueError):
    """Operands live in algebras of different shape."""


class EvaluationError(ValueError):
    """A field was evaluated outside the region where it is defined."""


@lru_cache(maxsize=None)
def _popcount(nbits: int) -> np.ndarray:
    masks = np.arange(1 << nbits)
    counts = np.zeros(1 << nbits, dtype=np.int64)
    for b in range(nbits):
        counts += (masks >> b) & 1
    return counts


@lru_cache(maxsize=None)
def _tables(nbits: int) -> tuple[np.ndarray, np.ndarray]:
    """Product index and sign for every pair of basis monomials."""
    size = 1 << nbits
    a = np.arange(size)[:, None]
    b = np.arange(size)[None, :]
    pc = _popcount(nbits)
    swaps = np.zeros((size, size), dtype=np.int64)
    for j in range(nbits):
        bj = (b >> j) & 1
        swaps += bj * pc[a >> (j + 1)]
    sign = np.where(swaps % 2 == 0, 1.0, -1.0)
    sign[(a & b) != 0] = 0.0
    return (a | b).astype(np.int64), sign


def _mask(I: Iterable[int], J: Iterable[int], p: int, r: int) -> tuple[int, float]:
    """Bitmask of ``e_J ^ dx^I`` (generators listed as given) and the sign
    relating it to the canonical monomial."""
    gens = [j for j in J] + [r + a for a in I]
    for j in J:
        if not 0 <= j < r:
            raise DimensionError(f"fiber index {j} outside rank {r}")
    for a in I:
        if not 0 <= a < p:
            raise DimensionError(f"form index {a} outside dimension {p}")
    if len(set(gens)) != len(gens):
        return 0, 0.0
    inversions = sum(1 for x in range(len(gens)) for y in range(x + 1, len(gens)) if gens[x] > gens[y])
    mask = 0
    for g in gens:
        mask |= 1 << g
    return mask, (-1.0) ** inversions


class GradedElement:
    """Element of ``Lambda(R^p)* (x) Lambda(R^r)``.

    Keys exposed to callers are pairs ``(I, J)`` of ascending 0-based index
    tuples meaning the monomial ``e_J ^ dx^I``.
    """

    __slots__ = ("p", "r", "c")

    def __init__(self, p: int, r: int, coeffs=None):
        self.p = int(p)
        self.r = int(r)
        size = 1 << (self.p + self.r)
        if coeffs is None:
            self.c = np.zeros(size)
        elif isinstance(coeffs, dict):
            self.c = np.zeros(size)
            for (I, J), val in coeffs.items():
                mask, sgn = _mask(I, J, self.p, self.r)
                if sgn:
                    self.c[mask] += sgn * val
        else:
            arr = np.asarray(coeffs, dtype=float)
            if arr.shape != (size,):
                raise DimensionError(f"coefficient vector must have length {size}")
            self.c = arr

    # -- constructors -------------------------------------------------------
    @classmethod
    def scalar(cls, p: int, r: int, value: float = 1.0) -> "GradedElement":
        out = cls(p, r)
        out.c[0] = value
        return out

    @classmethod
    def basis(cls, p: int, r: int, I: Sequence[int] = (), J: Sequence[int] = (), value: float = 1.0):
        """``value * e_J ^ dx^I`` with generators multiplied in the order given."""
        return cls(p, r, {(tuple(I), tuple(J)): value})

    @classmethod
    def dx(cls, p: int, r: int, a: int) -> "GradedElement":
        return cls.basis(p, r, (a,), ())

    @classmethod
    def e(cls, p: int, r: int, j: int) -> "GradedElement":
        return cls.basis(p, r, (), (j,))

    # -- structure ----------------------------------------------------------
    @property
    def nbits(self) -> int:
        return self.p + self.r

    def _check(self, other: "GradedElement") -> None:
        if self.p != other.p or self.r != other.r:
            raise DimensionError(f"(p, r) mismatch: {(self.p, self.r)} vs {(other.p, other.r)}")

    def split_mask(self, mask: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        J = tuple(j for j in range(self.r) if mask >> j & 1)
        I = tuple(a for a in range(self.p) if mask >> (self.r + a) & 1)
        return I, J

    def items(self, tol: float = 0.0):
        """Yield ``((I, J), coefficient)`` for every nonzero monomial."""
        for mask in np.flatnonzero(np.abs(self.c) > tol):
            yield self.split_mask(int(mask)), float(self.c[mask])

    def coeff(self, I: Sequence[int] = (), J: Sequence[int] = ()) -> float:
        mask, sgn = _mask(I, J, self.p, self.r)
        return sgn * float(self.c[mask]) if sgn else 0.0

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """Form degree and fiber degree of every basis slot."""
        masks = np.arange(self.c.size)
        pc = _popcount(self.nbits)
        fiber = pc[masks & ((1 << self.r) - 1)]
        return pc[masks] - fiber, fiber

    def total_degrees(self) -> np.ndarray:
        return _popcount(self.nbits)

    def degree(self, tol: float = ZERO_TOL) -> int:
        """Largest total degree carrying a coefficient above ``tol`` (-1 for zero)."""
        nz = np.abs(self.c) > tol
        return int(self.total_degrees()[nz].max()) if nz.any() else -1

    def part(self, form_degree: Optional[int] = None, fiber_degree: Optional[int] = None) -> "GradedElement":
        fd, jd = self.degrees()
        keep = np.ones(self.c.size, dtype=bool)
        if form_degree is not None:
            keep &= fd == form_degree
        if fiber_degree is not None:
            keep &= jd == fiber_degree
        return GradedElement(self.p, self.r, np.where(keep, self.c, 0.0))

    def even_part(self) -> "GradedElement":
        return GradedElement(self.p, self.r, np.where(self.total_degrees() % 2 == 0, self.c, 0.0))

    def odd_part(self) -> "GradedElement":
        return GradedElement(self.p, self.r, np.where(self.total_degrees() % 2 == 1, self.c, 0.0))

    def norm(self) -> float:
        return float(np.max(np.abs(self.c))) if self.c.size else 0.0

    def is_zero(self, tol: float = ZERO_TOL) -> bool:
        return self.norm() <= tol

    def copy(self) -> "GradedElement":
        return GradedElement(self.p, self.r, self.c.copy())

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = self.copy()
            out.c[0] += other
            return out
        self._check(other)
        return GradedElement(self.p, self.r, self.c + other.c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        self._check(other)
        return GradedElement(self.p, self.r, self.c - other.c)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return GradedElement(self.p, self.r, -self.c)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return GradedElement(self.p, self.r, self.c * float(other))
        return wedge(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return GradedElement(self.p, self.r, self.c * float(other))
        return NotImplemented

    def __truediv__(self, other: float):
        return GradedElement(self.p, self.r, self.c / float(other))

    def __xor__(self, other):
        return wedge(self, other)

    def allclose(self, other: "GradedElement", tol: float = ZERO_TOL) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.c - other.c), initial=0.0) <= tol)

    def __eq__(self, other):
        if not isinstance(other, GradedElement):
            return NotImplemented
        if (self.p, self.r) != (other.p, other.r):
            return False
        return self.allclose(other)

    __hash__ = None

    def __repr__(self):
        terms = []
        for (I, J), val in self.items(ZERO_TOL):
            mono = "^".join([f"e{j + 1}" for j in J] + [f"dx{a + 1}" for a in I]) or "1"
            terms.append(f"{val:+.6g}*{mono}")
        body = " ".join(terms) if terms else "0"
        return f"GradedElement(p={self.p}, r={self.r}: {body})"


def wedge(a: GradedElement, b: GradedElement) -> GradedElement:
    """Graded product with the Koszul sign rule on total degree."""
    if not isinstance(a, GradedElement) or not isinstance(b, GradedElement):
        raise TypeError("wedge expects GradedElement operands")
    a._check(b)
    idx, sign = _tables(a.nbits)
    ia = np.flatnonzero(a.c)
    ib = np.flatnonzero(b.c)
    out = np.zeros_like(a.c)
    if ia.size and ib.size:
        sub = np.ix_(ia, ib)
        vals = sign[sub] * np.outer(a.c[ia], b.c[ib])
        out += np.bincount(idx[sub].ravel(), weights=vals.ravel(), minlength=out.size)
    return GradedElement(a.p, a.r, out)


def wedge_all(elements: Iterable[GradedElement]) -> GradedElement:
    it = iter(elements)
    acc = next(it)
    for el in it:
        acc = wedge(acc, el)
    return acc


# ---------------------------------------------------------------------------
# Charts, fields and maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Open coordinate box.  Axes with a period are angle-like and are reduced
    into the box before membership checks.  ``embed`` maps chart points into a
    Euclidean space for distance computations."""

    name: str
    dim: int
    lower: tuple
    upper: tuple
    orientation: int = 1
    periods: tuple = ()
    embed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kind: str = "base"

    def __post_init__(self):
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise DimensionError("chart box must match chart dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"chart {self.name!r} has an empty box")
        if self.orientation not in (1, -1):
            raise ValueError("orientation sign must be +1 or -1")
        if self.periods and len(self.periods) != self.dim:
            raise DimensionError("periods must list one entry per axis")

    def reduce(self, point) -> np.ndarray:
        pt = np.array(point, dtype=float)
        for i, per in enumerate(self.periods):
            if per:
                lo = self.lower[i] + (self.upper[i] - self.lower[i] - per) / 2
                pt[i] = lo + np.mod(pt[i] - lo, per)
        return pt

    def margin(self, point) -> float:
        pt = self.reduce(point)
        lo = np.asarray(self.lower, float)
        hi = np.asarray(self.upper, float)
        return float(min(np.min(pt - lo), np.min(hi - pt))) if self.dim else np.inf

    def contains(self, point, margin: float = 0.0) -> bool:
        return self.margin(point) > margin

    def to_ambient(self, point) -> np.ndarray:
        pt = np.asarray(point, dtype=float)
        return np.asarray(self.embed(pt), float) if self.embed is not None else pt


class FormField:
    """Pointwise assignment of :class:`GradedElement` values on one or more charts.

    ``evaluator(chart, point)`` must be pure.  ``derivative``, when given,
    returns the exterior derivative directly.
    """

    def __init__(self, p: int, r: int, evaluator, degree: Optional[int] = None,
                 charts: Optional[Iterable[str]] = None, derivative=None, name: str = ""):
        self.p = p
        self.r = r
        self.evaluator = evaluator
        self.degree = degree
        self.charts = frozenset(charts) if charts is not None else None
        self.derivative = derivative
        self.name = name

    def __call__(self, chart: Chart, point) -> GradedElement:
        if self.charts is not None and chart.name not in self.charts:
            raise EvaluationError(f"{self.name or 'field'} is not defined on chart {chart.name!r}")
        val = self.evaluator(chart, np.asarray(point, dtype=float))
        if (val.p, val.r) != (self.p, self.r):
            raise DimensionError(f"evaluator returned {(val.p, val.r)}, expected {(self.p, self.r)}")
        return val

    def __add__(self, other: "FormField") -> "FormField":
        return _combine(self, other, 1.0)

    def __sub__(self, other: "FormField") -> "FormField":
        return _combine(self, other, -1.0)

    def scaled(self, factor: float) -> "FormField":
        return FormField(self.p, self.r, lambda ch, x: self(ch, x) * factor, self.degree,
                         self.charts, name=f"{factor}*{self.name}")

    def on(self, charts: Iterable[str]) -> "FormField":
        return FormField(self.p, self.r, self.evaluator, self.degree, charts, self.derivative, self.name)


def _combine(f: FormField, g: FormField, s: float) -> FormField:
    if (f.p, f.r) != (g.p, g.r):
        raise DimensionError("cannot combine fields of different shape")
    charts = None
    if f.charts is not None and g.charts is not None:
        charts = f.charts & g.charts
    elif f.charts is not None or g.charts is not None:
        charts = f.charts if f.charts is not None else g.charts
    degree = f.degree if f.degree == g.degree else None
    return FormField(f.p, f.r, lambda ch, x: f(ch, x) + g(ch, x) * s, degree, charts,
                     name=f"({f.name}{'+' if s > 0 else '-'}{g.name})")


def constant_field(value: GradedElement, charts=None) -> FormField:
    return FormField(value.p, value.r, lambda ch, x: value, value.degree(), charts,
                     derivative=lambda ch, x: GradedElement(value.p, value.r), name="const")


def _partial(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order central difference of a vector-valued function."""
    step = np.zeros_like(x)
    step[axis] = h
    return (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step) + f(x - 2 * step)) / (12 * h)


def exterior_derivative(f: FormField, chart: Chart, point, h: float = FD_STEP,
                        use_analytic: bool = True) -> GradedElement:
    """``d f`` at ``point``: analytic if the field carries a derivative,
    otherwise ``sum_a dx^a ^ d_a f`` with fourth-order central differences.
    Fiber generators are treated as constants of the derivation."""
    x = np.asarray(point, dtype=float)
    if use_analytic and f.derivative is not None:
        return f.derivative(chart, x)
    if chart.dim != f.p:
        raise DimensionError(f"chart dimension {chart.dim} does not match form dimension {f.p}")
    if not chart.contains(x, margin=2 * h):
        raise EvaluationError(f"point {x} closer than {2 * h} to the boundary of chart {chart.name!r}")
    out = GradedElement(f.p, f.r)
    for a in range(f.p):
        da = _partial(lambda y: f(chart, y).c, x, a, h)
        out = out + wedge(GradedElement.dx(f.p, f.r, a), GradedElement(f.p, f.r, da))
    return out


def d_field(f: FormField, h: float = FD_STEP) -> FormField:
    """The field ``q -> d f(q)``."""
    deg = None if f.degree is None else f.degree + 1
    return FormField(f.p, f.r, lambda ch, x: exterior_derivative(f, ch, x, h), deg, f.charts,
                     name=f"d({f.name})")


# ---------------------------------------------------------------------------
# Smooth maps and pullback
# ---------------------------------------------------------------------------


def jacobian_fd(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = [_partial(lambda y: np.atleast_1d(np.asarray(fn(y), float)), x, b, h) for b in range(x.size)]
    return np.stack(cols, axis=-1) if cols else np.zeros((np.atleast_1d(fn(x)).size, 0))


class SmoothMap:
    """Map between charts with an optional analytic Jacobian (target x source)."""

    def __init__(self, source: Chart, target: Chart, fn, jac=None, name: str = "", h: float = FD_STEP):
        self.source = source
        self.target = target
        self.fn = fn
        self.jac = jac
        self.name = name
        self.h = h

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float).reshape(self.target.dim, self.source.dim)
        return jacobian_fd(self.fn, x, self.h).reshape(self.target.dim, self.source.dim)

    def jacobian_residual(self, points: Iterable) -> float:
        """Largest deviation between the analytic Jacobian and finite differences."""
        worst = 0.0
        for x in points:
            fd = jacobian_fd(self.fn, np.asarray(x, float), self.h).reshape(self.target.dim, self.source.dim)
            worst = max(worst, float(np.max(np.abs(self.jacobian(x) - fd), initial=0.0)))
        return worst

    def compose(self, outer: "SmoothMap") -> "SmoothMap":
        """``outer o self``."""
        if outer.source.name != self.target.name:
            raise EvaluationError(f"cannot compose: {self.target.name!r} != {outer.source.name!r}")
        return SmoothMap(self.source, outer.target, lambda x: outer(self(x)),
                         lambda x: outer.jacobian(self(x)) @ self.jacobian(x),
                         name=f"{outer.name}o{self.name}")


@lru_cache(maxsize=None)
def _form_masks(p: int) -> tuple:
    return tuple(range(1 << p))


def substitute_forms(el: GradedElement, J: np.ndarray) -> GradedElement:
    """Replace ``dy^a`` by ``sum_b J[a, b] dx^b`` in every monomial; fiber
    factors are carried along unchanged."""
    J = np.asarray(J, dtype=float)
    p_t, q = J.shape
    if p_t != el.p:
        raise DimensionError(f"Jacobian has {p_t} rows, element has form dimension {el.p}")
    images = np.zeros((1 << p_t, 1 << q))
    images[0, 0] = 1.0
    one_forms = [GradedElement(q, 0, _one_form_vec(J[a], q)) for a in range(p_t)]
    cache = {0: GradedElement.scalar(q, 0)}
    for I in range(1, 1 << p_t):
        top = I.bit_length() - 1
        cache[I] = wedge(cache[I & ~(1 << top)], one_forms[top])
        images[I] = cache[I].c
    coeffs = el.c.reshape(1 << p_t, 1 << el.r)
    new = images.T @ coeffs
    return GradedElement(q, el.r, new.ravel())


def _one_form_vec(row: np.ndarray, q: int) -> np.ndarray:
    v = np.zeros(1 << q)
    for b in range(q):
        v[1 << b] = row[b]
    return v


def pullback_form(m: SmoothMap, f: FormField) -> FormField:
    """``m^* f``: transpose-Jacobian substitution on the form factor."""
    if f.charts is not None and m.target.name not in f.charts:
        raise EvaluationError(f"map lands in {m.target.name!r}, field lives on {sorted(f.charts)}")
    if f.p != m.target.dim:
        raise DimensionError("form dimension does not match the target chart")

    def ev(chart: Chart, x: np.ndarray) -> GradedElement:
        if chart.name != m.source.name:
            raise EvaluationError(f"pullback is defined on {m.source.name!r}, not {chart.name!r}")
        return substitute_forms(f(m.target, m(x)), m.jacobian(x))

    return FormField(m.source.dim, f.r, ev, f.degree, [m.source.name], name=f"{m.name}*{f.name}")
