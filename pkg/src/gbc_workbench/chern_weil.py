"""Euler form, Mathai-Quillen Thom forms and their transgressions.

Every construction is pointwise.  At a point of a host space (the total space
E, the sphere bundle SE, or the base with a section) we assemble

    Omega_t = t^2 |x|^2 / 2 + t sum_i e_i (nabla x)_i + sum_{i<j} R_ij e_i e_j

where ``x`` is the tautological section (or a section ``v``).  The curvature
term carries the sign that makes ``T(exp(-Omega_0)) = Pf(R)``.  The
nilpotent part of ``-Omega_t`` is ``-t N - K`` with ``N`` and ``K`` even and
commuting, so ``x exp(-Omega_t)`` is a polynomial in ``t`` times the Gaussian
``exp(-t^2 |x|^2 / 2)`` and every t-integral is a Gaussian moment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import special

from .berezin import berezin_integral, exp_even, pfaffian
from .bundles import (
    FIBER_BOX, RHO_MAX, BundleWithConnection, SectionField, SphereBundle,
    covariant_derivative_array, curvature, sphere_bundle,
)
from .chains import Cell, Chain
from .exterior import (
    Chart, DimensionError, EvaluationError, FormField, GradedElement, SmoothMap, pullback_form, wedge,
)


class DivergenceError(ValueError):
    pass


def a_const(k: int) -> float:
    """``(-1)^(k(2k+1)) / (2 pi)^k``."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    return (-1.0) ** (k * (2 * k + 1)) / (2 * math.pi) ** k


# ---------------------------------------------------------------------------
# Gaussian moments
# ---------------------------------------------------------------------------


def gaussian_moment(m: int, a: float, upper: float = math.inf) -> float:
    """``int_0^upper t^m exp(-a t^2 / 2) dt``."""
    if m < 0 or int(m) != m:
        raise ValueError("moment order must be a non-negative integer")
    if a < 0:
        raise ValueError("Gaussian width must be non-negative")
    s = (m + 1) / 2
    if math.isinf(upper):
        if a == 0:
            raise DivergenceError("infinite moment of a flat Gaussian diverges")
        return 0.5 * (2 / a) ** s * math.gamma(s)
    if upper < 0:
        raise ValueError("upper limit must be non-negative")
    z = a * upper * upper / 2
    if z <= 1.0:
        # alternating series in z; terms fall off like z^n / n!
        total, term, n = 0.0, upper ** (m + 1), 0
        while True:
            contrib = term / (m + 2 * n + 1)
            total += contrib
            n += 1
            term *= -z / n
            if abs(term) < 1e-18 * max(abs(total), 1e-300) or n > 200:
                return total
    return 0.5 * (2 / a) ** s * math.gamma(s) * float(special.gammainc(s, z))


# ---------------------------------------------------------------------------
# Pointwise Mathai-Quillen data
# ---------------------------------------------------------------------------


@dataclass
class MQData:
    """Fiber vector ``x``, its covariant differential and the pulled-back
    curvature at one point of a host space of dimension ``p``."""

    x: np.ndarray
    nabla_x: np.ndarray
    curv: np.ndarray
    p: int
    r: int

    @property
    def width(self) -> float:
        return float(self.x @ self.x)

    def front(self) -> GradedElement:
        out = GradedElement(self.p, self.r)
        for i in range(self.r):
            out.c[1 << i] = self.x[i]
        return out

    def nabla_element(self) -> GradedElement:
        """``N = sum_i e_i ^ (nabla x)_i``."""
        out = GradedElement(self.p, self.r)
        for i in range(self.r):
            for a in range(self.p):
                out.c[(1 << i) | (1 << (self.r + a))] = self.nabla_x[i, a]
        return out

    def curvature_element(self) -> GradedElement:
        """``K = sum_{i<j} R_ij e_i e_j`` (so ``exp(-K)`` integrates to ``Pf R``)."""
        out = GradedElement(self.p, self.r)
        r = self.r
        for i in range(r):
            for j in range(i + 1, r):
                for a in range(self.p):
                    for b in range(a + 1, self.p):
                        out.c[(1 << i) | (1 << j) | (1 << (r + a)) | (1 << (r + b))] = self.curv[i, j, a, b]
        return out

    def omega(self, t: float = 1.0) -> GradedElement:
        out = self.nabla_element() * t + self.curvature_element()
        out.c[0] = 0.5 * t * t * self.width
        return out


def mq_data(B: BundleWithConnection, base_chart: str, b, Jb, x, dx) -> MQData:
    """Pull the connection and curvature back along a map with base point
    ``b`` and base Jacobian ``Jb`` (n x p); ``x`` and ``dx`` (r x p) give the
    fiber vector and its ordinary differential."""
    Jb = np.asarray(Jb, float)
    x = np.asarray(x, float)
    w = np.einsum("ija,ab->ijb", B.omega(base_chart, b), Jb)
    R = np.einsum("ijcd,ca,db->ijab", B.curvature_array(base_chart, b), Jb, Jb)
    nabla = np.asarray(dx, float) + np.einsum("ija,j->ia", w, x)
    return MQData(x, nabla, R, Jb.shape[1], B.rank)


def _base_name(chart: Chart) -> str:
    return chart.name.split(":")[0]


def mq_total(B: BundleWithConnection, chart: Chart, q) -> MQData:
    n, r = B.base_dim, B.rank
    q = np.asarray(q, float)
    Jb = np.hstack([np.eye(n), np.zeros((n, r))])
    dx = np.hstack([np.zeros((r, n)), np.eye(r)])
    return mq_data(B, _base_name(chart), q[:n], Jb, q[n:], dx)


def mq_sphere(S: SphereBundle, chart: Chart, q) -> MQData:
    B = S.bundle
    n = B.base_dim
    q = np.asarray(q, float)
    p = chart.dim
    Jb = np.hstack([np.eye(n), np.zeros((n, p - n))])
    dx = np.hstack([np.zeros((B.rank, n)), S.fiber_jacobian(q[n:])])
    return mq_data(B, S.base_of[chart.name], q[:n], Jb, S.fiber_point(q[n:]), dx)


def mq_section(B: BundleWithConnection, v: SectionField, chart: Chart, b) -> MQData:
    b = np.asarray(b, float)
    n = B.base_dim
    return MQData(v(chart.name, b), covariant_derivative_array(B, v, chart.name, b),
                  B.curvature_array(chart.name, b), n, B.rank)


class MQElementField:
    """``q -> Omega_t`` on a host space: ``"total"`` (E), ``"sphere"`` (SE) or
    ``"section"`` (the base, with ``x`` replaced by a section ``v``)."""

    def __init__(self, bundle: BundleWithConnection, host: str = "total", t: float = 1.0,
                 section: Optional[SectionField] = None, sphere: Optional[SphereBundle] = None):
        if host == "section" and section is None:
            raise ValueError("section host needs a section")
        self.bundle = bundle
        self.host = host
        self.t = t
        self.section = section
        self.sphere = sphere if sphere is not None else (sphere_bundle(bundle) if host == "sphere" else None)

    def data(self, chart: Chart, q) -> MQData:
        if self.host == "total":
            return mq_total(self.bundle, chart, q)
        if self.host == "sphere":
            return mq_sphere(self.sphere, chart, q)
        return mq_section(self.bundle, self.section, chart, q)

    def __call__(self, chart: Chart, q) -> GradedElement:
        return self.data(chart, q).omega(self.t)


# ---------------------------------------------------------------------------
# t-polynomials
# ---------------------------------------------------------------------------


@dataclass
class TPolynomial:
    """``sum_m t^m c_m`` times ``exp(-t^2 a / 2)``."""

    terms: List[Tuple[int, GradedElement]] = field(default_factory=list)
    width: float = 0.0

    def powers(self, tol: float = 1e-14) -> List[int]:
        return [m for m, c in self.terms if not c.is_zero(tol)]

    def evaluate(self, t: float) -> GradedElement:
        total = None
        for m, c in self.terms:
            total = c * t ** m if total is None else total + c * t ** m
        if total is None:
            raise ValueError("empty polynomial has no shape")
        return total * math.exp(-0.5 * t * t * self.width)

    def berezin(self) -> "TPolynomial":
        return TPolynomial([(m, berezin_integral(c)) for m, c in self.terms], self.width)

    def integrate(self, upper: float = math.inf) -> GradedElement:
        """Exact t-integral from 0 to ``upper`` via Gaussian moments."""
        total = None
        for m, c in self.terms:
            piece = c * gaussian_moment(m, self.width, upper)
            total = piece if total is None else total + piece
        return total


def collect_t_polynomial(data: MQData, front: Optional[GradedElement] = None, tol: float = 0.0) -> TPolynomial:
    """Expand ``front ^ exp(-(Omega_t - t^2 |x|^2 / 2))`` in powers of ``t``."""
    if front is None:
        front = data.front()
    if front.is_zero(0.0):
        return TPolynomial([], data.width)
    N = data.nabla_element()
    tail = exp_even(-data.curvature_element())
    head = wedge(front, tail)
    terms = []
    power = GradedElement.scalar(data.p, data.r)
    for m in range(data.p + data.r + 1):
        if m:
            power = wedge(power, N) * (-1.0 / m)
            if power.is_zero(0.0):
                break
        coeff = wedge(power, head) if m else head
        if not coeff.is_zero(tol):
            terms.append((m, coeff))
    return TPolynomial(terms, data.width)


# ---------------------------------------------------------------------------
# Forms
# ---------------------------------------------------------------------------


def euler_form(B: BundleWithConnection) -> FormField:
    """``Pf(R) / (2 pi)^k``."""
    k = B.k
    n = B.base_dim
    scale = (2 * math.pi) ** -k

    def ev(chart: Chart, x):
        return pfaffian(curvature(B, chart.name, x)) * scale

    return FormField(n, 0, ev, 2 * k, B.charts.keys(), name=f"chi({B.name})")


def thom_value(data: MQData, t: float = 1.0) -> GradedElement:
    k = data.r // 2
    return berezin_integral(exp_even(-data.omega(t))) * (2 * math.pi) ** -k


def thom_form(B: BundleWithConnection, t: float = 1.0) -> FormField:
    """``U_t = T(exp(-Omega_t)) / (2 pi)^k`` on the total-space charts."""
    if t <= 0:
        raise ValueError("scale t must be positive")
    B.k
    charts = [B.total_chart(c).name for c in B.charts]
    return FormField(B.base_dim + B.rank, 0, lambda ch, q: thom_value(mq_total(B, ch, q), t),
                     B.rank, charts, name=f"U_{t}({B.name})")


def mq_integrand(B: BundleWithConnection, t: float) -> FormField:
    """``a(k) T(x exp(-Omega_t))`` on the total space (the t-derivative of the
    finite transgression)."""
    ak = a_const(B.k)
    charts = [B.total_chart(c).name for c in B.charts]

    def ev(ch, q):
        data = mq_total(B, ch, q)
        return berezin_integral(wedge(data.front(), exp_even(-data.omega(t)))) * ak

    return FormField(B.base_dim + B.rank, 0, ev, B.rank - 1, charts, name=f"aT(x e^-Omega_{t})")


def transgression_value(data: MQData, k: int, upper: float) -> GradedElement:
    poly = collect_t_polynomial(data)
    if not poly.terms:
        return GradedElement(data.p, 0)
    return poly.berezin().integrate(upper) * a_const(k)


def transgression_finite(B: BundleWithConnection, t: float) -> FormField:
    """``int_0^t a(k) T(x exp(-Omega_s)) ds`` on the total space."""
    charts = [B.total_chart(c).name for c in B.charts]
    return FormField(B.base_dim + B.rank, 0, lambda ch, q: transgression_value(mq_total(B, ch, q), B.k, t),
                     B.rank - 1, charts, name=f"TG[0,{t}]({B.name})")


def transgression_unit_interval(B: BundleWithConnection, v: SectionField) -> FormField:
    """``int_0^1 a(k) T(v exp(-Omega_{t,v})) dt`` on the base."""
    k = B.k
    return FormField(B.base_dim, 0, lambda ch, x: transgression_value(mq_section(B, v, ch, x), k, 1.0),
                     2 * k - 1, v.components.keys(), name=f"TG_v({B.name},{v.name})")


def transgression_infinite(B: BundleWithConnection, S: Optional[SphereBundle] = None) -> FormField:
    """``int_0^inf a(k) T(x exp(-Omega_t)) dt`` on the sphere-bundle charts."""
    S = S if S is not None else sphere_bundle(B)
    k = B.k

    def ev(ch: Chart, q):
        if ch.kind != "sphere":
            raise EvaluationError(f"chart {ch.name!r} is not part of SE")
        return transgression_value(mq_sphere(S, ch, q), k, math.inf)

    return FormField(B.base_dim + B.rank - 1, 0, ev, 2 * k - 1, S.charts, name=f"Q({B.name})")


def transgression_infinite_total(B: BundleWithConnection, unit_tol: float = 1e-9) -> FormField:
    """The same t-integral in total-space coordinates; defined only on ``|x| = 1``
    (off the unit sphere the Gaussian moments describe a different form)."""
    k = B.k
    charts = [B.total_chart(c).name for c in B.charts]

    def ev(ch: Chart, q):
        data = mq_total(B, ch, q)
        if abs(data.width - 1.0) > unit_tol:
            raise EvaluationError(f"|x|^2 = {data.width:.6g}: the infinite transgression lives on SE")
        return transgression_value(data, k, math.inf)

    return FormField(B.base_dim + B.rank, 0, ev, 2 * k - 1, charts, name=f"Q_E({B.name})")


def section_thom_form(B: BundleWithConnection, v: SectionField, t: float = 1.0) -> FormField:
    """``v^* U_t`` computed directly from ``Omega_{t,v}``."""
    return FormField(B.base_dim, 0, lambda ch, x: thom_value(mq_section(B, v, ch, x), t), B.rank,
                     v.components.keys(), name=f"v*U({B.name},{v.name})")


def section_thom_form_by_pullback(B: BundleWithConnection, v: SectionField, t: float = 1.0) -> FormField:
    """``v^* U_t`` through :func:`pullback_form` along the section map."""
    from .bundles import section_map

    U = thom_form(B, t)
    pieces = {c: pullback_form(section_map(v, c), U) for c in v.components}
    return FormField(B.base_dim, 0, lambda ch, x: pieces[ch.name](ch, x), B.rank, pieces.keys(),
                     name="v*U(pullback)")


# ---------------------------------------------------------------------------
# Ball compactification
# ---------------------------------------------------------------------------


def ball_chart(B: BundleWithConnection, base: str) -> Chart:
    ch = B.chart(base)
    periods = tuple(ch.periods) + (0.0,) * B.rank if ch.periods else ()
    return Chart(f"{base}:B", ch.dim + B.rank, tuple(ch.lower) + (-1.0,) * B.rank,
                 tuple(ch.upper) + (1.0,) * B.rank, ch.orientation, periods, kind="ball")


def ball_map(B: BundleWithConnection, base: str) -> SmoothMap:
    """Fiberwise ``y -> y / sqrt(1 - |y|^2)`` from the open ball bundle to E."""
    n, r = B.base_dim, B.rank

    def fn(q):
        y = q[n:]
        s2 = 1.0 - float(y @ y)
        if s2 <= 0:
            raise EvaluationError("ball coordinate outside the open unit ball")
        return np.concatenate([q[:n], y / math.sqrt(s2)])

    def jac(q):
        y = q[n:]
        s2 = 1.0 - float(y @ y)
        if s2 <= 0:
            raise EvaluationError("ball coordinate outside the open unit ball")
        s = math.sqrt(s2)
        J = np.eye(n + r)
        J[n:, n:] = np.eye(r) / s + np.outer(y, y) / s ** 3
        return J

    return SmoothMap(ball_chart(B, base), B.total_chart(base), fn, jac, name="ball")


def compactify_to_ball(f: FormField, B: BundleWithConnection) -> FormField:
    """Pull a total-space form back to the open unit-ball bundle."""
    pieces = {}
    for base in B.charts:
        m = ball_map(B, base)
        if f.charts is None or m.target.name in f.charts:
            pieces[m.source.name] = pullback_form(m, f)

    def ev(ch: Chart, q):
        y = np.asarray(q, float)[B.base_dim:]
        if float(y @ y) >= 1.0:
            raise EvaluationError("|y| >= 1 is outside the ball bundle")
        return pieces[ch.name](ch, q)

    return FormField(f.p, f.r, ev, f.degree, pieces.keys(), name=f"ball*{f.name}")


# ---------------------------------------------------------------------------
# Fiber chains
# ---------------------------------------------------------------------------


def fiber_disk_chain(B: BundleWithConnection, base: str, b, rho_max: float = RHO_MAX,
                     ball: bool = False) -> Chain:
    """The fiber over ``b`` as a polar 2-cell (rank 2), radius ``rho_max``,
    oriented by ``dx_1 ^ dx_2``."""
    if B.rank != 2:
        raise DimensionError("polar fiber cells are provided for rank 2")
    b = np.asarray(b, float)
    chart = ball_chart(B, base) if ball else B.total_chart(base)
    radius = 1.0 if ball else rho_max
    if not ball and radius > FIBER_BOX:
        raise ValueError("radius beyond the fiber box")

    def fn(u):
        rho, psi = radius * u[0], 2 * math.pi * u[1]
        return np.concatenate([b, [rho * math.cos(psi), rho * math.sin(psi)]])

    def jac(u):
        rho, psi = radius * u[0], 2 * math.pi * u[1]
        J = np.zeros((chart.dim, 2))
        J[-2, 0] = radius * math.cos(psi)
        J[-1, 0] = radius * math.sin(psi)
        J[-2, 1] = -2 * math.pi * rho * math.sin(psi)
        J[-1, 1] = 2 * math.pi * rho * math.cos(psi)
        return J

    return Chain([(1, Cell(2, chart, fn, jac, label=f"fiber-disk@{tuple(np.round(b, 6))}"))])


def fiber_box_chain(B: BundleWithConnection, base: str, b, half_width: float) -> Chain:
    """The fiber square ``[-w, w]^r`` over ``b`` (any rank), one cell."""
    b = np.asarray(b, float)
    r = B.rank
    chart = B.total_chart(base)
    J = np.zeros((chart.dim, r))
    J[len(b):, :] = 2 * half_width * np.eye(r)
    return Chain([(1, Cell(r, chart, lambda u: np.concatenate([b, half_width * (2 * np.asarray(u) - 1)]),
                           lambda u: J, label="fiber-box"))])


def fiber_circle_chain(S: SphereBundle, base: str, b, label: str = "a") -> Chain:
    """The oriented fiber circle of SE over ``b``: psi from 0 to 2 pi."""
    if S.bundle.rank != 2:
        raise DimensionError("fiber circles are provided for rank 2")
    chart = S.chart(S.chart_over(base, label))
    b = np.asarray(b, float)
    J = np.zeros((chart.dim, 1))
    J[-1, 0] = 2 * math.pi
    return Chain([(1, Cell(1, chart, lambda u: np.concatenate([b, [2 * math.pi * u[0]]]), lambda u: J,
                           label="fiber-circle"))])
