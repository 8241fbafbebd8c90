"""Oriented Euclidean vector bundles in orthonormal local frames.

Connections are stored per chart as arrays ``omega[i, j, a]``: the ``dx^a``
coefficient of the 1-form ``omega_ij``, acting on section components by
``(nabla s)_i = d s_i + sum_j omega_ij s_j``.  Frames are orthonormal, so the
metric is the identity and metric compatibility is antisymmetry of ``omega``.
On an overlap, components change by ``s' = g s`` and
``omega' = g omega g^-1 - (dg) g^-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .berezin import AntisymmetricFormMatrix
from .exterior import (
    FD_STEP, Chart, DimensionError, EvaluationError, FormField, GradedElement,
    SmoothMap, _partial, jacobian_fd,
)

TWO_PI = 2 * math.pi
RHO_MAX = 6.0
FIBER_BOX = 7.0


class UnknownFixture(KeyError):
    pass


# ---------------------------------------------------------------------------
# Charts for the built-in base manifolds
# ---------------------------------------------------------------------------


def _sphere_embed(x):
    th, ph = x[0], x[1]
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


def _torus_embed(x):
    return np.array([math.cos(x[0]), math.sin(x[0]), math.cos(x[1]), math.sin(x[1])])


def _circle_embed(x):
    return np.array([math.cos(x[0]), math.sin(x[0])])


def s2_charts() -> Dict[str, Chart]:
    """Polar-cap charts in spherical coordinates (theta, phi) plus the
    pole-free patch ``sphere`` used by scalar forms and chains."""
    per = (0.0, TWO_PI)
    return {
        "north": Chart("north", 2, (0.0, -math.pi), (0.75 * math.pi, 3 * math.pi), 1, per, _sphere_embed),
        "south": Chart("south", 2, (0.25 * math.pi, -math.pi), (math.pi, 3 * math.pi), 1, per, _sphere_embed),
        "sphere": Chart("sphere", 2, (0.0, -math.pi), (math.pi, 3 * math.pi), 1, per, _sphere_embed),
    }


def t2_charts() -> Dict[str, Chart]:
    return {"torus": Chart("torus", 2, (-math.pi, -math.pi), (3 * math.pi, 3 * math.pi), 1,
                           (TWO_PI, TWO_PI), _torus_embed)}


def s1_charts() -> Dict[str, Chart]:
    return {"circle": Chart("circle", 1, (-math.pi,), (3 * math.pi,), 1, (TWO_PI,), _circle_embed)}


BASES = {"S1": s1_charts, "S2": s2_charts, "T2": t2_charts}


def rot(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


@dataclass
class Transition:
    """Frame change from ``source`` to ``target`` on their overlap."""

    source: str
    target: str
    frame: Callable[[np.ndarray], np.ndarray]
    coord_map: Optional[Callable[[np.ndarray], np.ndarray]] = None
    frame_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def map(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.coord_map(x), float) if self.coord_map else np.asarray(x, float)

    def dframe(self, x: np.ndarray) -> np.ndarray:
        """``d g`` as an array ``[i, j, a]``."""
        if self.frame_jac is not None:
            return np.asarray(self.frame_jac(x), float)
        x = np.asarray(x, float)
        return np.stack([_partial(lambda y: self.frame(y), x, a, FD_STEP) for a in range(x.size)], axis=-1)


@dataclass
class BundleWithConnection:
    name: str
    rank: int
    charts: Dict[str, Chart]
    connection: Dict[str, Callable[[np.ndarray], np.ndarray]]
    connection_derivative: Dict[str, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)
    transitions: Sequence[Transition] = ()
    base: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def base_dim(self) -> int:
        return next(iter(self.charts.values())).dim

    @property
    def k(self) -> int:
        if self.rank % 2:
            raise DimensionError("odd rank has no Euler form")
        return self.rank // 2

    def chart(self, name: str) -> Chart:
        try:
            return self.charts[name]
        except KeyError:
            raise EvaluationError(f"bundle {self.name!r} has no chart {name!r}") from None

    def omega(self, chart: str, x) -> np.ndarray:
        x = np.asarray(x, float)
        ch = self.chart(chart)
        if not ch.contains(x):
            raise EvaluationError(f"{x} outside chart {chart!r}")
        return np.asarray(self.connection[chart](x), float).reshape(self.rank, self.rank, ch.dim)

    def domega(self, chart: str, x) -> np.ndarray:
        """``D[i, j, a, b] = d_b omega_ij,a``."""
        x = np.asarray(x, float)
        if chart in self.connection_derivative:
            return np.asarray(self.connection_derivative[chart](x), float)
        ch = self.chart(chart)
        if not ch.contains(x, margin=2 * FD_STEP):
            raise EvaluationError(f"{x} within finite-difference margin of chart {chart!r}")
        return np.stack([_partial(lambda y: self.omega(chart, y), x, b, FD_STEP) for b in range(ch.dim)],
                        axis=-1)

    def curvature_array(self, chart: str, x) -> np.ndarray:
        """``R[i, j, a, b]`` with ``R_ij = sum_{a<b} R[i,j,a,b] dx^a ^ dx^b``."""
        w = self.omega(chart, x)
        D = self.domega(chart, x)
        dw = np.swapaxes(D, 2, 3) - D
        ww = np.einsum("ika,kjb->ijab", w, w)
        return dw + ww - np.swapaxes(ww, 2, 3)

    def transition(self, source: str, target: str) -> Transition:
        for t in self.transitions:
            if t.source == source and t.target == target:
                return t
        for t in self.transitions:
            if t.source == target and t.target == source:
                return _inverse_transition(t)
        raise EvaluationError(f"no transition {source!r} -> {target!r}")

    def total_chart(self, chart: str) -> Chart:
        return total_space_chart(self.chart(chart), self.rank)


def _inverse_transition(t: Transition) -> Transition:
    if t.coord_map is not None:
        raise EvaluationError("inverse of a non-identity coordinate change is not available")
    return Transition(t.target, t.source, lambda x: t.frame(x).T)


def two_form_element(R2: np.ndarray, p: int, r: int = 0) -> GradedElement:
    """Scalar 2-form ``sum_{a<b} R2[a, b] dx^a ^ dx^b`` as a graded element."""
    out = GradedElement(p, r)
    for a in range(p):
        for b in range(a + 1, p):
            out.c[(1 << (r + a)) | (1 << (r + b))] += R2[a, b]
    return out


def curvature(B: BundleWithConnection, chart: str, x) -> AntisymmetricFormMatrix:
    """``R = d omega + omega ^ omega`` with 2-form entries."""
    R = B.curvature_array(chart, x)
    n = B.chart(chart).dim
    entries = [[two_form_element(R[i, j], n) for j in range(B.rank)] for i in range(B.rank)]
    return AntisymmetricFormMatrix(entries, tol=1e-9)


def pullback_bundle(B: BundleWithConnection, m: SmoothMap) -> BundleWithConnection:
    """``m^* B`` on the single chart ``m.source``."""
    if m.target.name not in B.charts:
        raise EvaluationError(f"map lands in {m.target.name!r}, not a chart of {B.name!r}")

    def conn(q):
        return np.einsum("ija,ab->ijb", B.omega(m.target.name, m(q)), m.jacobian(q))

    return BundleWithConnection(f"{m.name}*{B.name}", B.rank, {m.source.name: m.source},
                                {m.source.name: conn}, base=m.source.name)


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------


@dataclass
class SectionField:
    bundle: BundleWithConnection
    components: Dict[str, Callable[[np.ndarray], np.ndarray]]
    jacobians: Dict[str, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)
    name: str = "section"

    def __call__(self, chart: str, x) -> np.ndarray:
        try:
            fn = self.components[chart]
        except KeyError:
            raise EvaluationError(f"section {self.name!r} undefined on chart {chart!r}") from None
        return np.asarray(fn(np.asarray(x, float)), float)

    def jacobian(self, chart: str, x) -> np.ndarray:
        x = np.asarray(x, float)
        if chart in self.jacobians:
            return np.asarray(self.jacobians[chart](x), float)
        return jacobian_fd(lambda y: self(chart, y), x)

    def scaled(self, factor: float) -> "SectionField":
        comps = {c: (lambda f: (lambda x: factor * f(x)))(fn) for c, fn in self.components.items()}
        jacs = {c: (lambda f: (lambda x: factor * f(x)))(fn) for c, fn in self.jacobians.items()}
        return SectionField(self.bundle, comps, jacs, f"{factor}*{self.name}")

    def compatibility_residual(self, samples: Dict[tuple, Sequence]) -> float:
        """Largest ``|s_target - g s_source|`` over sampled overlap points."""
        worst = 0.0
        for (src, tgt), pts in samples.items():
            t = self.bundle.transition(src, tgt)
            for x in pts:
                x = np.asarray(x, float)
                worst = max(worst, float(np.max(np.abs(self(tgt, t.map(x)) - t.frame(x) @ self(src, x)))))
        return worst


def covariant_derivative_array(B: BundleWithConnection, s: SectionField, chart: str, x) -> np.ndarray:
    """``(nabla s)[i, a] = d_a s_i + sum_j omega_ij,a s_j``."""
    return s.jacobian(chart, x) + np.einsum("ija,j->ia", B.omega(chart, x), s(chart, x))


def covariant_derivative(B: BundleWithConnection, s: SectionField, chart: str, x) -> GradedElement:
    """Fiber-valued 1-form ``sum_i e_i ^ (nabla s)_i``."""
    D = covariant_derivative_array(B, s, chart, x)
    n = B.chart(chart).dim
    out = GradedElement(n, B.rank)
    for i in range(B.rank):
        for a in range(n):
            out.c[(1 << i) | (1 << (B.rank + a))] = D[i, a]
    return out


def zero_section(B: BundleWithConnection) -> SectionField:
    zero = np.zeros(B.rank)
    return SectionField(B, {c: (lambda x: zero) for c in B.charts},
                        {c: (lambda ch: (lambda x: np.zeros((B.rank, ch.dim))))(ch) for c, ch in B.charts.items()},
                        "zero")


def constant_section(B: BundleWithConnection, vec: Sequence[float]) -> SectionField:
    """Constant components in every chart (a parallel section only when flat
    and the transitions are trivial)."""
    v = np.asarray(vec, float)
    return SectionField(B, {c: (lambda x: v) for c in B.charts},
                        {c: (lambda ch: (lambda x: np.zeros((B.rank, ch.dim))))(ch) for c, ch in B.charts.items()},
                        f"const{tuple(vec)}")


# ---------------------------------------------------------------------------
# Total space and sphere bundle
# ---------------------------------------------------------------------------


def total_space_chart(base: Chart, rank: int, box: float = FIBER_BOX) -> Chart:
    periods = tuple(base.periods) + (0.0,) * rank if base.periods else ()
    return Chart(f"{base.name}:E", base.dim + rank, tuple(base.lower) + (-box,) * rank,
                 tuple(base.upper) + (box,) * rank, base.orientation, periods, kind="total")


def total_space_bundle(B: BundleWithConnection) -> BundleWithConnection:
    """``pi^* B`` over the total-space charts."""
    n, r = B.base_dim, B.rank
    charts, conn, dconn = {}, {}, {}
    for name, ch in B.charts.items():
        tc = total_space_chart(ch, r)
        charts[tc.name] = tc

        def w(q, name=name):
            out = np.zeros((r, r, n + r))
            out[:, :, :n] = B.omega(name, q[:n])
            return out

        def dw(q, name=name):
            out = np.zeros((r, r, n + r, n + r))
            out[:, :, :n, :n] = B.domega(name, q[:n])
            return out

        conn[tc.name] = w
        dconn[tc.name] = dw
    return BundleWithConnection(f"pi*{B.name}", r, charts, conn, dconn, base=f"{B.base}:E")


def tautological_section(B: BundleWithConnection) -> SectionField:
    """``x(e) = e``: components are the fiber coordinates."""
    E = total_space_bundle(B)
    n, r = B.base_dim, B.rank
    jac = np.hstack([np.zeros((r, n)), np.eye(r)])
    return SectionField(E, {c: (lambda q: q[n:]) for c in E.charts}, {c: (lambda q: jac) for c in E.charts},
                        "tautological")


def projection_map(B: BundleWithConnection, chart: str) -> SmoothMap:
    base = B.chart(chart)
    tc = B.total_chart(chart)
    n, r = B.base_dim, B.rank
    J = np.hstack([np.eye(n), np.zeros((n, r))])
    return SmoothMap(tc, base, lambda q: q[:n], lambda q: J, name="pi")


def section_map(s: SectionField, chart: str) -> SmoothMap:
    """The section as a map from the base chart into the total-space chart."""
    B = s.bundle
    base = B.chart(chart)
    n = base.dim
    return SmoothMap(base, B.total_chart(chart), lambda x: np.concatenate([x, s(chart, x)]),
                     lambda x: np.vstack([np.eye(n), s.jacobian(chart, x)]), name=s.name)


def unit_fiber_vector(psi: float) -> np.ndarray:
    """Point of the rank-2 unit circle at fiber angle ``psi``.

    The angle runs clockwise; this is the fiber orientation of SE under which
    the transgression form integrates to +1 over a fiber.
    """
    return np.array([math.cos(psi), -math.sin(psi)])


def unit_fiber_derivative(psi: float) -> np.ndarray:
    return np.array([-math.sin(psi), -math.cos(psi)])


def fiber_angle(x) -> float:
    """Inverse of :func:`unit_fiber_vector` on nonzero vectors."""
    return math.atan2(-x[1], x[0])


def hyperspherical(angles: np.ndarray) -> np.ndarray:
    """Unit vector in R^(len(angles)+1) from standard hyperspherical angles."""
    r = len(angles) + 1
    out = np.ones(r)
    for i, a in enumerate(angles):
        out[i] *= math.cos(a)
        out[i + 1:] *= math.sin(a)
    return out


@dataclass
class SphereBundle:
    """Unit sphere bundle SE with charts ``<base>:S<label>``.

    Coordinates are the base coordinates followed by fiber angles.  For rank 2
    the fiber angle is periodic and two overlapping fiber charts are provided.
    """

    bundle: BundleWithConnection
    charts: Dict[str, Chart]
    base_of: Dict[str, str]

    def fiber_point(self, angles) -> np.ndarray:
        angles = np.atleast_1d(np.asarray(angles, float))
        if self.bundle.rank == 2:
            return unit_fiber_vector(angles[0])
        return hyperspherical(angles)

    def fiber_jacobian(self, angles) -> np.ndarray:
        angles = np.atleast_1d(np.asarray(angles, float))
        if self.bundle.rank == 2:
            return unit_fiber_derivative(angles[0]).reshape(2, 1)
        return jacobian_fd(hyperspherical, angles)

    def chart(self, name: str) -> Chart:
        return self.charts[name]

    def inclusion(self, chart: str) -> SmoothMap:
        """SE -> E, composed with the norm this is the constant 1."""
        ch = self.charts[chart]
        base = self.base_of[chart]
        n = self.bundle.base_dim
        return SmoothMap(ch, self.bundle.total_chart(base),
                         lambda q: np.concatenate([q[:n], self.fiber_point(q[n:])]),
                         lambda q: np.block([[np.eye(n), np.zeros((n, ch.dim - n))],
                                             [np.zeros((self.bundle.rank, n)), self.fiber_jacobian(q[n:])]]),
                         name="incl")

    def projection(self, chart: str) -> SmoothMap:
        ch = self.charts[chart]
        n = self.bundle.base_dim
        J = np.hstack([np.eye(n), np.zeros((n, ch.dim - n))])
        return SmoothMap(ch, self.bundle.chart(self.base_of[chart]), lambda q: q[:n], lambda q: J,
                         name="pi~")

    def chart_over(self, base: str, label: str = "a") -> str:
        return f"{base}:S{label}"


def sphere_bundle(B: BundleWithConnection) -> SphereBundle:
    r = B.rank
    if r < 2:
        raise DimensionError("sphere bundle needs rank >= 2")
    charts, base_of = {}, {}
    for name, ch in B.charts.items():
        base_periods = tuple(ch.periods) if ch.periods else (0.0,) * ch.dim
        if r == 2:
            fibers = {"a": ((-math.pi,), (3 * math.pi,)), "b": ((-3 * math.pi,), (math.pi,))}
            fper = (TWO_PI,)
        else:
            lo = (0.0,) * (r - 2) + (-math.pi,)
            hi = (math.pi,) * (r - 2) + (3 * math.pi,)
            fibers = {"a": (lo, hi)}
            fper = (0.0,) * (r - 2) + (TWO_PI,)
        for label, (lo, hi) in fibers.items():
            cname = f"{name}:S{label}"
            charts[cname] = Chart(cname, ch.dim + r - 1, tuple(ch.lower) + lo, tuple(ch.upper) + hi,
                                  ch.orientation, base_periods + fper, kind="sphere")
            base_of[cname] = name
    return SphereBundle(B, charts, base_of)


# ---------------------------------------------------------------------------
# Invariant checks
# ---------------------------------------------------------------------------


def overlap_points(B: BundleWithConnection, source: str, target: str, count: int, seed: int = 0):
    """Random points of ``source`` whose image lies well inside ``target``."""
    rng = np.random.default_rng(seed)
    src, tgt = B.chart(source), B.chart(target)
    t = B.transition(source, target)
    pts = []
    lo = np.asarray(src.lower, float)
    hi = np.asarray(src.upper, float)
    for i, per in enumerate(src.periods or ()):
        if per:
            lo[i] = 0.0
            hi[i] = per
    tries = 0
    while len(pts) < count and tries < 100 * count:
        tries += 1
        x = lo + (hi - lo) * rng.random(src.dim)
        if src.contains(x, 0.05) and tgt.contains(t.map(x), 0.05):
            pts.append(x)
    return pts


def transition_residuals(B: BundleWithConnection, count: int = 20, seed: int = 0) -> dict:
    """Worst residuals of the bundle invariants over sampled overlap points."""
    out = {"orthogonality": 0.0, "determinant": 0.0, "connection": 0.0, "curvature": 0.0, "orientation": 0}
    for t in B.transitions:
        for x in overlap_points(B, t.source, t.target, count, seed):
            g = t.frame(x)
            out["orthogonality"] = max(out["orthogonality"], float(np.max(np.abs(g @ g.T - np.eye(B.rank)))))
            out["determinant"] = max(out["determinant"], abs(float(np.linalg.det(g)) - 1.0))
            y = t.map(x)
            Jm = jacobian_fd(t.map, x) if t.coord_map else np.eye(len(x))
            w_src = B.omega(t.source, x)
            w_tgt = np.einsum("ija,ab->ijb", B.omega(t.target, y), Jm)
            dg = t.dframe(x)
            ginv = g.T
            expected = np.einsum("ik,kla,lj->ija", g, w_src, ginv) - np.einsum("ika,kj->ija", dg, ginv)
            out["connection"] = max(out["connection"], float(np.max(np.abs(w_tgt - expected))))
            R_src = B.curvature_array(t.source, x)
            R_tgt = np.einsum("ijcd,ca,db->ijab", B.curvature_array(t.target, y), Jm, Jm)
            R_exp = np.einsum("ik,klab,lj->ijab", g, R_src, ginv)
            out["curvature"] = max(out["curvature"], float(np.max(np.abs(R_tgt - R_exp))))
            sign_src = B.chart(t.source).orientation
            sign_tgt = B.chart(t.target).orientation
            if np.sign(np.linalg.det(Jm)) * sign_src != sign_tgt:
                out["orientation"] += 1
    return out


def bianchi_residual(B: BundleWithConnection, chart: str, x) -> float:
    """Max component of ``dR + omega ^ R - R ^ omega`` (a 3-form)."""
    n = B.chart(chart).dim
    if n < 3:
        return 0.0
    x = np.asarray(x, float)
    dR = np.stack([_partial(lambda y: B.curvature_array(chart, y), x, c, FD_STEP) for c in range(n)], axis=-1)
    w = B.omega(chart, x)
    R = B.curvature_array(chart, x)
    worst = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                cyc = [(a, b, c), (b, c, a), (c, a, b)]
                val = sum(dR[:, :, j, l, i] for i, j, l in cyc)
                val = val + sum(np.einsum("ik,kj->ij", w[:, :, i], R[:, :, j, l])
                                - np.einsum("ik,kj->ij", R[:, :, i, j], w[:, :, l]) for i, j, l in cyc)
                worst = max(worst, float(np.max(np.abs(val))))
    return worst


# ---------------------------------------------------------------------------
# Built-in fixtures
# ---------------------------------------------------------------------------


def trivial_bundle(rank: int = 2, base: str = "S2") -> BundleWithConnection:
    try:
        charts = BASES[base]()
    except KeyError:
        raise UnknownFixture(f"unknown base {base!r}") from None
    if base == "S2":
        charts = {k: v for k, v in charts.items() if k in ("north", "south")}
    n = next(iter(charts.values())).dim
    conn = {c: (lambda x: np.zeros((rank, rank, n))) for c in charts}
    dconn = {c: (lambda x: np.zeros((rank, rank, n, n))) for c in charts}
    trans = [Transition("north", "south", lambda x: np.eye(rank), frame_jac=lambda x: np.zeros((rank, rank, 2)))] \
        if base == "S2" else []
    return BundleWithConnection(f"trivial(r={rank},{base})", rank, charts, conn, dconn, trans, base)


def _u1_connection(coef: Callable[[float], float], dcoef: Callable[[float], float]):
    """Rank-2 connection ``omega_12 = coef(theta) dphi`` on (theta, phi)."""

    def w(x):
        out = np.zeros((2, 2, 2))
        c = coef(x[0])
        out[0, 1, 1] = c
        out[1, 0, 1] = -c
        return out

    def dw(x):
        out = np.zeros((2, 2, 2, 2))
        d = dcoef(x[0])
        out[0, 1, 1, 0] = d
        out[1, 0, 1, 0] = -d
        return out

    return w, dw


def _rot_transition(m: int) -> Transition:
    """North -> south frame change ``g = rot(-m phi)``."""

    def g(x):
        return rot(-m * x[1])

    def dg(x):
        a = -m * x[1]
        out = np.zeros((2, 2, 2))
        out[:, :, 1] = -m * np.array([[-math.sin(a), -math.cos(a)], [math.cos(a), -math.sin(a)]])
        return out

    return Transition("north", "south", g, frame_jac=dg)


def monopole_bundle(m: int) -> BundleWithConnection:
    """Charge-m bundle over S^2: ``omega_12 = (m/2)(1 -+ cos theta) dphi`` on the
    north/south caps."""
    if int(m) != m:
        raise ValueError("monopole charge must be an integer")
    m = int(m)
    charts = {k: v for k, v in s2_charts().items() if k in ("north", "south")}
    wn, dwn = _u1_connection(lambda th: 0.5 * m * (1 - math.cos(th)), lambda th: 0.5 * m * math.sin(th))
    ws, dws = _u1_connection(lambda th: -0.5 * m * (1 + math.cos(th)), lambda th: 0.5 * m * math.sin(th))
    return BundleWithConnection(f"monopole(m={m})", 2, charts, {"north": wn, "south": ws},
                                {"north": dwn, "south": dws}, [_rot_transition(m)], "S2", {"charge": m})


def _frame_vectors(x, hemisphere: str):
    th, ph = x[0], x[1]
    e_th = np.array([math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), -math.sin(th)])
    e_ph = np.array([-math.sin(ph), math.cos(ph), 0.0])
    c, s = math.cos(ph), math.sin(ph)
    if hemisphere == "north":
        return np.stack([c * e_th - s * e_ph, s * e_th + c * e_ph])
    return np.stack([c * e_th + s * e_ph, -s * e_th + c * e_ph])


def tangent_s2() -> BundleWithConnection:
    """Levi-Civita connection of the round sphere in the orthonormal frames
    obtained by rotating (e_theta, e_phi) by -+phi, smooth at each pole."""
    charts = {k: v for k, v in s2_charts().items() if k in ("north", "south")}
    wn, dwn = _u1_connection(lambda th: 1 - math.cos(th), lambda th: math.sin(th))
    ws, dws = _u1_connection(lambda th: -(1 + math.cos(th)), lambda th: math.sin(th))
    return BundleWithConnection("tangent_s2", 2, charts, {"north": wn, "south": ws},
                                {"north": dwn, "south": dws}, [_rot_transition(2)], "S2",
                                {"frames": _frame_vectors, "charge": 2})


def levi_civita_from_frames(frames: Callable, hemisphere: str, x) -> np.ndarray:
    """``omega_ij = <E_i, dE_j>`` from ambient frame vectors (finite differences)."""
    x = np.asarray(x, float)
    E = frames(x, hemisphere)
    out = np.zeros((2, 2, 2))
    for a in range(2):
        dE = _partial(lambda y: frames(y, hemisphere).ravel(), x, a, FD_STEP).reshape(E.shape)
        out[:, :, a] = E @ dE.T
    return out


def builtin(name: str, **params) -> BundleWithConnection:
    if name == "trivial":
        return trivial_bundle(int(params.get("rank", 2)), params.get("base", "S2"))
    if name == "tangent_s2":
        return tangent_s2()
    if name == "monopole":
        return monopole_bundle(params.get("m", params.get("charge", 1)))
    raise UnknownFixture(f"unknown built-in bundle {name!r}")


# ---------------------------------------------------------------------------
# Sections of the monopole bundles
# ---------------------------------------------------------------------------


def monopole_section(B: BundleWithConnection, coeffs: Dict[int, complex], name: str = "") -> SectionField:
    """``sum_j c_j cos^(m-j)(theta/2) sin^j(theta/2) e^(i j phi)`` in the north
    frame, transported to the south frame by ``e^(-i m phi)``; smooth on S^2."""
    m = B.meta["charge"]
    for j in coeffs:
        if not 0 <= j <= m:
            raise ValueError(f"mode {j} outside 0..{m}")

    def z_north(x):
        th, ph = x[0], x[1]
        c, s = math.cos(th / 2), math.sin(th / 2)
        return sum(complex(cj) * c ** (m - j) * s ** j * complex(math.cos(j * ph), math.sin(j * ph))
                   for j, cj in coeffs.items())

    def north(x):
        z = z_north(x)
        return np.array([z.real, z.imag])

    def south(x):
        z = z_north(x) * complex(math.cos(m * x[1]), -math.sin(m * x[1]))
        return np.array([z.real, z.imag])

    label = name or "+".join(f"{complex(c):g}Y{j}" for j, c in coeffs.items())
    return SectionField(B, {"north": north, "south": south}, name=label)


def section_zeros_two(B: BundleWithConnection) -> SectionField:
    """Charge-2 section ``Y0 + Y2``; it vanishes exactly at (pi/2, pi/2) and (pi/2, 3pi/2)."""
    if B.meta.get("charge") != 2:
        raise ValueError("two-zero section is defined for charge 2")
    return monopole_section(B, {0: 1.0, 2: 1.0}, "two-zero")
