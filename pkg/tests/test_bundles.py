import math

import numpy as np
import pytest

from gbc_workbench.bundles import (
    BundleWithConnection, Chart, SectionField, UnknownFixture, bianchi_residual, builtin, constant_section,
    covariant_derivative, covariant_derivative_array, curvature, levi_civita_from_frames, monopole_bundle,
    overlap_points, pullback_bundle, section_zeros_two, sphere_bundle, tangent_s2, tautological_section,
    total_space_bundle, transition_residuals, trivial_bundle, unit_fiber_vector,
)
from gbc_workbench.chains import integrate
from gbc_workbench.exterior import DERIVATIVE_TOL, DimensionError, FormField, GradedElement, SmoothMap
from gbc_workbench.suites import s2_fundamental

RNG_POINTS = [(0.4, 0.3), (1.2, 2.5), (2.0, -0.7)]


def r12(B, chart, x):
    return B.curvature_array(chart, x)[0, 1, 0, 1]


def test_flat_curvature_zero():
    for base in ("S2", "T2", "S1"):
        B = trivial_bundle(2, base)
        for ch in B.charts:
            x = np.full(B.chart(ch).dim, 0.8)
            assert np.all(B.curvature_array(ch, x) == 0.0)


@pytest.mark.parametrize("m", [1, 2, 3, -1])
def test_monopole_curvature(m):
    B = monopole_bundle(m)
    for th, ph in RNG_POINTS:
        want = 0.5 * m * math.sin(th)
        if th < 0.75 * math.pi:
            assert r12(B, "north", (th, ph)) == pytest.approx(want, abs=1e-12)
        if th > 0.25 * math.pi:
            assert r12(B, "south", (th, ph)) == pytest.approx(want, abs=1e-12)
    R = curvature(B, "north", (1.0, 0.5))
    assert R[0, 1] == GradedElement.basis(2, 0, (0, 1), value=0.5 * m * math.sin(1.0))
    assert R[1, 0] == -R[0, 1]


def test_tangent_curvature_and_levi_civita_oracle():
    B = tangent_s2()
    frames = B.meta["frames"]
    for th, ph in RNG_POINTS:
        if th < 0.75 * math.pi:
            assert r12(B, "north", (th, ph)) == pytest.approx(math.sin(th), abs=1e-12)
            w = levi_civita_from_frames(frames, "north", (th, ph))
            assert np.max(np.abs(w - B.omega("north", (th, ph)))) < DERIVATIVE_TOL
        if th > 0.25 * math.pi:
            w = levi_civita_from_frames(frames, "south", (th, ph))
            assert np.max(np.abs(w - B.omega("south", (th, ph)))) < DERIVATIVE_TOL


def test_tangent_curvature_integral():
    B = tangent_s2()
    f = FormField(2, 0, lambda ch, x: curvature(B, ch.name, x)[0, 1], 2, B.charts)
    assert integrate(f, s2_fundamental(B), 32) == pytest.approx(4 * math.pi, abs=1e-10)


@pytest.mark.parametrize("B", [monopole_bundle(1), monopole_bundle(2), monopole_bundle(3), tangent_s2(),
                               trivial_bundle(2, "S2")], ids=lambda B: B.name)
def test_transition_invariants(B):
    res = transition_residuals(B, count=20)
    assert res["orthogonality"] < 1e-10
    assert res["determinant"] < 1e-10
    assert res["connection"] < 1e-8
    assert res["curvature"] < 1e-6
    assert res["orientation"] == 0


def test_monopole_overlap_identity():
    m = 1
    B = monopole_bundle(m)
    for x in overlap_points(B, "north", "south", 10):
        diff = B.omega("south", x)[0, 1] - B.omega("north", x)[0, 1]
        assert diff == pytest.approx(np.array([0.0, -m]), abs=1e-12)


def test_builtin_errors():
    with pytest.raises(UnknownFixture):
        builtin("klein")
    with pytest.raises(ValueError):
        monopole_bundle(1.5)
    assert builtin("trivial", rank=2, base="T2").curvature_array("torus", (0.1, 0.2)).any() == False  # noqa: E712


def test_pullback_bundle():
    B = monopole_bundle(2)
    north = B.chart("north")
    ident = SmoothMap(north, north, lambda x: x, lambda x: np.eye(2), name="id")
    P = pullback_bundle(B, ident)
    x = np.array([1.0, 0.4])
    assert np.allclose(P.omega("north", x), B.omega("north", x))
    const = SmoothMap(north, north, lambda x: np.array([1.0, 1.0]), lambda x: np.zeros((2, 2)), name="c")
    assert np.max(np.abs(pullback_bundle(B, const).curvature_array("north", x))) < 1e-9
    sq = Chart("square", 2, (0.2, 0.2), (1.0, 1.0))
    m = SmoothMap(sq, north, lambda u: np.array([u[0] + u[1] ** 2, 2 * u[1] - u[0]]),
                  lambda u: np.array([[1.0, 2 * u[1]], [-1.0, 2.0]]), name="m")
    Pm = pullback_bundle(B, m)
    for u in [(0.5, 0.6), (0.4, 0.8)]:
        u = np.array(u)
        J = m.jacobian(u)
        pulled = np.einsum("ijcd,ca,db->ijab", B.curvature_array("north", m(u)), J, J)
        assert np.max(np.abs(Pm.curvature_array("square", u) - pulled)) < DERIVATIVE_TOL


def test_pullback_bundle_chart_mismatch():
    B = monopole_bundle(1)
    other = Chart("other", 2, (0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        pullback_bundle(B, SmoothMap(other, other, lambda x: x))


def test_covariant_derivative_examples():
    B = trivial_bundle(2, "T2")
    s = constant_section(B, (1.0, -2.0))
    assert covariant_derivative(B, s, "torus", (0.3, 0.4)).is_zero()
    x = tautological_section(B)
    E = x.bundle
    q = np.array([0.3, 0.4, 1.5, -0.5])
    want = GradedElement(4, 2, {((2,), (0,)): 1.0, ((3,), (1,)): 1.0})
    assert covariant_derivative(E, x, "torus:E", q) == want


def test_covariant_leibniz():
    B = monopole_bundle(2)
    s = section_zeros_two(B)
    f = lambda x: 1.0 + 0.3 * math.sin(x[0]) * math.cos(x[1])  # noqa: E731
    df = lambda x: np.array([0.3 * math.cos(x[0]) * math.cos(x[1]), -0.3 * math.sin(x[0]) * math.sin(x[1])])  # noqa
    fs = SectionField(B, {c: (lambda c: (lambda x: f(x) * s(c, x)))(c) for c in B.charts})
    for x in [(1.0, 0.5), (0.6, 2.0)]:
        x = np.array(x)
        lhs = covariant_derivative_array(B, fs, "north", x)
        rhs = np.outer(s("north", x), df(x)) + f(x) * covariant_derivative_array(B, s, "north", x)
        assert np.max(np.abs(lhs - rhs)) < DERIVATIVE_TOL


def test_tautological_values():
    B = monopole_bundle(1)
    x = tautological_section(B)
    assert np.allclose(x("north:E", (1.0, 0.0, 1.0, 0.0)), (1.0, 0.0))
    assert np.sum(x("north:E", (1.0, 0.0, 3.0, 4.0)) ** 2) == 25.0


def test_sphere_bundle():
    B = monopole_bundle(1)
    S = sphere_bundle(B)
    assert set(S.charts) == {"north:Sa", "north:Sb", "south:Sa", "south:Sb"}
    incl = S.inclusion("north:Sa")
    assert np.allclose(incl((1.0, 0.5, 0.0))[2:], (1.0, 0.0))
    for q in [(1.0, 0.5, 0.3), (2.0, -1.0, 4.0)]:
        q = np.array(q)
        assert np.linalg.norm(incl(q)[2:]) == pytest.approx(1.0)
        assert np.allclose(S.projection("north:Sa")(q), incl(q)[:2])
    assert incl.jacobian_residual([(1.0, 0.5, 0.3)]) < DERIVATIVE_TOL
    with pytest.raises(DimensionError):
        sphere_bundle(trivial_bundle(1, "S1"))


def test_lift_projects_to_loop():
    B = monopole_bundle(2)
    S = sphere_bundle(B)
    s = section_zeros_two(B)
    proj = S.projection("north:Sa")
    for ph in np.linspace(0, 2 * math.pi, 9):
        x = np.array([0.5, ph])
        v = s("north", x)
        psi = math.atan2(-v[1], v[0])
        assert np.allclose(unit_fiber_vector(psi), v / np.linalg.norm(v))
        assert np.allclose(proj(np.array([0.5, ph, psi])), x)


def test_section_compatibility():
    B = monopole_bundle(2)
    s = section_zeros_two(B)
    pts = overlap_points(B, "north", "south", 20)
    assert s.compatibility_residual({("north", "south"): pts}) < 1e-8
    assert np.linalg.norm(s("north", (math.pi / 2, math.pi / 2))) < 1e-14
    assert np.linalg.norm(s("south", (math.pi / 2, 3 * math.pi / 2))) < 1e-14


def test_total_space_bundle_shape():
    E = total_space_bundle(monopole_bundle(1))
    assert E.base_dim == 4
    q = np.array([1.0, 0.2, 0.3, 0.4])
    assert np.allclose(E.omega("north:E", q)[:, :, :2], monopole_bundle(1).omega("north", q[:2]))


def test_bianchi_on_three_dimensional_chart():
    # non-abelian rank-3 connection with polynomial coefficients on a cube
    cube = Chart("cube", 3, (-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 3, 3, 3))

    def conn(x):
        w = np.einsum("ijab,b->ija", A, x) + np.einsum("ijab,b->ija", A, x ** 2)
        return w - np.swapaxes(w, 0, 1)

    B = BundleWithConnection("cube", 3, {"cube": cube}, {"cube": conn}, base="cube")
    for x in [(0.1, -0.2, 0.3), (0.4, 0.1, -0.5)]:
        assert bianchi_residual(B, "cube", x) < 1e-6
    assert bianchi_residual(monopole_bundle(1), "north", (1.0, 0.3)) == 0.0
