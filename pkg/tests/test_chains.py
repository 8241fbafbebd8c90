import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from gbc_workbench import chains
from gbc_workbench.bundles import s1_charts, s2_charts
from gbc_workbench.chains import (
    AdmissibilityError, Cell, Chain, ModValue, UnsupportedRing, affine_cell, band_cell, bilinear_cell, boundary,
    integrate, latitude_cell, mod_distance, mod_reduce, parse_coefficient_ring,
)
from gbc_workbench.exterior import Chart, DimensionError, EvaluationError, FormField, GradedElement, d_field
from gbc_workbench.suites import stokes_residual

PLANE = Chart("plane", 2, (-5.0, -5.0), (5.0, 5.0))
S2 = s2_charts()


def area_form():
    return FormField(2, 0, lambda ch, x: GradedElement.basis(2, 0, (0, 1), value=math.sin(x[0])), 2, name="area")


def full_sphere():
    return Chain.of(band_cell(S2["sphere"], 0.0, math.pi))


def test_sphere_area():
    assert abs(integrate(area_form(), full_sphere(), 32) - 4 * math.pi) < 1e-8


def test_circle_length():
    circle = s1_charts()["circle"]
    dtheta = FormField(1, 0, lambda ch, x: GradedElement.dx(1, 0, 0), 1)
    c = Chain.of(affine_cell(circle, [0.0], [[2 * math.pi]]))
    assert integrate(dtheta, c) == pytest.approx(2 * math.pi, abs=1e-13)


def test_quadrilateral_vs_symbolic():
    x, y, u, v = sp.symbols("x y u v")
    rng = np.random.default_rng(4)
    for _ in range(3):
        coeffs = rng.integers(-3, 4, size=(3, 3))
        p = sum(int(coeffs[i, j]) * x ** i * y ** j for i in range(3) for j in range(3))
        corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float) + rng.uniform(-0.2, 0.2, (4, 2))
        pts = [sp.Matrix([sp.Rational(float(a)).limit_denominator(10 ** 6), sp.Rational(float(b)).limit_denominator(10 ** 6)])
               for a, b in corners]
        phi = (1 - u) * (1 - v) * pts[0] + u * (1 - v) * pts[1] + u * v * pts[2] + (1 - u) * v * pts[3]
        jac = phi.jacobian([u, v]).det()
        exact = float(sp.integrate(sp.expand(p.subs({x: phi[0], y: phi[1]}, simultaneous=True) * jac),
                                   (u, 0, 1), (v, 0, 1)))
        fp = sp.lambdify((x, y), p)
        form = FormField(2, 0, lambda ch, q: GradedElement.basis(2, 0, (0, 1), value=float(fp(q[0], q[1]))), 2)
        rational = np.array([[float(c) for c in P] for P in pts])
        assert abs(integrate(form, Chain.of(bilinear_cell(PLANE, rational))) - exact) < 1e-10


def test_degree_mismatch_and_domain():
    with pytest.raises(DimensionError):
        integrate(area_form(), Chain.of(latitude_cell(S2["sphere"], 1.0)))
    far = Chain.of(affine_cell(PLANE, [4.0, 4.0], [[2.0, 0.0], [0.0, 2.0]]))
    one = FormField(2, 0, lambda ch, x: GradedElement.basis(2, 0, (0, 1)), 2)
    with pytest.raises(EvaluationError):
        integrate(one, far)


def unit_square():
    return affine_cell(PLANE, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], "square")


def test_boundary_of_square():
    bd = boundary(Chain.of(unit_square()), simplify=False)
    assert len(bd) == 4
    signs = [coef for coef, _ in bd.terms]
    assert signs == [-1, 1, 1, -1]
    starts = [tuple(cell([0.0])) for _, cell in bd.terms]
    assert starts == [(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 1.0)]
    # x dy integrates to the enclosed area
    xdy = FormField(2, 0, lambda ch, q: GradedElement.dx(2, 0, 1) * q[0], 1)
    assert integrate(xdy, bd) == pytest.approx(1.0, abs=1e-14)


def test_boundary_of_point_refused():
    pt = Cell(0, PLANE, lambda u: np.zeros(2))
    with pytest.raises(DimensionError):
        boundary(Chain.of(pt))


@pytest.mark.parametrize("cell", [
    unit_square(),
    bilinear_cell(PLANE, [(0, 0), (1.2, 0.1), (1.0, 0.9), (-0.1, 1.1)]),
    band_cell(S2["sphere"], 0.3, 1.2),
    band_cell(S2["north"], 0.0, 1.0),
], ids=["square", "quad", "band", "cap"])
def test_boundary_squared_is_empty(cell):
    assert boundary(boundary(Chain.of(cell))).is_empty()


def test_cap_boundary_is_latitude():
    bd = boundary(Chain.of(band_cell(S2["north"], 0.0, 1.0)))
    assert len(bd) == 1
    one = FormField(2, 0, lambda ch, x: GradedElement.dx(2, 0, 1), 1)
    assert integrate(one, bd) == pytest.approx(2 * math.pi)


def test_stokes_random_forms():
    assert stokes_residual(50, seed=7) < 1e-8


def test_stokes_on_sphere_band():
    rng = np.random.default_rng(8)
    alpha = chains.polynomial_form(2, 1, rng, exact=False)
    c = Chain.of(band_cell(S2["sphere"], 0.4, 2.0))
    assert abs(integrate(d_field(alpha), c, 24) - integrate(alpha, boundary(c), 24)) < 1e-8


def test_additivity_and_orientation():
    f = area_form()
    a = Chain.of(band_cell(S2["sphere"], 0.2, 1.0))
    b = Chain.of(band_cell(S2["sphere"], 1.0, 2.5))
    assert integrate(f, a + b) == pytest.approx(integrate(f, a) + integrate(f, b), abs=1e-13)
    assert integrate(f, -a) == pytest.approx(-integrate(f, a), abs=1e-15)
    flipped = Chain.of(a.terms[0][1].reversed())
    assert integrate(f, flipped) == pytest.approx(-integrate(f, a), abs=1e-15)
    assert integrate(f, a * 3) == pytest.approx(3 * integrate(f, a))


def test_simplify_cancels_opposite_cells():
    cell = unit_square()
    assert (Chain.of(cell) - Chain.of(cell)).simplify().is_empty()
    assert Chain.of(cell, cell.reversed()).simplify().is_empty()


def test_chain_dimension_checks():
    with pytest.raises(DimensionError):
        Chain.of(unit_square(), latitude_cell(S2["sphere"], 1.0))
    with pytest.raises(ValueError):
        Chain([(0.5, unit_square())])


def test_mod_reduce_examples():
    assert mod_reduce(1.25).value == pytest.approx(0.25)
    assert mod_reduce(-0.25).value == pytest.approx(0.75)
    assert mod_reduce(3.0).value == 0.0
    assert 0.0 <= mod_reduce(-1e-18).value < 1.0
    with pytest.raises(ValueError):
        mod_reduce(1.0, 0.0)


def test_mod_distance_examples():
    assert mod_distance(ModValue(0.999), ModValue(0.001)) == pytest.approx(0.002)
    assert mod_distance(ModValue(0.3), ModValue(0.3)) == 0.0
    with pytest.raises(ValueError):
        mod_distance(ModValue(0.1, 1.0), ModValue(0.1, 2.0))


def test_mod_arithmetic():
    a, b = mod_reduce(0.75), mod_reduce(0.5)
    assert (a + b).value == pytest.approx(0.25)
    assert (b - a).value == pytest.approx(0.75)
    assert (-a).value == pytest.approx(0.25)


reals = st.floats(-1e3, 1e3, allow_nan=False)
moduli = st.sampled_from([1.0, 0.5, 2 * math.pi, 3.0])


@settings(max_examples=300, deadline=None)
@given(reals, reals, reals, moduli)
def test_mod_distance_is_a_metric(x, y, z, c):
    a, b, d = mod_reduce(x, c), mod_reduce(y, c), mod_reduce(z, c)
    assert 0.0 <= a.value < c
    dab = mod_distance(a, b)
    assert dab <= c / 2 + 1e-12
    assert dab == pytest.approx(mod_distance(b, a))
    assert mod_distance(a, a) == 0.0
    assert dab <= mod_distance(a, d) + mod_distance(d, b) + 1e-9


@settings(max_examples=100, deadline=None)
@given(reals, st.integers(-50, 50), moduli)
def test_mod_reduce_ignores_lattice_shift(x, n, c):
    assert mod_distance(mod_reduce(x, c), mod_reduce(x + n * c, c)) < 1e-9


def test_coefficient_ring_parser():
    assert parse_coefficient_ring("Z") == 1.0
    assert parse_coefficient_ring("2Z") == 2.0
    assert parse_coefficient_ring("0.5*Z") == 0.5
    for bad in ("Q", "R", "ℚ", "ring"):
        with pytest.raises(UnsupportedRing):
            parse_coefficient_ring(bad)


def test_cells_stay_in_charts():
    assert Chain.of(band_cell(S2["sphere"], 0.2, 1.0)).check_in_charts()
    edge = Chain.of(affine_cell(PLANE, [4.5, 0.0], [[1.0, 0.0], [0.0, 1.0]]))
    assert not edge.check_in_charts()


def test_degenerate_cells():
    pinched = Cell(2, PLANE, lambda u: np.array([u[0], 0.0]))
    assert pinched.is_degenerate()
    assert not unit_square().is_degenerate()


def test_witness_residual_of_boundary():
    forms = chains.test_form_battery(2, 1, count=6, seed=1)
    c = Chain.of(bilinear_cell(PLANE, [(0, 0), (1.2, 0.1), (1.0, 0.9), (-0.1, 1.1)]))
    assert chains.witness_residual(boundary(c), forms) < 1e-9
    assert chains.witness_residual(Chain(dim=1), forms) == 0.0


def test_admissibility_error_is_value_error():
    assert issubclass(AdmissibilityError, ValueError)


def test_area_convergence_order_doubling():
    # error on the sphere-area fixture must drop by at least 100x from order 16 to 32
    f, c = area_form(), full_sphere()
    e16 = abs(integrate(f, c, 16) - 4 * math.pi)
    e32 = abs(integrate(f, c, 32) - 4 * math.pi)
    ratio = e16 / e32 if e32 > 0 else math.inf
    assert ratio >= 1e2, f"error ratio {ratio:.3g} (errors {e16:.3g}, {e32:.3g})"


def test_chain_battery_separates_points():
    p = Cell(0, PLANE, lambda u: np.array([0.1, 0.2]))
    q = Cell(0, PLANE, lambda u: np.array([0.7, -0.3]))
    diff = Chain([(1, p), (-1, q)])
    closed = chains.test_form_battery(2, 0)
    assert chains.witness_residual(diff, closed) < 1e-14
    assert chains.witness_residual(diff, chains.chain_battery(2, 0)) > 1e-3
