import math
import warnings

import numpy as np
import pytest

from gbc_workbench import ak_pairs as akp
from gbc_workbench import chains
from gbc_workbench.bundles import s2_charts
from gbc_workbench.chains import (
    AdmissibilityError, Chain, ModValue, band_cell, bilinear_cell, boundary, integrate, latitude_cell,
    mod_distance, mod_reduce,
)
from gbc_workbench.exterior import FormField, GradedElement
from gbc_workbench.suites import dirac_samples

C = s2_charts()
SPHERE = C["sphere"]


def upper():
    return Chain.of(band_cell(SPHERE, 0.0, math.pi / 2))


def equator():
    return Chain.of(latitude_cell(SPHERE, math.pi / 2))


def south_cap(delta):
    return Chain.of(band_cell(C["south"], math.pi - delta, math.pi))


def test_admissibility_examples():
    P = akp.dirac_pair()
    assert akp.is_admissible(P, upper())
    # boundary through the south pole
    through = Chain.of(bilinear_cell(SPHERE, [(2.5, 0.0), (math.pi, 0.0), (math.pi, 0.5), (2.5, 0.5)]))
    assert not akp.is_admissible(P, through)


def test_clearance_rule():
    eps = 1e-2
    P = akp.dirac_pair(clearance=eps)
    # boundary latitude at chordal distance eps/2 from the south pole
    theta = math.pi - 2 * math.asin(eps / 4)
    near = Chain.of(band_cell(SPHERE, 1.0, theta))
    assert not akp.is_admissible(P, near)
    far = Chain.of(band_cell(SPHERE, 1.0, math.pi - 2 * math.asin(eps)))
    assert akp.is_admissible(P, far)


def test_dirac_periods():
    P = akp.dirac_pair()
    assert abs(akp.period(P, upper())) < 1e-6
    # a cap around the singular point carries the unit flux
    assert abs(akp.period(P, south_cap(0.5)) - 1.0) < 1e-6
    # the sphere minus a small south cap has period 0 with this potential
    rest = Chain.of(band_cell(SPHERE, 0.0, math.pi - 1e-2))
    assert abs(akp.period(P, rest)) < 1e-6


def test_inadmissible_period_raises():
    P = akp.dirac_pair()
    with pytest.raises(AdmissibilityError):
        akp.period(P, Chain.of(band_cell(SPHERE, 1.0, math.pi - 1e-4)))


def test_exact_pair_periods_vanish():
    P = akp.exact_pair(seed=3)
    for c in dirac_samples(6, seed=2)[:3] + [upper()]:
        assert abs(akp.period(P, c, order=24)) < 1e-8


def test_pair_extension():
    P = akp.dirac_pair()
    pts = [(C["north"], np.array([0.5, 0.3])), (SPHERE, np.array([2.0, 1.0]))]
    assert P.extension_residual(pts) < 1e-6
    P.validate(pts)
    bad = akp.dirac_pair(1.7)
    with pytest.raises(ValueError):
        bad.validate(pts)


def test_singular_dimension_bounds():
    P = akp.dirac_pair()
    with pytest.raises(ValueError):
        akp.AkPair(2, P.omega, P.phi, akp.SingularSet(points=[np.zeros(3)], max_dim=0),
                   akp.SingularSet(cells=[latitude_cell(SPHERE, 1.0)]))


def test_check_pair_integrality():
    samples = dirac_samples(20, seed=0)
    rep = akp.check_pair(akp.dirac_pair(), samples)
    assert rep.skipped == 0 and len(rep.residuals) == 20
    assert rep.passed and rep.max_residual < 1e-5
    bad = akp.check_pair(akp.dirac_pair(1.7), samples)
    assert bad.max_residual > 0.1 and not bad.passed


def test_check_pair_empty_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = akp.check_pair(akp.dirac_pair(), [])
    assert rep.passed and rep.warnings and caught


def test_equator_evaluations():
    P = akp.dirac_pair()
    a = akp.eval_induced_character(P, upper(), Chain(dim=1), equator())
    b = akp.eval_induced_character(P, Chain(dim=2), equator(), equator())
    assert mod_distance(a, ModValue(0.5)) < 1e-6
    assert mod_distance(b, ModValue(0.5)) < 1e-6
    assert akp.decomposition_independence(P, equator(), [(upper(), Chain(dim=1)), (Chain(dim=2), equator())]) < 1e-5


def test_decomposition_independence_differing_by_sphere():
    # c~ = c + (sphere minus a south cap): the two decompositions differ by an integer period
    P = akp.dirac_pair()
    z = Chain.of(latitude_cell(SPHERE, 2.0))
    c = Chain.of(band_cell(SPHERE, 0.0, 2.0))
    rest = Chain.of(band_cell(SPHERE, 2.0, math.pi - 0.3))
    cap_edge = Chain.of(latitude_cell(SPHERE, math.pi - 0.3))
    # z = d(c), and also z = d(c + rest) + (z - cap_edge)
    res = akp.decomposition_independence(P, z, [(c, Chain(dim=1)), (c + rest, z - cap_edge)])
    assert res < 1e-5


def test_bad_decomposition_detected():
    P = akp.dirac_pair()
    with pytest.raises(ValueError):
        half = Chain.of(latitude_cell(SPHERE, math.pi / 2, turns=0.5))
        akp.eval_induced_character(P, Chain(dim=2), half, equator())


def test_character_axiom():
    P = akp.dirac_pair()
    c = Chain.of(bilinear_cell(SPHERE, [(0.5, 0.2), (1.4, 0.3), (1.3, 1.5), (0.6, 1.4)]))
    z = boundary(c)
    val = akp.eval_induced_character(P, c, Chain(dim=1), z)
    assert mod_distance(val, mod_reduce(integrate(P.omega, c))) < 1e-5


def test_tiny_circle_near_north_pole():
    P = akp.dirac_pair()
    delta = 1e-2
    cap = Chain.of(band_cell(C["north"], 0.0, delta))
    z = boundary(cap)
    val = akp.eval_induced_character(P, cap, Chain(dim=1), z)
    assert mod_distance(val, ModValue(0.0)) < delta ** 2


def test_additivity():
    P = akp.dirac_pair()
    c1 = Chain.of(band_cell(SPHERE, 0.3, 1.0))
    c2 = Chain.of(bilinear_cell(SPHERE, [(1.5, 0.2), (2.2, 0.3), (2.1, 1.5), (1.6, 1.4)]))
    z1, z2 = boundary(c1), boundary(c2)
    a = akp.eval_induced_character(P, c1, Chain(dim=1), z1)
    b = akp.eval_induced_character(P, c2, Chain(dim=1), z2)
    ab = akp.eval_induced_character(P, c1 + c2, Chain(dim=1), z1 + z2)
    assert mod_distance(ab, a + b) < 1e-5


def test_shift_by_global_form():
    P = akp.dirac_pair()
    alpha = chains.polynomial_form(2, 1, np.random.default_rng(5), exact=False)
    alpha = FormField(2, 0, alpha.evaluator, 1, name="alpha")
    Q = akp.shifted(P, alpha)
    for z, dec in [(equator(), (Chain(dim=2), equator())),
                   (Chain.of(latitude_cell(SPHERE, 0.8)), (Chain(dim=2), Chain.of(latitude_cell(SPHERE, 0.8))))]:
        base = akp.eval_induced_character(P, *dec)
        moved = akp.eval_induced_character(Q, *dec)
        assert mod_distance(moved, base + mod_reduce(integrate(alpha, z)).value) < 1e-5


def test_scaled_pair_modulus():
    P = akp.dirac_pair()
    P3 = akp.scaled_pair(P, 3.0)
    assert P3.modulus == 3.0
    rep = akp.check_pair(P3, dirac_samples(8, seed=1))
    assert rep.passed
    v1 = akp.eval_induced_character(P, upper(), Chain(dim=1))
    v3 = akp.eval_induced_character(P3, upper(), Chain(dim=1))
    assert abs(v3.value - 3 * v1.value) < 1e-8


def test_singular_set_geometry():
    S = akp.SingularSet(points=[np.array([0.0, 0.0, -1.0])])
    assert S.dim == 0 and not S.is_empty()
    assert S.distance([0.0, 0.0, 1.0]) == pytest.approx(2.0)
    assert akp.SingularSet().distance([0.0, 0.0, 1.0]) == math.inf
    assert akp.SingularSet().contained_in(S)
    assert S.contained_in(S) and not S.contained_in(akp.SingularSet(points=[np.zeros(3)]))
